#pragma once

#include <array>
#include <string>
#include <vector>

#include "grif/rng.hpp"
#include "grif/sim.hpp"

namespace grif::lang {

inline constexpr int kUnkId = 0;

int vocab_size();
const std::vector<std::string>& vocabulary();

// Lowercase whitespace tokenization against the fixed vocabulary; unknown
// words map to kUnkId. Empty or all-whitespace input is an error.
std::vector<int> tokenize(const std::string& instruction);

// Canonical template per task kind.
std::string make_instruction(const sim::TaskSpec& task);

// Exactly five deterministic variants of a canonical instruction, produced by
// substituting from a fixed synonym table. Unknown phrasing is an error.
std::array<std::string, 5> paraphrases(const std::string& instruction);

// Uniform draw among the canonical instruction and its first n_variants
// paraphrases (n_variants in 0..5).
std::string sample_instruction(const std::string& instruction, Rng& rng, int n_variants = 5);

// Synthetic caption for static-scene pretraining: "a scene with a pepper and
// a pan", types listed in enum order.
std::string caption_for_types(const std::vector<sim::ObjectType>& types);

}  // namespace grif::lang
