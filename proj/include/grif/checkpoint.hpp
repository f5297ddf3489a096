#pragma once

#include <string>
#include <utility>
#include <vector>

#include "grif/tensor.hpp"

namespace grif {

// Ordered, name-unique parameter collection; the unit of persistence.
using NamedTensors = std::vector<std::pair<std::string, tc::Tensor>>;

// Versioned binary tensor archive. Layout (all integers little-endian):
//   magic "GRIFCKPT", version u32, count u32, then per entry:
//   name_len u16, name bytes, ndim u8, dims u32 x ndim, dtype u8 (0 = real32),
//   payload (product(dims) * 4 bytes of raw IEEE-754 bits).
// Round-trips are bit-exact.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const NamedTensors& params, const std::string& path);
NamedTensors load_checkpoint(const std::string& path);

// Lookup helpers; throw on missing names.
const tc::Tensor& find_tensor(const NamedTensors& params, const std::string& name);
bool has_tensor(const NamedTensors& params, const std::string& name);

// FNV-1a over the serialized payload; used for freeze-contract checks.
uint64_t params_hash(const NamedTensors& params);

}  // namespace grif
