#pragma once

#include <string>
#include <vector>

#include "grif/config.hpp"
#include "grif/sim.hpp"

namespace grif::data {

// Trajectories in storage order, grouped by scene. The grouping is
// load-bearing: the sequential dataloader half of the alignment trainer
// relies on same-scene trajectories being adjacent.
struct Dataset {
    std::vector<sim::Trajectory> trajectories;

    size_t size() const { return trajectories.size(); }
    bool empty() const { return trajectories.empty(); }
};

struct GeneratedData {
    Dataset d_a;      // annotated demonstrations
    Dataset d_b;      // unlabeled play data (instructions dropped)
    Dataset heldout;  // annotated held-out-combo trajectories in eval scenes
};

// Deterministic generation: (config, seed) fully determines every byte.
// Held-out (kind, subject) combos never appear as D_A instructions; their
// tasks do occur in D_B. Throws if the held-out set covers all tasks.
GeneratedData generate_datasets(const Config& cfg, uint64_t seed);

// Single-state scenes with synthetic captions for the pseudo-pretraining
// stage; consecutive scenes cycle through distinct object-type subsets.
Dataset generate_static_captions(const Config& cfg, uint64_t seed);

// Directory layout: `index` (magic GRIFDATA\0, version, one record per
// trajectory: id, scene_id, offset, length, has_instruction flag) plus
// `trajectories.bin` (same magic, length-prefixed records: header, state
// tensors, action triples, optional UTF-8 instruction). Everything
// little-endian; round-trips are exact.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace grif::data
