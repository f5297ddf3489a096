#pragma once

#include <vector>

#include "grif/config.hpp"
#include "grif/dataset.hpp"
#include "grif/encoders.hpp"
#include "grif/metrics.hpp"
#include "grif/rng.hpp"
#include "grif/tensor.hpp"

namespace grif::align {

// Bidirectional InfoNCE over unit-norm embedding rows: C_ij = cos(l_i, g_j)/tau,
// loss = mean_i -log softmax_row(C)_ii + mean_i -log softmax_col(C)_ii. The
// k-1 other in-batch pairs serve as negatives in both directions.
// Errors: k < 2, shape mismatch, non-unit rows, tau <= 0.
tc::Tensor infonce_task_loss(const tc::Tensor& z_lang, const tc::Tensor& z_goal, double tau);

// Fraction of rows whose own column is the argmax (lang -> goal direction).
double in_batch_top1(const tc::Tensor& z_lang, const tc::Tensor& z_goal);

// Two dataloaders in parallel: each batch is half drawn from a reshuffled
// permutation and half from a sequential sweep in storage order. Since the
// dataset is stored scene-grouped, the sequential half provides many
// same-scene negatives; the sweep covers every trajectory each epoch.
class SceneGroupedBatcher {
public:
    SceneGroupedBatcher(size_t dataset_size, int batch_size, Rng rng);
    std::vector<uint32_t> next();

private:
    size_t n_;
    int half_;
    Rng rng_;
    std::vector<uint32_t> perm_;
    size_t perm_pos_ = 0;
    size_t seq_pos_ = 0;
};

struct AlignOutcome {
    enc::TaskEncoders encoders;
    std::vector<MetricRow> log;
};

// Stage-1 alignment of f(instruction) and h(s_0, g) on the labeled dataset.
// Aborts with a structured error if the loss becomes non-finite.
AlignOutcome train_align(const data::Dataset& d_a, const Config& cfg, uint64_t seed, enc::TaskEncoders init);

}  // namespace grif::align
