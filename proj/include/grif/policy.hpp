#pragma once

#include <vector>

#include "grif/checkpoint.hpp"
#include "grif/config.hpp"
#include "grif/dataset.hpp"
#include "grif/encoders.hpp"
#include "grif/metrics.hpp"
#include "grif/rng.hpp"
#include "grif/sim.hpp"
#include "grif/tensor.hpp"

namespace grif::policy {

inline constexpr int kStateDim = 12 * 12 * 10;
inline constexpr int kHidden = 256;
inline constexpr int kActionDim = 3;
inline constexpr int kFilmHidden = 64;

// Task-conditioned Gaussian policy: a flattened-state trunk of two hidden
// layers, FiLM-modulated at the end of each block by the task embedding, and
// a linear head predicting the action mean. Sigma is fixed (config), not a
// parameter.
struct PolicyParams {
    tc::Tensor fc1_w, fc1_b;      // 1440 -> 256
    tc::Tensor fc2_w, fc2_b;      // 256 -> 256
    tc::Tensor head_w, head_b;    // 256 -> 3
    tc::Tensor film1_w, film1_b;  // 32 -> 64
    tc::Tensor film2_w, film2_b;  // 64 -> 4*256 (scale, shift per hidden layer)

    static PolicyParams init(Rng& rng);
    std::vector<tc::Tensor> trainable();
    PolicyParams detached() const;
    PolicyParams clone() const;
    NamedTensors named(const std::string& prefix = "policy") const;
    static PolicyParams from_named(const NamedTensors& params, const std::string& prefix = "policy");
};

// Action-mean forward for a batch: s_flat (B,1440), z (B,32) unit-norm rows.
// FiLM scales are parameterized as 1 + delta so zero-initialized conditioner
// weights start at the identity modulation.
tc::Tensor policy_forward_batch(PolicyParams& p, const tc::Tensor& s_flat, const tc::Tensor& z);

// Trunk with explicit modulation tensors (each (B,256)); the conditioner is
// bypassed. scale = ones, shift = zeros reproduces the unconditioned trunk.
tc::Tensor trunk_with_film(PolicyParams& p, const tc::Tensor& s_flat, const tc::Tensor& scale1,
                           const tc::Tensor& shift1, const tc::Tensor& scale2, const tc::Tensor& shift2);

// Flatten a rendered state image into a (1,1440) row.
tc::Tensor flatten_state(const tc::Tensor& image);

// Deterministic rollout action: the predicted mean clamped to [-1,1]^3.
sim::Action policy_act(PolicyParams& p, const sim::SimState& state, const tc::Tensor& z_row);

// -log N(action; mu, sigma^2 I) = ||a - mu||^2 / (2 sigma^2) + D ln(sigma sqrt(2 pi)).
tc::Tensor gaussian_nll(const tc::Tensor& mu, const tc::Tensor& action, double sigma);        // (3,) -> scalar
tc::Tensor gaussian_nll_rows(const tc::Tensor& mu, const tc::Tensor& actions, double sigma);  // (B,3) -> (B,1)

// Goal selection for the goal-conditioned term. Labeled trajectories always
// take the final achieved state; unlabeled ones take it with probability
// `final_prob` and otherwise a uniform strictly-future intermediate state
// (falling back to the final state when none exists). `relabeled` reports
// which branch was taken.
struct GoalChoice {
    int index = 0;
    bool relabeled = false;
};
GoalChoice sample_goal(const sim::Trajectory& traj, bool from_unlabeled, int t, Rng& rng, double final_prob = 0.5);

struct PolicyOutcome {
    PolicyParams policy;
    enc::TaskEncoders encoders;  // fine-tuned visual side when mode = joint
    std::vector<MetricRow> log;
};

// Stage-2 behavioral cloning on D_A (language + goal terms) and D_B (goal
// term only), with relabeling, frozen/joint encoder modes, and the optional
// joint alignment loss. Aborts with a structured error on divergence.
PolicyOutcome train_policy(const data::Dataset& d_a, const data::Dataset& d_b, const enc::TaskEncoders& encoders,
                           const Config& cfg, uint64_t seed);

}  // namespace grif::policy
