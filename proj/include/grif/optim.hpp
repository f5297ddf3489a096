#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "grif/tensor.hpp"

namespace grif::tc {

// Linear warmup to `peak` over `warmup` steps, then half-cosine decay to zero
// over `decay` steps, clamped at zero afterwards. Continuous at step == warmup.
inline double lr_at(int64_t step, double peak, int64_t warmup, int64_t decay) {
    if (step < 0) throw std::invalid_argument("lr_at: negative step");
    if (warmup < 1 || decay < 1) throw std::invalid_argument("lr_at: warmup and decay must be >= 1");
    if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
    const double x = static_cast<double>(step - warmup) / static_cast<double>(decay);
    if (x >= 1.0) return 0.0;
    return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * x));
}

// Adam with bias correction. Moment buffers are keyed positionally: the same
// parameter list (same order, same shapes) must be passed to every step.
template <typename Real>
struct AdamStateT {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int64_t step = 0;
    std::vector<std::vector<Real>> m;
    std::vector<std::vector<Real>> v;
};

using AdamState = AdamStateT<float>;

// One update over `params` using their accumulated gradients; gradients are
// zeroed afterwards. lr = 0 still advances the moments and the step counter.
template <typename Real>
void adam_step(std::vector<TensorT<Real>>& params, AdamStateT<Real>& state, double lr) {
    if (lr < 0) throw std::invalid_argument("adam_step: negative learning rate");
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(static_cast<size_t>(params[i].numel()), Real(0));
            state.v[i].assign(static_cast<size_t>(params[i].numel()), Real(0));
        }
    }
    if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: parameter count changed");

    state.step += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].data();
        auto& g = params[i].grad();
        if (state.m[i].size() != p.size())
            throw std::invalid_argument("adam_step: parameter " + std::to_string(i) + " changed shape");
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t j = 0; j < p.size(); ++j) {
            const double gj = g[j];
            m[j] = static_cast<Real>(b1 * m[j] + (1.0 - b1) * gj);
            v[j] = static_cast<Real>(b2 * v[j] + (1.0 - b2) * gj * gj);
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] = static_cast<Real>(p[j] - lr * mhat / (std::sqrt(vhat) + state.epsilon));
        }
        params[i].zero_grad();
    }
}

}  // namespace grif::tc
