#include "grif/align.hpp"

#include <cmath>
#include <stdexcept>

#include "grif/instructions.hpp"
#include "grif/optim.hpp"

namespace grif::align {

tc::Tensor infonce_task_loss(const tc::Tensor& z_lang, const tc::Tensor& z_goal, double tau) {
    if (tau <= 0) throw std::invalid_argument("infonce: tau must be positive");
    if (z_lang.rank() != 2 || z_goal.rank() != 2 || z_lang.shape() != z_goal.shape())
        throw std::invalid_argument("infonce: embedding shapes differ: " + tc::Tensor::shape_str(z_lang.shape()) +
                                    " vs " + tc::Tensor::shape_str(z_goal.shape()));
    const int k = z_lang.dim(0);
    if (k < 2) throw std::invalid_argument("infonce: need at least 2 rows, got " + std::to_string(k));
    for (const tc::Tensor* z : {&z_lang, &z_goal}) {
        const int d = z->dim(1);
        for (int i = 0; i < k; ++i) {
            double s = 0;
            for (int j = 0; j < d; ++j) {
                const double v = z->at(i, j);
                s += v * v;
            }
            if (std::abs(std::sqrt(s) - 1.0) > 1e-3)
                throw std::domain_error("infonce: row " + std::to_string(i) + " is not unit-norm");
        }
    }

    // Rows are unit-norm, so the Gram matrix holds cosines.
    tc::Tensor logits = tc::scale(matmul(z_lang, transpose(z_goal)), static_cast<float>(1.0 / tau));
    tc::Tensor lang_to_goal = tc::scale(mean_all(take_diag(log_softmax_rows(logits))), -1.0f);
    tc::Tensor goal_to_lang = tc::scale(mean_all(take_diag(log_softmax_rows(transpose(logits)))), -1.0f);
    return add(lang_to_goal, goal_to_lang);
}

double in_batch_top1(const tc::Tensor& z_lang, const tc::Tensor& z_goal) {
    const int k = z_lang.dim(0), d = z_lang.dim(1);
    int hits = 0;
    for (int i = 0; i < k; ++i) {
        double best = -2.0;
        int arg = -1;
        for (int j = 0; j < k; ++j) {
            double s = 0;
            for (int c = 0; c < d; ++c) s += static_cast<double>(z_lang.at(i, c)) * z_goal.at(j, c);
            if (s > best) {
                best = s;
                arg = j;
            }
        }
        if (arg == i) ++hits;
    }
    return static_cast<double>(hits) / k;
}

SceneGroupedBatcher::SceneGroupedBatcher(size_t dataset_size, int batch_size, Rng rng)
    : n_(dataset_size), half_(batch_size / 2), rng_(rng) {
    if (batch_size < 2 || batch_size % 2 != 0)
        throw std::invalid_argument("align: batch size must be even and >= 2, got " + std::to_string(batch_size));
    if (n_ < static_cast<size_t>(batch_size))
        throw std::invalid_argument("align: dataset of " + std::to_string(n_) + " is smaller than batch " +
                                    std::to_string(batch_size));
}

std::vector<uint32_t> SceneGroupedBatcher::next() {
    std::vector<uint32_t> batch;
    batch.reserve(static_cast<size_t>(2 * half_));
    for (int i = 0; i < half_; ++i) {
        if (perm_pos_ >= perm_.size()) {
            perm_ = rng_.permutation(static_cast<uint32_t>(n_));
            perm_pos_ = 0;
        }
        batch.push_back(perm_[perm_pos_++]);
    }
    for (int i = 0; i < half_; ++i) {
        batch.push_back(static_cast<uint32_t>(seq_pos_));
        seq_pos_ = (seq_pos_ + 1) % n_;
    }
    return batch;
}

AlignOutcome train_align(const data::Dataset& d_a, const Config& cfg, uint64_t seed, enc::TaskEncoders init) {
    const int batch = static_cast<int>(cfg.get_int("align.batch"));
    const int64_t steps = cfg.get_int("align.steps");
    const double tau = cfg.get_real("align.tau");
    const int n_paraphrases = static_cast<int>(cfg.get_int("data.n_paraphrases"));
    const double text_peak = cfg.get_real("optim.peak_lr");
    const double visual_peak = cfg.get_real("optim.encoder_peak_lr");
    const int64_t warmup = cfg.get_int("optim.warmup_steps");
    const int64_t decay = cfg.get_int("optim.decay_steps");

    for (const auto& traj : d_a.trajectories)
        if (traj.instruction.empty()) throw std::invalid_argument("align: dataset contains unlabeled trajectories");

    AlignOutcome out;
    out.encoders = std::move(init);

    Rng root(seed);
    SceneGroupedBatcher batcher(d_a.size(), batch, root.child(0));
    Rng sample_rng = root.child(1);

    auto text_params = out.encoders.text.trainable();
    auto visual_params = out.encoders.visual_trainable();
    tc::AdamState text_adam, visual_adam;
    text_adam.beta1 = visual_adam.beta1 = cfg.get_real("optim.beta1");
    text_adam.beta2 = visual_adam.beta2 = cfg.get_real("optim.beta2");
    text_adam.epsilon = visual_adam.epsilon = cfg.get_real("optim.epsilon");

    // Rendered endpoint images are pure data; cache them per trajectory.
    std::vector<tc::Tensor> s0_img(d_a.size()), goal_img(d_a.size());

    out.log.reserve(static_cast<size_t>(steps));
    for (int64_t step = 0; step < steps; ++step) {
        const auto indices = batcher.next();
        std::vector<std::vector<int>> token_batch;
        std::vector<std::pair<const tc::Tensor*, const tc::Tensor*>> pair_batch;
        token_batch.reserve(indices.size());
        pair_batch.reserve(indices.size());
        for (uint32_t idx : indices) {
            const auto& traj = d_a.trajectories[idx];
            if (!s0_img[idx].defined()) {
                s0_img[idx] = sim::render(traj.states.front());
                goal_img[idx] = sim::render(traj.states.back());
            }
            token_batch.push_back(lang::tokenize(lang::sample_instruction(traj.instruction, sample_rng, n_paraphrases)));
            pair_batch.emplace_back(&s0_img[idx], &goal_img[idx]);
        }

        tc::Tensor z_lang = enc::encode_text_batch(out.encoders.text, token_batch);
        tc::Tensor z_goal = out.encoders.encode_visual_batch(pair_batch);
        tc::Tensor loss = infonce_task_loss(z_lang, z_goal, tau);

        const double loss_value = loss.item();
        if (!std::isfinite(loss_value))
            throw std::runtime_error("align: training diverged (non-finite loss) at step " + std::to_string(step));

        tc::backward(loss);
        const double lr_t = tc::lr_at(step, text_peak, warmup, decay);
        const double lr_v = tc::lr_at(step, visual_peak, warmup, decay);
        tc::adam_step(text_params, text_adam, lr_t);
        tc::adam_step(visual_params, visual_adam, lr_v);

        MetricRow row;
        row.step = step;
        row.loss = loss_value;
        row.lr = lr_t;
        row.top1 = in_batch_top1(z_lang, z_goal);
        row.has_top1 = true;
        out.log.push_back(row);
    }
    return out;
}

}  // namespace grif::align
