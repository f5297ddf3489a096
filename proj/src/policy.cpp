#include "grif/policy.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

#include "grif/align.hpp"
#include "grif/instructions.hpp"
#include "grif/optim.hpp"

namespace grif::policy {

namespace {

tc::Tensor trainable_copy(const tc::Tensor& t) { return tc::Tensor(t.shape(), t.data(), true); }

void expect_shape(const tc::Tensor& t, std::vector<int> shape, const std::string& name) {
    if (t.shape() != shape)
        throw std::runtime_error("policy: tensor '" + name + "' has shape " + tc::Tensor::shape_str(t.shape()) +
                                 ", expected " + tc::Tensor::shape_str(shape));
}

}  // namespace

PolicyParams PolicyParams::init(Rng& rng) {
    PolicyParams p;
    p.fc1_w = tc::Tensor::he_uniform({kStateDim, kHidden}, kStateDim, rng);
    p.fc1_b = tc::Tensor::zeros({kHidden}, true);
    p.fc2_w = tc::Tensor::he_uniform({kHidden, kHidden}, kHidden, rng);
    p.fc2_b = tc::Tensor::zeros({kHidden}, true);
    p.head_w = tc::Tensor::he_uniform({kHidden, kActionDim}, kHidden, rng);
    p.head_b = tc::Tensor::zeros({kActionDim}, true);
    p.film1_w = tc::Tensor::he_uniform({enc::kEmbedDim, kFilmHidden}, enc::kEmbedDim, rng);
    p.film1_b = tc::Tensor::zeros({kFilmHidden}, true);
    // Zero-initialized generator output: FiLM starts as the identity.
    p.film2_w = tc::Tensor::zeros({kFilmHidden, 4 * kHidden}, true);
    p.film2_b = tc::Tensor::zeros({4 * kHidden}, true);
    return p;
}

std::vector<tc::Tensor> PolicyParams::trainable() {
    return {fc1_w, fc1_b, fc2_w, fc2_b, head_w, head_b, film1_w, film1_b, film2_w, film2_b};
}

PolicyParams PolicyParams::detached() const {
    return {fc1_w.detach(), fc1_b.detach(), fc2_w.detach(), fc2_b.detach(), head_w.detach(),
            head_b.detach(), film1_w.detach(), film1_b.detach(), film2_w.detach(), film2_b.detach()};
}

PolicyParams PolicyParams::clone() const {
    return {fc1_w.clone(), fc1_b.clone(), fc2_w.clone(), fc2_b.clone(), head_w.clone(),
            head_b.clone(), film1_w.clone(), film1_b.clone(), film2_w.clone(), film2_b.clone()};
}

NamedTensors PolicyParams::named(const std::string& prefix) const {
    return {{prefix + ".fc1_w", fc1_w},     {prefix + ".fc1_b", fc1_b},     {prefix + ".fc2_w", fc2_w},
            {prefix + ".fc2_b", fc2_b},     {prefix + ".head_w", head_w},   {prefix + ".head_b", head_b},
            {prefix + ".film1_w", film1_w}, {prefix + ".film1_b", film1_b}, {prefix + ".film2_w", film2_w},
            {prefix + ".film2_b", film2_b}};
}

PolicyParams PolicyParams::from_named(const NamedTensors& params, const std::string& prefix) {
    PolicyParams p;
    p.fc1_w = trainable_copy(find_tensor(params, prefix + ".fc1_w"));
    p.fc1_b = trainable_copy(find_tensor(params, prefix + ".fc1_b"));
    p.fc2_w = trainable_copy(find_tensor(params, prefix + ".fc2_w"));
    p.fc2_b = trainable_copy(find_tensor(params, prefix + ".fc2_b"));
    p.head_w = trainable_copy(find_tensor(params, prefix + ".head_w"));
    p.head_b = trainable_copy(find_tensor(params, prefix + ".head_b"));
    p.film1_w = trainable_copy(find_tensor(params, prefix + ".film1_w"));
    p.film1_b = trainable_copy(find_tensor(params, prefix + ".film1_b"));
    p.film2_w = trainable_copy(find_tensor(params, prefix + ".film2_w"));
    p.film2_b = trainable_copy(find_tensor(params, prefix + ".film2_b"));
    expect_shape(p.fc1_w, {kStateDim, kHidden}, prefix + ".fc1_w");
    expect_shape(p.film2_w, {kFilmHidden, 4 * kHidden}, prefix + ".film2_w");
    return p;
}

tc::Tensor trunk_with_film(PolicyParams& p, const tc::Tensor& s_flat, const tc::Tensor& scale1,
                           const tc::Tensor& shift1, const tc::Tensor& scale2, const tc::Tensor& shift2) {
    tc::Tensor h = relu(add_bias(matmul(s_flat, p.fc1_w), p.fc1_b));
    h = tc::scale_shift(h, scale1, shift1);
    h = relu(add_bias(matmul(h, p.fc2_w), p.fc2_b));
    h = tc::scale_shift(h, scale2, shift2);
    return add_bias(matmul(h, p.head_w), p.head_b);
}

tc::Tensor policy_forward_batch(PolicyParams& p, const tc::Tensor& s_flat, const tc::Tensor& z) {
    if (s_flat.rank() != 2 || s_flat.dim(1) != kStateDim)
        throw std::invalid_argument("policy: state batch shape " + tc::Tensor::shape_str(s_flat.shape()) +
                                    ", expected (B," + std::to_string(kStateDim) + ")");
    if (z.rank() != 2 || z.dim(1) != enc::kEmbedDim || z.dim(0) != s_flat.dim(0))
        throw std::invalid_argument("policy: embedding batch shape " + tc::Tensor::shape_str(z.shape()) +
                                    " does not match states " + tc::Tensor::shape_str(s_flat.shape()));
    tc::Tensor g = relu(add_bias(matmul(z, p.film1_w), p.film1_b));
    g = add_bias(matmul(g, p.film2_w), p.film2_b);
    tc::Tensor scale1 = add_const(slice_cols(g, 0, kHidden), 1.0f);
    tc::Tensor shift1 = slice_cols(g, kHidden, 2 * kHidden);
    tc::Tensor scale2 = add_const(slice_cols(g, 2 * kHidden, 3 * kHidden), 1.0f);
    tc::Tensor shift2 = slice_cols(g, 3 * kHidden, 4 * kHidden);
    return trunk_with_film(p, s_flat, scale1, shift1, scale2, shift2);
}

tc::Tensor flatten_state(const tc::Tensor& image) {
    if (image.numel() != kStateDim)
        throw std::invalid_argument("policy: state image has " + std::to_string(image.numel()) + " values, expected " +
                                    std::to_string(kStateDim));
    return tc::Tensor({1, kStateDim}, image.data());
}

sim::Action policy_act(PolicyParams& p, const sim::SimState& state, const tc::Tensor& z_row) {
    const tc::Tensor mu = policy_forward_batch(p, flatten_state(sim::render(state)), z_row);
    sim::Action a;
    a.dx = std::min(1.0f, std::max(-1.0f, mu.at(0, 0)));
    a.dy = std::min(1.0f, std::max(-1.0f, mu.at(0, 1)));
    a.grip = std::min(1.0f, std::max(-1.0f, mu.at(0, 2)));
    return a;
}

namespace {

tc::Tensor nll_core(const tc::Tensor& mu, const tc::Tensor& actions, double sigma) {
    if (sigma <= 0) throw std::invalid_argument("gaussian_nll: sigma must be positive");
    if (mu.shape() != actions.shape())
        throw std::invalid_argument("gaussian_nll: shape mismatch " + tc::Tensor::shape_str(mu.shape()) + " vs " +
                                    tc::Tensor::shape_str(actions.shape()));
    tc::Tensor diff = sub(mu, actions);
    tc::Tensor sq = sum_cols(mul(diff, diff));
    const double dims = mu.dim(1);
    const float log_norm = static_cast<float>(dims * std::log(sigma * std::sqrt(2.0 * std::numbers::pi)));
    return add_const(tc::scale(sq, static_cast<float>(1.0 / (2.0 * sigma * sigma))), log_norm);
}

}  // namespace

tc::Tensor gaussian_nll_rows(const tc::Tensor& mu, const tc::Tensor& actions, double sigma) {
    return nll_core(mu, actions, sigma);
}

tc::Tensor gaussian_nll(const tc::Tensor& mu, const tc::Tensor& action, double sigma) {
    if (mu.rank() != 1 || action.rank() != 1)
        throw std::invalid_argument("gaussian_nll: expected action vectors");
    const int d = mu.dim(0);
    return mean_all(nll_core(mu.reshape({1, d}), action.reshape({1, d}), sigma));
}

GoalChoice sample_goal(const sim::Trajectory& traj, bool from_unlabeled, int t, Rng& rng, double final_prob) {
    const int last = static_cast<int>(traj.states.size()) - 1;
    if (last < 1) throw std::invalid_argument("sample_goal: trajectory needs at least 2 states");
    if (t < 0 || t >= last) throw std::invalid_argument("sample_goal: transition index out of range");
    if (!from_unlabeled) return {last, false};
    if (rng.uniform() < final_prob) return {last, false};
    // Strictly-future intermediate states; degenerate suffixes use the final
    // state but still count as the relabeled branch.
    const int lo = t + 1, hi = last - 1;
    if (lo > hi) return {last, true};
    return {lo + static_cast<int>(rng.below(static_cast<uint64_t>(hi - lo + 1))), true};
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

namespace {

struct BatchItem {
    const sim::Trajectory* traj;
    int t;
    GoalChoice goal;
    bool from_d_a;
};

tc::Tensor states_matrix(const std::vector<const sim::SimState*>& states) {
    std::vector<float> rows(states.size() * static_cast<size_t>(kStateDim));
    for (size_t i = 0; i < states.size(); ++i) {
        const tc::Tensor img = sim::render(*states[i]);
        std::memcpy(rows.data() + i * kStateDim, img.data().data(), sizeof(float) * kStateDim);
    }
    return tc::Tensor({static_cast<int>(states.size()), kStateDim}, std::move(rows));
}

tc::Tensor actions_matrix(const std::vector<BatchItem>& items) {
    std::vector<float> rows(items.size() * static_cast<size_t>(kActionDim));
    for (size_t i = 0; i < items.size(); ++i) {
        const sim::Action& a = items[i].traj->actions[static_cast<size_t>(items[i].t)];
        rows[i * kActionDim + 0] = a.dx;
        rows[i * kActionDim + 1] = a.dy;
        rows[i * kActionDim + 2] = a.grip;
    }
    return tc::Tensor({static_cast<int>(items.size()), kActionDim}, std::move(rows));
}

// Mean of 1 - cos over matched rows; the BC-Z-style positive-only alignment.
tc::Tensor cosine_alignment_loss(const tc::Tensor& z_lang, const tc::Tensor& z_goal) {
    tc::Tensor dots = sum_cols(mul(z_lang, z_goal));
    return add_const(tc::scale(mean_all(dots), -1.0f), 1.0f);
}

}  // namespace

PolicyOutcome train_policy(const data::Dataset& d_a, const data::Dataset& d_b, const enc::TaskEncoders& encoders,
                           const Config& cfg, uint64_t seed) {
    const int batch = static_cast<int>(cfg.get_int("policy.batch"));
    const int64_t steps = cfg.get_int("policy.steps");
    const double sigma = cfg.get_real("policy.sigma");
    const bool joint = cfg.get_str("policy.mode") == "joint";
    const bool explicit_weights = cfg.get_bool("policy.explicit_weights");
    const bool use_unlabeled = cfg.get_bool("policy.use_unlabeled");
    const bool language_only = cfg.get_bool("policy.language_only");
    const std::string align_loss = cfg.get_str("policy.align_loss");
    const double align_weight = cfg.get_real("policy.align_weight");
    const double relabel_final_prob = cfg.get_real("policy.relabel_final_prob");
    const int n_paraphrases = static_cast<int>(cfg.get_int("data.n_paraphrases"));
    const double peak = cfg.get_real("optim.peak_lr");
    const double enc_peak = cfg.get_real("optim.encoder_peak_lr");
    const int64_t warmup = cfg.get_int("optim.warmup_steps");
    const int64_t decay = cfg.get_int("optim.decay_steps");
    const double tau = cfg.get_real("align.tau");

    if (batch < 1) throw std::invalid_argument("policy: batch must be positive");
    if (d_a.empty()) throw std::invalid_argument("policy: labeled dataset is empty");
    const bool pool_b = use_unlabeled && !language_only && !d_b.empty();
    if (use_unlabeled && !language_only && d_b.empty())
        throw std::invalid_argument("policy: unlabeled dataset is empty");
    if (explicit_weights && !pool_b)
        throw std::invalid_argument("policy: explicit_weights needs both datasets");

    PolicyOutcome out;
    Rng root(seed);
    out.policy = PolicyParams::init(root);
    // Frozen mode never touches the encoders; joint mode fine-tunes the
    // visual side while the language encoder stays fixed.
    out.encoders = encoders.clone();
    enc::TaskEncoders frozen_view = out.encoders.detached();
    enc::TaskEncoders& enc_ref = joint ? out.encoders : frozen_view;
    enc::TextEncoderParams text_frozen = out.encoders.text.detached();

    auto policy_params = out.policy.trainable();
    tc::AdamState policy_adam, enc_adam;
    policy_adam.beta1 = enc_adam.beta1 = cfg.get_real("optim.beta1");
    policy_adam.beta2 = enc_adam.beta2 = cfg.get_real("optim.beta2");
    policy_adam.epsilon = enc_adam.epsilon = cfg.get_real("optim.epsilon");
    std::vector<tc::Tensor> enc_params;
    if (joint) enc_params = out.encoders.visual_trainable();

    const size_t n_a = d_a.size();
    const size_t n_b = pool_b ? d_b.size() : 0;
    Rng draw = root.child(1);

    out.log.reserve(static_cast<size_t>(steps));
    for (int64_t step = 0; step < steps; ++step) {
        // Assemble the batch, labeled items first.
        std::vector<BatchItem> items_a, items_b;
        for (int i = 0; i < batch; ++i) {
            size_t idx;
            bool from_a;
            if (explicit_weights) {
                from_a = i < batch / 2;
                idx = from_a ? draw.below(n_a) : n_a + draw.below(n_b);
            } else {
                idx = draw.below(n_a + n_b);
                from_a = idx < n_a;
            }
            const sim::Trajectory* traj =
                from_a ? &d_a.trajectories[idx] : &d_b.trajectories[idx - n_a];
            const int t = static_cast<int>(draw.below(traj->actions.size()));
            const GoalChoice goal = sample_goal(*traj, !from_a, t, draw, relabel_final_prob);
            (from_a ? items_a : items_b).push_back({traj, t, goal, from_a});
        }
        std::vector<BatchItem> items = items_a;
        items.insert(items.end(), items_b.begin(), items_b.end());

        tc::Tensor loss = tc::Tensor::scalar(0.0f);
        tc::Tensor z_lang_a;  // D_A language embeddings, reused by the joint alignment term

        // Language-conditioned term over D_A items.
        if (!items_a.empty()) {
            std::vector<std::vector<int>> token_batch;
            std::vector<const sim::SimState*> states;
            for (const auto& it : items_a) {
                token_batch.push_back(
                    lang::tokenize(lang::sample_instruction(it.traj->instruction, draw, n_paraphrases)));
                states.push_back(&it.traj->states[static_cast<size_t>(it.t)]);
            }
            z_lang_a = enc::encode_text_batch(text_frozen, token_batch);
            const tc::Tensor s_flat = states_matrix(states);
            const tc::Tensor mu = policy_forward_batch(out.policy, s_flat, z_lang_a);
            const tc::Tensor nll = gaussian_nll_rows(mu, actions_matrix(items_a), sigma);
            const float w = explicit_weights
                                ? static_cast<float>(static_cast<double>(n_a) / static_cast<double>(n_a + n_b) /
                                                     items_a.size())
                                : 1.0f / batch;
            loss = add(loss, tc::scale(sum_all(nll), w));
        }

        // Goal-conditioned term: D_A uses the final state, D_B the relabeled goal.
        if (!language_only && !items.empty()) {
            std::vector<std::pair<const tc::Tensor*, const tc::Tensor*>> pairs;
            std::vector<tc::Tensor> imgs;
            std::vector<const sim::SimState*> states;
            imgs.reserve(items.size() * 2);
            for (const auto& it : items) {
                imgs.push_back(sim::render(it.traj->states.front()));
                imgs.push_back(sim::render(it.traj->states[static_cast<size_t>(it.goal.index)]));
                states.push_back(&it.traj->states[static_cast<size_t>(it.t)]);
            }
            for (size_t i = 0; i < items.size(); ++i) pairs.emplace_back(&imgs[2 * i], &imgs[2 * i + 1]);
            tc::Tensor z_goal = enc_ref.encode_visual_batch(pairs);
            const tc::Tensor s_flat = states_matrix(states);
            const tc::Tensor mu = policy_forward_batch(out.policy, s_flat, z_goal);
            const tc::Tensor nll = gaussian_nll_rows(mu, actions_matrix(items), sigma);
            if (explicit_weights) {
                // Split the per-dataset means and weight by dataset share.
                const double wa = static_cast<double>(n_a) / static_cast<double>(n_a + n_b);
                std::vector<float> mask_a(items.size()), mask_b(items.size());
                for (size_t i = 0; i < items.size(); ++i) (items[i].from_d_a ? mask_a : mask_b)[i] = 1.0f;
                const int rows = static_cast<int>(items.size());
                tc::Tensor ma({rows, 1}, std::move(mask_a)), mb({rows, 1}, std::move(mask_b));
                if (!items_a.empty())
                    loss = add(loss, tc::scale(sum_all(mul(nll, ma)),
                                               static_cast<float>(wa / items_a.size())));
                if (!items_b.empty())
                    loss = add(loss, tc::scale(sum_all(mul(nll, mb)),
                                               static_cast<float>((1.0 - wa) / items_b.size())));
            } else {
                loss = add(loss, tc::scale(sum_all(nll), 1.0f / batch));
            }
        }

        // Joint alignment term on the D_A sub-batch, start/final-state pairs.
        if (joint && align_loss != "none" && align_weight != 0.0 && items_a.size() >= 2) {
            std::vector<std::pair<const tc::Tensor*, const tc::Tensor*>> pairs;
            std::vector<tc::Tensor> imgs;
            imgs.reserve(items_a.size() * 2);
            for (const auto& it : items_a) {
                imgs.push_back(sim::render(it.traj->states.front()));
                imgs.push_back(sim::render(it.traj->states.back()));
            }
            for (size_t i = 0; i < items_a.size(); ++i) pairs.emplace_back(&imgs[2 * i], &imgs[2 * i + 1]);
            tc::Tensor z_goal = enc_ref.encode_visual_batch(pairs);
            tc::Tensor align_term = align_loss == "infonce" ? align::infonce_task_loss(z_lang_a, z_goal, tau)
                                                            : cosine_alignment_loss(z_lang_a, z_goal);
            loss = add(loss, tc::scale(align_term, static_cast<float>(align_weight)));
        }

        const double loss_value = loss.item();
        if (!std::isfinite(loss_value))
            throw std::runtime_error("policy: training diverged (non-finite loss) at step " + std::to_string(step));

        tc::backward(loss);
        tc::adam_step(policy_params, policy_adam, tc::lr_at(step, peak, warmup, decay));
        if (joint) tc::adam_step(enc_params, enc_adam, tc::lr_at(step, enc_peak, warmup, decay));

        MetricRow row;
        row.step = step;
        row.loss = loss_value;
        row.lr = tc::lr_at(step, peak, warmup, decay);
        out.log.push_back(row);
    }
    return out;
}

}  // namespace grif::policy
