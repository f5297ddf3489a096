#include "grif/encoders.hpp"

#include <cmath>
#include <stdexcept>

#include "grif/instructions.hpp"

namespace grif::enc {

namespace {

void expect_shape(const tc::Tensor& t, std::vector<int> shape, const std::string& name) {
    if (t.shape() != shape)
        throw std::runtime_error("encoder: tensor '" + name + "' has shape " + tc::Tensor::shape_str(t.shape()) +
                                 ", expected " + tc::Tensor::shape_str(shape));
}

tc::Tensor trainable_copy(const tc::Tensor& t) { return tc::Tensor(t.shape(), t.data(), true); }

// Shared patch-trunk forward: linear patch embedding, two relu blocks,
// mean-pool over each image's patches, projection, unit normalization.
template <typename Params>
tc::Tensor trunk_encode(Params& p, const tc::Tensor& patches, int patches_per_image) {
    tc::Tensor h = add_bias(matmul(patches, p.patch_embed), p.patch_bias);
    h = relu(add_bias(matmul(h, p.trunk1_w), p.trunk1_b));
    h = relu(add_bias(matmul(h, p.trunk2_w), p.trunk2_b));
    tc::Tensor pooled = mean_rows_grouped(h, patches_per_image);
    tc::Tensor z = add_bias(matmul(pooled, p.proj_w), p.proj_b);
    return l2_normalize_rows(z);
}

void check_image(const tc::Tensor& img) {
    if (img.rank() != 3 || img.dim(2) != 10 || img.dim(0) % kPatch != 0 || img.dim(1) % kPatch != 0)
        throw std::invalid_argument("encoder: image shape " + tc::Tensor::shape_str(img.shape()) +
                                    " is not (h,w,10) with h,w divisible by " + std::to_string(kPatch));
}

void copy_patch(const tc::Tensor& img, int py, int px, float* dst) {
    const int w = img.dim(1);
    const int c = img.dim(2);
    int k = 0;
    for (int dy = 0; dy < kPatch; ++dy)
        for (int dx = 0; dx < kPatch; ++dx)
            for (int ch = 0; ch < c; ++ch)
                dst[k++] = img.data()[((static_cast<size_t>(py * kPatch + dy) * w) + (px * kPatch + dx)) * c + ch];
}

}  // namespace

// ---------------------------------------------------------------------------
// parameter collections
// ---------------------------------------------------------------------------

TextEncoderParams TextEncoderParams::init(Rng& rng) {
    TextEncoderParams p;
    const int vocab = lang::vocab_size();
    p.token_embed = tc::Tensor::he_uniform({vocab, kTokenDim}, kTokenDim, rng);
    p.fc1_w = tc::Tensor::he_uniform({kTokenDim, kModelDim}, kTokenDim, rng);
    p.fc1_b = tc::Tensor::zeros({kModelDim}, true);
    p.fc2_w = tc::Tensor::he_uniform({kModelDim, kEmbedDim}, kModelDim, rng);
    p.fc2_b = tc::Tensor::zeros({kEmbedDim}, true);
    return p;
}

std::vector<tc::Tensor> TextEncoderParams::trainable() {
    return {token_embed, fc1_w, fc1_b, fc2_w, fc2_b};
}

TextEncoderParams TextEncoderParams::detached() const {
    return {token_embed.detach(), fc1_w.detach(), fc1_b.detach(), fc2_w.detach(), fc2_b.detach()};
}

TextEncoderParams TextEncoderParams::clone() const {
    return {token_embed.clone(), fc1_w.clone(), fc1_b.clone(), fc2_w.clone(), fc2_b.clone()};
}

NamedTensors TextEncoderParams::named(const std::string& prefix) const {
    return {{prefix + ".token_embed", token_embed},
            {prefix + ".fc1_w", fc1_w},
            {prefix + ".fc1_b", fc1_b},
            {prefix + ".fc2_w", fc2_w},
            {prefix + ".fc2_b", fc2_b}};
}

TextEncoderParams TextEncoderParams::from_named(const NamedTensors& params, const std::string& prefix) {
    TextEncoderParams p;
    p.token_embed = trainable_copy(find_tensor(params, prefix + ".token_embed"));
    p.fc1_w = trainable_copy(find_tensor(params, prefix + ".fc1_w"));
    p.fc1_b = trainable_copy(find_tensor(params, prefix + ".fc1_b"));
    p.fc2_w = trainable_copy(find_tensor(params, prefix + ".fc2_w"));
    p.fc2_b = trainable_copy(find_tensor(params, prefix + ".fc2_b"));
    expect_shape(p.token_embed, {lang::vocab_size(), kTokenDim}, prefix + ".token_embed");
    expect_shape(p.fc1_w, {kTokenDim, kModelDim}, prefix + ".fc1_w");
    expect_shape(p.fc2_w, {kModelDim, kEmbedDim}, prefix + ".fc2_w");
    return p;
}

namespace {

template <typename Params>
Params init_patch_params(Rng& rng, int in_dim) {
    Params p;
    p.patch_embed = tc::Tensor::he_uniform({in_dim, kModelDim}, in_dim, rng);
    p.patch_bias = tc::Tensor::zeros({kModelDim}, true);
    p.trunk1_w = tc::Tensor::he_uniform({kModelDim, kModelDim}, kModelDim, rng);
    p.trunk1_b = tc::Tensor::zeros({kModelDim}, true);
    p.trunk2_w = tc::Tensor::he_uniform({kModelDim, kModelDim}, kModelDim, rng);
    p.trunk2_b = tc::Tensor::zeros({kModelDim}, true);
    p.proj_w = tc::Tensor::he_uniform({kModelDim, kEmbedDim}, kModelDim, rng);
    p.proj_b = tc::Tensor::zeros({kEmbedDim}, true);
    return p;
}

template <typename Params>
std::vector<tc::Tensor> patch_trainable(Params& p) {
    return {p.patch_embed, p.patch_bias, p.trunk1_w, p.trunk1_b, p.trunk2_w, p.trunk2_b, p.proj_w, p.proj_b};
}

template <typename Params>
Params patch_detached(const Params& p) {
    return {p.patch_embed.detach(), p.patch_bias.detach(), p.trunk1_w.detach(), p.trunk1_b.detach(),
            p.trunk2_w.detach(), p.trunk2_b.detach(), p.proj_w.detach(), p.proj_b.detach()};
}

template <typename Params>
Params patch_clone(const Params& p) {
    return {p.patch_embed.clone(), p.patch_bias.clone(), p.trunk1_w.clone(), p.trunk1_b.clone(),
            p.trunk2_w.clone(), p.trunk2_b.clone(), p.proj_w.clone(), p.proj_b.clone()};
}

template <typename Params>
NamedTensors patch_named(const Params& p, const std::string& prefix) {
    return {{prefix + ".patch_embed", p.patch_embed}, {prefix + ".patch_bias", p.patch_bias},
            {prefix + ".trunk1_w", p.trunk1_w},       {prefix + ".trunk1_b", p.trunk1_b},
            {prefix + ".trunk2_w", p.trunk2_w},       {prefix + ".trunk2_b", p.trunk2_b},
            {prefix + ".proj_w", p.proj_w},           {prefix + ".proj_b", p.proj_b}};
}

template <typename Params>
Params patch_from_named(const NamedTensors& params, const std::string& prefix, int in_dim) {
    Params p;
    p.patch_embed = trainable_copy(find_tensor(params, prefix + ".patch_embed"));
    p.patch_bias = trainable_copy(find_tensor(params, prefix + ".patch_bias"));
    p.trunk1_w = trainable_copy(find_tensor(params, prefix + ".trunk1_w"));
    p.trunk1_b = trainable_copy(find_tensor(params, prefix + ".trunk1_b"));
    p.trunk2_w = trainable_copy(find_tensor(params, prefix + ".trunk2_w"));
    p.trunk2_b = trainable_copy(find_tensor(params, prefix + ".trunk2_b"));
    p.proj_w = trainable_copy(find_tensor(params, prefix + ".proj_w"));
    p.proj_b = trainable_copy(find_tensor(params, prefix + ".proj_b"));
    expect_shape(p.patch_embed, {in_dim, kModelDim}, prefix + ".patch_embed");
    expect_shape(p.proj_w, {kModelDim, kEmbedDim}, prefix + ".proj_w");
    return p;
}

}  // namespace

ImageEncoderParams ImageEncoderParams::init(Rng& rng) { return init_patch_params<ImageEncoderParams>(rng, kPatchDim); }
std::vector<tc::Tensor> ImageEncoderParams::trainable() { return patch_trainable(*this); }
ImageEncoderParams ImageEncoderParams::detached() const { return patch_detached(*this); }
ImageEncoderParams ImageEncoderParams::clone() const { return patch_clone(*this); }
NamedTensors ImageEncoderParams::named(const std::string& prefix) const { return patch_named(*this, prefix); }
ImageEncoderParams ImageEncoderParams::from_named(const NamedTensors& params, const std::string& prefix) {
    return patch_from_named<ImageEncoderParams>(params, prefix, kPatchDim);
}

TransitionEncoderParams TransitionEncoderParams::init(Rng& rng) {
    return init_patch_params<TransitionEncoderParams>(rng, 2 * kPatchDim);
}
std::vector<tc::Tensor> TransitionEncoderParams::trainable() { return patch_trainable(*this); }
TransitionEncoderParams TransitionEncoderParams::detached() const { return patch_detached(*this); }
TransitionEncoderParams TransitionEncoderParams::clone() const { return patch_clone(*this); }
NamedTensors TransitionEncoderParams::named(const std::string& prefix) const { return patch_named(*this, prefix); }
TransitionEncoderParams TransitionEncoderParams::from_named(const NamedTensors& params, const std::string& prefix) {
    return patch_from_named<TransitionEncoderParams>(params, prefix, 2 * kPatchDim);
}

TransitionEncoderParams surgery(const ImageEncoderParams& image) {
    TransitionEncoderParams out;
    const int rows = image.patch_embed.dim(0), cols = image.patch_embed.dim(1);
    std::vector<float> w(static_cast<size_t>(2 * rows) * cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            const float half = image.patch_embed.data()[static_cast<size_t>(i) * cols + j] * 0.5f;
            w[static_cast<size_t>(i) * cols + j] = half;
            w[static_cast<size_t>(i + rows) * cols + j] = half;
        }
    out.patch_embed = tc::Tensor({2 * rows, cols}, std::move(w), true);
    out.patch_bias = image.patch_bias.clone();
    out.trunk1_w = image.trunk1_w.clone();
    out.trunk1_b = image.trunk1_b.clone();
    out.trunk2_w = image.trunk2_w.clone();
    out.trunk2_b = image.trunk2_b.clone();
    out.proj_w = image.proj_w.clone();
    out.proj_b = image.proj_b.clone();
    return out;
}

// ---------------------------------------------------------------------------
// patch extraction and encoding
// ---------------------------------------------------------------------------

tc::Tensor patchify_batch(const std::vector<const tc::Tensor*>& images) {
    if (images.empty()) throw std::invalid_argument("patchify: empty batch");
    check_image(*images[0]);
    const int ph = images[0]->dim(0) / kPatch, pw = images[0]->dim(1) / kPatch;
    const int per_image = ph * pw;
    std::vector<float> rows(static_cast<size_t>(images.size()) * per_image * kPatchDim);
    size_t r = 0;
    for (const auto* img : images) {
        check_image(*img);
        if (img->shape() != images[0]->shape())
            throw std::invalid_argument("patchify: mixed image shapes in batch");
        for (int py = 0; py < ph; ++py)
            for (int px = 0; px < pw; ++px) copy_patch(*img, py, px, rows.data() + (r++) * kPatchDim);
    }
    return tc::Tensor({static_cast<int>(images.size()) * per_image, kPatchDim}, std::move(rows));
}

tc::Tensor patchify_pair_batch(const std::vector<std::pair<const tc::Tensor*, const tc::Tensor*>>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("patchify: empty batch");
    check_image(*pairs[0].first);
    const int ph = pairs[0].first->dim(0) / kPatch, pw = pairs[0].first->dim(1) / kPatch;
    const int per_image = ph * pw;
    std::vector<float> rows(static_cast<size_t>(pairs.size()) * per_image * 2 * kPatchDim);
    size_t r = 0;
    for (const auto& [s0, g] : pairs) {
        check_image(*s0);
        check_image(*g);
        if (s0->shape() != g->shape() || s0->shape() != pairs[0].first->shape())
            throw std::invalid_argument("patchify: state/goal image shapes differ");
        for (int py = 0; py < ph; ++py)
            for (int px = 0; px < pw; ++px) {
                float* dst = rows.data() + (r++) * (2 * kPatchDim);
                copy_patch(*s0, py, px, dst);
                copy_patch(*g, py, px, dst + kPatchDim);
            }
    }
    return tc::Tensor({static_cast<int>(pairs.size()) * per_image, 2 * kPatchDim}, std::move(rows));
}

tc::Tensor encode_text_batch(TextEncoderParams& p, const std::vector<std::vector<int>>& token_ids) {
    if (token_ids.empty()) throw std::invalid_argument("encode_text: empty batch");
    std::vector<tc::Tensor> pooled;
    pooled.reserve(token_ids.size());
    for (const auto& ids : token_ids) {
        if (ids.empty()) throw std::invalid_argument("encode_text: empty token list");
        pooled.push_back(mean_rows(gather_rows(p.token_embed, ids)));
    }
    tc::Tensor h = concat_rows(pooled);
    h = relu(add_bias(matmul(h, p.fc1_w), p.fc1_b));
    tc::Tensor z = add_bias(matmul(h, p.fc2_w), p.fc2_b);
    return l2_normalize_rows(z);
}

tc::Tensor encode_image_batch(ImageEncoderParams& p, const std::vector<const tc::Tensor*>& images) {
    const tc::Tensor patches = patchify_batch(images);
    return trunk_encode(p, patches, patches.dim(0) / static_cast<int>(images.size()));
}

tc::Tensor encode_transition_batch(TransitionEncoderParams& p,
                                   const std::vector<std::pair<const tc::Tensor*, const tc::Tensor*>>& pairs) {
    const tc::Tensor patches = patchify_pair_batch(pairs);
    return trunk_encode(p, patches, patches.dim(0) / static_cast<int>(pairs.size()));
}

tc::Tensor encode_text(TextEncoderParams& p, const std::vector<int>& token_ids) {
    return encode_text_batch(p, {token_ids});
}

tc::Tensor encode_image(ImageEncoderParams& p, const tc::Tensor& image) {
    return encode_image_batch(p, {&image});
}

tc::Tensor encode_transition(TransitionEncoderParams& p, const tc::Tensor& s0, const tc::Tensor& goal) {
    return encode_transition_batch(p, {{&s0, &goal}});
}

// ---------------------------------------------------------------------------
// TaskEncoders
// ---------------------------------------------------------------------------

GoalMode goal_mode_from_str(const std::string& s) {
    if (s == "transition") return GoalMode::transition;
    if (s == "goal_duplicate" || s == "duplicate") return GoalMode::goal_duplicate;
    if (s == "goal_single" || s == "single") return GoalMode::goal_single;
    throw std::invalid_argument("unknown goal mode '" + s + "'");
}

std::vector<tc::Tensor> TaskEncoders::visual_trainable() {
    if (goal_mode == GoalMode::goal_single) {
        if (!image) throw std::runtime_error("TaskEncoders: goal_single without image encoder");
        return image->trainable();
    }
    return transition.trainable();
}

TaskEncoders TaskEncoders::detached() const {
    TaskEncoders out;
    out.text = text.detached();
    out.transition = transition.detached();
    if (image) out.image = image->detached();
    out.goal_mode = goal_mode;
    return out;
}

TaskEncoders TaskEncoders::clone() const {
    TaskEncoders out;
    out.text = text.clone();
    out.transition = transition.clone();
    if (image) out.image = image->clone();
    out.goal_mode = goal_mode;
    return out;
}

tc::Tensor TaskEncoders::encode_visual_batch(
    const std::vector<std::pair<const tc::Tensor*, const tc::Tensor*>>& pairs) {
    switch (goal_mode) {
        case GoalMode::transition:
            return encode_transition_batch(transition, pairs);
        case GoalMode::goal_duplicate: {
            std::vector<std::pair<const tc::Tensor*, const tc::Tensor*>> dup;
            dup.reserve(pairs.size());
            for (const auto& [s0, g] : pairs) dup.emplace_back(g, g);
            return encode_transition_batch(transition, dup);
        }
        case GoalMode::goal_single: {
            if (!image) throw std::runtime_error("TaskEncoders: goal_single without image encoder");
            std::vector<const tc::Tensor*> goals;
            goals.reserve(pairs.size());
            for (const auto& [s0, g] : pairs) goals.push_back(g);
            return encode_image_batch(*image, goals);
        }
    }
    throw std::logic_error("TaskEncoders: bad goal mode");
}

NamedTensors TaskEncoders::named() const {
    NamedTensors out;
    out.emplace_back("meta.goal_mode", tc::Tensor::scalar(static_cast<float>(goal_mode)));
    for (auto& e : text.named()) out.push_back(std::move(e));
    if (goal_mode == GoalMode::goal_single) {
        for (auto& e : image->named()) out.push_back(std::move(e));
    } else {
        for (auto& e : transition.named()) out.push_back(std::move(e));
        if (image)
            for (auto& e : image->named()) out.push_back(std::move(e));
    }
    return out;
}

TaskEncoders TaskEncoders::from_named(const NamedTensors& params) {
    TaskEncoders out;
    const int mode = has_tensor(params, "meta.goal_mode")
                         ? static_cast<int>(find_tensor(params, "meta.goal_mode").item())
                         : 0;
    out.goal_mode = static_cast<GoalMode>(mode);
    out.text = TextEncoderParams::from_named(params);
    if (out.goal_mode == GoalMode::goal_single) {
        out.image = ImageEncoderParams::from_named(params);
        Rng rng(0);
        out.transition = TransitionEncoderParams::init(rng);  // placeholder, unused in this mode
    } else {
        out.transition = TransitionEncoderParams::from_named(params);
        if (has_tensor(params, "image.patch_embed")) out.image = ImageEncoderParams::from_named(params);
    }
    return out;
}

}  // namespace grif::enc
