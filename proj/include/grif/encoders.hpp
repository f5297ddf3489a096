#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "grif/checkpoint.hpp"
#include "grif/config.hpp"
#include "grif/dataset.hpp"
#include "grif/metrics.hpp"
#include "grif/rng.hpp"
#include "grif/tensor.hpp"

namespace grif::enc {

inline constexpr int kTokenDim = 32;   // token embedding width
inline constexpr int kModelDim = 64;   // trunk width
inline constexpr int kEmbedDim = 32;   // shared task-embedding width d_z
inline constexpr int kPatch = 3;       // patch side; divides the grid dims
inline constexpr int kPatchDim = kPatch * kPatch * 10;  // 90 per single image

// ---------------------------------------------------------------------------
// parameter collections
// ---------------------------------------------------------------------------

struct TextEncoderParams {
    tc::Tensor token_embed;  // (vocab, 32)
    tc::Tensor fc1_w, fc1_b;  // 32 -> 64
    tc::Tensor fc2_w, fc2_b;  // 64 -> 32

    static TextEncoderParams init(Rng& rng);
    std::vector<tc::Tensor> trainable();
    TextEncoderParams detached() const;
    TextEncoderParams clone() const;
    NamedTensors named(const std::string& prefix = "text") const;
    static TextEncoderParams from_named(const NamedTensors& params, const std::string& prefix = "text");
};

struct ImageEncoderParams {
    tc::Tensor patch_embed;  // (90, 64)
    tc::Tensor patch_bias;   // (64)
    tc::Tensor trunk1_w, trunk1_b;  // 64 -> 64
    tc::Tensor trunk2_w, trunk2_b;  // 64 -> 64
    tc::Tensor proj_w, proj_b;      // 64 -> 32

    static ImageEncoderParams init(Rng& rng);
    std::vector<tc::Tensor> trainable();
    ImageEncoderParams detached() const;
    ImageEncoderParams clone() const;
    NamedTensors named(const std::string& prefix = "image") const;
    static ImageEncoderParams from_named(const NamedTensors& params, const std::string& prefix = "image");
};

struct TransitionEncoderParams {
    tc::Tensor patch_embed;  // (180, 64): input channels doubled
    tc::Tensor patch_bias;   // (64)
    tc::Tensor trunk1_w, trunk1_b;
    tc::Tensor trunk2_w, trunk2_b;
    tc::Tensor proj_w, proj_b;

    static TransitionEncoderParams init(Rng& rng);
    std::vector<tc::Tensor> trainable();
    TransitionEncoderParams detached() const;
    TransitionEncoderParams clone() const;
    NamedTensors named(const std::string& prefix = "transition") const;
    static TransitionEncoderParams from_named(const NamedTensors& params, const std::string& prefix = "transition");
};

// Duplicate-and-halve weight surgery: the first-layer weight matrix is
// stacked as [W/2 ; W/2] along the input-channel dimension so the encoder
// accepts (s_0, g) pairs while encode_transition(surgery(E), x, x) equals
// encode_image(E, x). Bias, trunk, and projection are copied verbatim; the
// input encoder is left untouched.
TransitionEncoderParams surgery(const ImageEncoderParams& image);

// ---------------------------------------------------------------------------
// encoding (graph-building; batched forms return one unit-norm row per item)
// ---------------------------------------------------------------------------

tc::Tensor encode_text_batch(TextEncoderParams& p, const std::vector<std::vector<int>>& token_ids);
tc::Tensor encode_image_batch(ImageEncoderParams& p, const std::vector<const tc::Tensor*>& images);
tc::Tensor encode_transition_batch(TransitionEncoderParams& p,
                                   const std::vector<std::pair<const tc::Tensor*, const tc::Tensor*>>& pairs);

tc::Tensor encode_text(TextEncoderParams& p, const std::vector<int>& token_ids);        // (1,32)
tc::Tensor encode_image(ImageEncoderParams& p, const tc::Tensor& image);                // (1,32)
tc::Tensor encode_transition(TransitionEncoderParams& p, const tc::Tensor& s0, const tc::Tensor& goal);

// Patch extraction (pure data, no gradients). Rows are patches in row-major
// patch order; pair rows are [s0 patch ; goal patch].
tc::Tensor patchify_batch(const std::vector<const tc::Tensor*>& images);
tc::Tensor patchify_pair_batch(const std::vector<std::pair<const tc::Tensor*, const tc::Tensor*>>& pairs);

// ---------------------------------------------------------------------------
// task-encoder bundle
// ---------------------------------------------------------------------------

// How the visual task representation consumes states. `transition` stacks
// (s_0, g); `goal_duplicate` feeds (g, g) through the transition encoder;
// `goal_single` uses the single-image encoder on g alone.
enum class GoalMode { transition = 0, goal_duplicate = 1, goal_single = 2 };
GoalMode goal_mode_from_str(const std::string& s);

struct TaskEncoders {
    TextEncoderParams text;
    TransitionEncoderParams transition;
    std::optional<ImageEncoderParams> image;  // goal_single only
    GoalMode goal_mode = GoalMode::transition;

    // Visual-side trainable parameters per the active goal mode.
    std::vector<tc::Tensor> visual_trainable();
    TaskEncoders detached() const;
    TaskEncoders clone() const;

    // (B,32) embeddings of (s0, goal) image pairs per goal mode.
    tc::Tensor encode_visual_batch(const std::vector<std::pair<const tc::Tensor*, const tc::Tensor*>>& pairs);

    NamedTensors named() const;  // includes a meta.goal_mode entry
    static TaskEncoders from_named(const NamedTensors& params);
};

// ---------------------------------------------------------------------------
// pseudo-pretraining (stands in for the pre-trained VLM)
// ---------------------------------------------------------------------------

struct PretrainResult {
    TextEncoderParams text;
    ImageEncoderParams image;
    std::vector<MetricRow> log;
};

// Symmetric InfoNCE between rendered static scenes and synthetic captions.
// Errors if the caption set has fewer than 2 scenes (no negatives).
PretrainResult pretrain_clip_style(const data::Dataset& captions, const Config& cfg, uint64_t seed);

}  // namespace grif::enc
