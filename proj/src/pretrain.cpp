#include <cmath>
#include <stdexcept>

#include "grif/align.hpp"
#include "grif/encoders.hpp"
#include "grif/instructions.hpp"
#include "grif/optim.hpp"

namespace grif::enc {

// Desk-scale stand-in for VLM pre-training: symmetric InfoNCE between
// rendered static scenes and their synthetic captions. Exercises the same
// contrastive machinery the alignment stage uses, on single images.
PretrainResult pretrain_clip_style(const data::Dataset& captions, const Config& cfg, uint64_t seed) {
    if (captions.size() < 2) throw std::invalid_argument("pretrain: need at least 2 scenes for negatives");
    const int batch = static_cast<int>(cfg.get_int("pretrain.batch"));
    const int64_t steps = cfg.get_int("pretrain.steps");
    const double tau = cfg.get_real("pretrain.tau");
    const double peak = cfg.get_real("optim.peak_lr");
    const int64_t warmup = cfg.get_int("optim.warmup_steps");
    const int64_t decay = cfg.get_int("optim.decay_steps");
    if (static_cast<size_t>(batch) > captions.size())
        throw std::invalid_argument("pretrain: batch larger than caption set");

    Rng root(seed);
    PretrainResult out;
    out.text = TextEncoderParams::init(root);
    out.image = ImageEncoderParams::init(root);

    std::vector<tc::Tensor> images(captions.size());
    std::vector<std::vector<int>> tokens(captions.size());
    for (size_t i = 0; i < captions.size(); ++i) {
        images[i] = sim::render(captions.trajectories[i].states.front());
        tokens[i] = lang::tokenize(captions.trajectories[i].instruction);
    }

    auto params = out.text.trainable();
    for (auto& t : out.image.trainable()) params.push_back(t);
    tc::AdamState adam;
    adam.beta1 = cfg.get_real("optim.beta1");
    adam.beta2 = cfg.get_real("optim.beta2");
    adam.epsilon = cfg.get_real("optim.epsilon");

    Rng batch_rng = root.child(0);
    std::vector<uint32_t> perm;
    size_t pos = 0;
    out.log.reserve(static_cast<size_t>(steps));
    for (int64_t step = 0; step < steps; ++step) {
        std::vector<std::vector<int>> token_batch;
        std::vector<const tc::Tensor*> image_batch;
        for (int i = 0; i < batch; ++i) {
            if (pos >= perm.size()) {
                perm = batch_rng.permutation(static_cast<uint32_t>(captions.size()));
                pos = 0;
            }
            const uint32_t idx = perm[pos++];
            token_batch.push_back(tokens[idx]);
            image_batch.push_back(&images[idx]);
        }

        tc::Tensor z_text = encode_text_batch(out.text, token_batch);
        tc::Tensor z_img = encode_image_batch(out.image, image_batch);
        tc::Tensor loss = align::infonce_task_loss(z_text, z_img, tau);

        const double loss_value = loss.item();
        if (!std::isfinite(loss_value))
            throw std::runtime_error("pretrain: training diverged (non-finite loss) at step " + std::to_string(step));

        tc::backward(loss);
        tc::adam_step(params, adam, tc::lr_at(step, peak, warmup, decay));

        MetricRow row;
        row.step = step;
        row.loss = loss_value;
        row.lr = tc::lr_at(step, peak, warmup, decay);
        row.top1 = align::in_batch_top1(z_text, z_img);
        row.has_top1 = true;
        out.log.push_back(row);
    }
    return out;
}

}  // namespace grif::enc
