#include "pacfno/blocks.hpp"

#include <cmath>

namespace pacfno {

namespace {

constexpr int kChannels = 3;

struct InputView {
    int h, w;
};

InputView check_input(const Tensor& x, const char* who) {
    if (x.rank() != 3 && x.rank() != 4) throw ShapeError(std::string(who) + ": rank 3 or 4 input");
    int c = x.extent(x.rank() - 3);
    if (c != kChannels) throw ShapeError(std::string(who) + ": blocks maintain 3 channels");
    return {x.extent(x.rank() - 2), x.extent(x.rank() - 1)};
}

Tensor activate(const Tensor& t, Activation act) {
    return act == Activation::kGelu ? gelu(t) : t;
}

int default_modes(int h, int w) { return std::max(1, std::min(h, w) / 2); }

SpectralFilter random_filter(int anchor_h, int anchor_w, Rng& rng) {
    SpectralFilter f;
    f.anchor_h = anchor_h;
    f.anchor_w = anchor_w;
    int wh = anchor_w / 2 + 1;
    f.weight = Tensor::zeros({kChannels, kChannels, anchor_h, wh, 2});
    const double stddev = 0.02 / std::sqrt(static_cast<double>(kChannels));
    for (int64_t i = 0; i < f.weight.size(); ++i) f.weight.data()[i] = rng.normal(0.0, stddev);
    f.weight.set_requires_grad(true);
    return f;
}

void init_conv(FnoBlockParams& p, Rng& rng) {
    p.conv_weight = Tensor::zeros({kChannels, kChannels});
    p.conv_bias = Tensor::zeros({kChannels});
    const double bound = std::sqrt(6.0 / (6.0 * kChannels));  // kaiming-uniform, a = sqrt(5)
    const double bbound = 1.0 / std::sqrt(static_cast<double>(kChannels));
    for (int64_t i = 0; i < p.conv_weight.size(); ++i)
        p.conv_weight.data()[i] = rng.uniform(-bound, bound);
    for (int64_t i = 0; i < p.conv_bias.size(); ++i)
        p.conv_bias.data()[i] = rng.uniform(-bbound, bbound);
    p.conv_weight.set_requires_grad(true);
    p.conv_bias.set_requires_grad(true);
}

// Shared spectral+conv pipeline. The mask (vanilla/ablation) applies before
// the filter; chi/psi engage only when scaling to a larger target.
Tensor block_forward(const Tensor& h, const FnoBlockParams& p, LayerMode mode, int modes_h,
                     int modes_w, int target_h, int target_w, bool scale_here, Activation act) {
    InputView v = check_input(h, "block_forward");
    const bool scale = scale_here && (v.h != target_h || v.w != target_w);
    if (v.h > target_h || v.w > target_w)
        throw ShapeError("block_forward: input exceeds target resolution");

    HalfSpectrum spec = rfft2(h);
    if (mode == LayerMode::kVanilla || mode == LayerMode::kLowpassAblation) {
        int mh = modes_h > 0 ? modes_h : default_modes(v.h, v.w);
        int mw = modes_w > 0 ? modes_w : default_modes(v.h, v.w);
        mh = std::min(mh, v.h);
        mw = std::min(mw, v.w);
        spec = lowpass_truncate(spec, mh, mw);
    } else if (mode == LayerMode::kHighpassAblation) {
        int mh = modes_h > 0 ? modes_h : default_modes(v.h, v.w);
        int mw = modes_w > 0 ? modes_w : default_modes(v.h, v.w);
        spec = highpass_mask(spec, std::min(mh, v.h), std::min(mw, v.w));
    }
    // The vanilla filter is anchored at the kept modes, so unmatched bins are
    // the truncated ones; elsewhere the anchor covers the whole input.
    spec = apply_filter_matched(spec, p.filter);
    Tensor spectral_out;
    if (scale) {
        spec = spectrum_pad(spec, target_h, target_w);
        spectral_out = irfft2(spec, target_h, target_w);
    } else {
        spectral_out = irfft2(spec, v.h, v.w);
    }

    Tensor conv_out = channel_linear(h, p.conv_weight, p.conv_bias);
    if (scale) conv_out = bilinear_resize(conv_out, target_h, target_w);
    return activate(add(spectral_out, conv_out), act);
}

}  // namespace

std::vector<Tensor> PacFnoLayer::parameters() {
    std::vector<Tensor> out;
    for (FnoBlockParams& p : grid) {
        out.push_back(p.filter.weight);
        out.push_back(p.conv_weight);
        out.push_back(p.conv_bias);
    }
    out.push_back(fusion_weight);
    out.push_back(fusion_bias);
    out.push_back(bn.gamma);
    out.push_back(bn.beta);
    return out;
}

PacFnoLayer make_pacfno_layer(int branches, int stages, int target_h, int target_w,
                              LayerMode mode, Rng& rng) {
    if (branches < 1 || stages < 1) throw ConfigError("pacfno layer needs m >= 1 and n >= 1");
    PacFnoLayer layer;
    layer.branches = branches;
    layer.stages = stages;
    layer.target_h = target_h;
    layer.target_w = target_w;
    layer.mode = mode;
    int anchor_h = target_h, anchor_w = target_w;
    if (mode == LayerMode::kVanilla) {
        layer.modes_h = default_modes(target_h, target_w);
        layer.modes_w = layer.modes_h;
        anchor_h = layer.modes_h;
        anchor_w = layer.modes_w;
    }
    layer.grid.resize(static_cast<size_t>(branches) * stages);
    for (auto& p : layer.grid) {
        p.filter = random_filter(anchor_h, anchor_w, rng);
        init_conv(p, rng);
    }
    // Fusion starts as the mean over branches so the layer output begins in
    // the averaged-branch regime.
    layer.fusion_weight = Tensor::zeros({kChannels, kChannels * branches});
    for (int c = 0; c < kChannels; ++c)
        for (int b = 0; b < branches; ++b)
            layer.fusion_weight.data()[c * kChannels * branches + b * kChannels + c] =
                1.0 / branches;
    layer.fusion_weight.set_requires_grad(true);
    layer.fusion_bias = Tensor::zeros({kChannels}).set_requires_grad(true);
    layer.bn = BnState::create(kChannels);
    return layer;
}

PacFnoLayer make_identity_pacfno(int branches, int stages, int target_h, int target_w,
                                 Activation act) {
    PacFnoLayer layer;
    layer.branches = branches;
    layer.stages = stages;
    layer.target_h = target_h;
    layer.target_w = target_w;
    layer.act = act;
    layer.grid.resize(static_cast<size_t>(branches) * stages);
    for (auto& p : layer.grid) {
        p.filter = SpectralFilter::identity(kChannels, target_h, target_w);
        p.conv_weight = Tensor::zeros({kChannels, kChannels});
        p.conv_bias = Tensor::zeros({kChannels});
    }
    layer.fusion_weight = Tensor::zeros({kChannels, kChannels * branches});
    for (int c = 0; c < kChannels; ++c)
        for (int b = 0; b < branches; ++b)
            layer.fusion_weight.data()[c * kChannels * branches + b * kChannels + c] =
                1.0 / branches;
    layer.fusion_bias = Tensor::zeros({kChannels});
    layer.bn = BnState::neutral(kChannels);
    return layer;
}

namespace {

Tensor deep_param(const Tensor& t) {
    Tensor copy = t.detach_copy();
    copy.set_requires_grad(t.requires_grad());
    return copy;
}

}  // namespace

PacFnoLayer clone_layer(const PacFnoLayer& src) {
    PacFnoLayer out = src;
    for (size_t i = 0; i < out.grid.size(); ++i) {
        out.grid[i].filter.weight = deep_param(src.grid[i].filter.weight);
        out.grid[i].conv_weight = deep_param(src.grid[i].conv_weight);
        out.grid[i].conv_bias = deep_param(src.grid[i].conv_bias);
    }
    out.fusion_weight = deep_param(src.fusion_weight);
    out.fusion_bias = deep_param(src.fusion_bias);
    out.bn.gamma = deep_param(src.bn.gamma);
    out.bn.beta = deep_param(src.bn.beta);
    return out;
}

Tensor fno_block_forward(const Tensor& h, const FnoBlockParams& p, int modes_h, int modes_w,
                         Activation act) {
    InputView v = check_input(h, "fno_block_forward");
    if (modes_h > v.h || modes_w > v.w) throw ShapeError("fno_block_forward: modes exceed input");
    return block_forward(h, p, LayerMode::kVanilla, modes_h, modes_w, v.h, v.w, false, act);
}

Tensor acfno_block_forward(const Tensor& h, const FnoBlockParams& p, int target_h, int target_w,
                           bool scale_here, Activation act) {
    return block_forward(h, p, LayerMode::kAllComponent, 0, 0, target_h, target_w, scale_here,
                         act);
}

Tensor pacfno_forward(const Tensor& x, PacFnoLayer& layer, bool training) {
    if (x.rank() != 4) throw ShapeError("pacfno_forward: expected [N,3,H,W]");
    InputView v = check_input(x, "pacfno_forward");
    if (v.h > layer.target_h || v.w > layer.target_w)
        throw ShapeError("pacfno_forward: input exceeds target resolution");

    Tensor input = x;
    if (layer.mode == LayerMode::kVanilla && (v.h != layer.target_h || v.w != layer.target_w)) {
        // Eq.-1 blocks cannot change extents; vanilla mode upscales first.
        input = bilinear_resize(x, layer.target_h, layer.target_w);
    }
    std::vector<Tensor> branch_outputs;
    branch_outputs.reserve(layer.branches);
    for (int b = 0; b < layer.branches; ++b) {
        Tensor h = input;
        for (int s = 0; s < layer.stages; ++s)
            h = block_forward(h, layer.block(b, s), layer.mode, layer.modes_h, layer.modes_w,
                              layer.target_h, layer.target_w, s == 0, layer.act);
        branch_outputs.push_back(h);
    }
    Tensor fused = branch_outputs.size() == 1 ? branch_outputs[0] : concat_channels(branch_outputs);
    Tensor mixed = channel_linear(fused, layer.fusion_weight, layer.fusion_bias);
    return batch_norm(mixed, layer.bn, training);
}

std::vector<Tensor> pacfno_first_stage_hidden(const Tensor& x, const PacFnoLayer& layer) {
    if (x.rank() != 4) throw ShapeError("pacfno_first_stage_hidden: expected [N,3,H,W]");
    InputView v = check_input(x, "pacfno_first_stage_hidden");
    Tensor input = x;
    if (layer.mode == LayerMode::kVanilla && (v.h != layer.target_h || v.w != layer.target_w))
        input = bilinear_resize(x, layer.target_h, layer.target_w);
    std::vector<Tensor> hidden;
    hidden.reserve(layer.branches);
    for (int b = 0; b < layer.branches; ++b)
        hidden.push_back(block_forward(input, layer.block(b, 0), layer.mode, layer.modes_h,
                                       layer.modes_w, layer.target_h, layer.target_w, true,
                                       layer.act));
    return hidden;
}

int64_t pacfno_param_count(int branches, int stages, int target_h, int target_w) {
    if (branches < 1 || stages < 1 || target_h < 1 || target_w < 1)
        throw ConfigError("pacfno_param_count: extents must be positive");
    int64_t filter = 3LL * 3 * target_h * (target_w / 2 + 1) * 2;
    int64_t per_block = filter + 9 + 3;
    int64_t fusion = 3LL * branches * 3 + 3;
    return static_cast<int64_t>(branches) * stages * per_block + fusion + 6;
}

namespace {

double transform_flops(int h, int w) {
    double n = static_cast<double>(h) * w;
    return 5.0 * kChannels * n * std::log2(std::max(2.0, n));
}

double filter_flops(int h, int w) {
    return 8.0 * kChannels * kChannels * h * (w / 2 + 1);
}

double conv_flops(int co, int ci, int h, int w) {
    return 2.0 * co * ci * static_cast<double>(h) * w;
}

}  // namespace

FlopsBreakdown flops_estimate(int branches, int stages, int target_h, int target_w, int input_h,
                              int input_w) {
    if (branches < 1 || stages < 1) throw ConfigError("flops_estimate: m,n >= 1 required");
    FlopsBreakdown fb;
    for (int b = 0; b < branches; ++b)
        for (int s = 0; s < stages; ++s) {
            int h = (s == 0) ? input_h : target_h;
            int w = (s == 0) ? input_w : target_w;
            fb.transforms += transform_flops(h, w);             // rfft2 at the block input
            fb.transforms += transform_flops(target_h, target_w);  // irfft2 at the block output
            fb.filter += filter_flops(h, w);
            fb.conv += conv_flops(kChannels, kChannels, h, w);
        }
    fb.fusion = conv_flops(kChannels, kChannels * branches, target_h, target_w);
    fb.bn = 2.0 * kChannels * target_h * target_w;
    return fb;
}

}  // namespace pacfno
