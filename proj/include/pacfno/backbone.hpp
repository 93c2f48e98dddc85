#pragma once

#include <vector>

#include "pacfno/nn.hpp"
#include "pacfno/rng.hpp"
#include "pacfno/tensor.hpp"

namespace pacfno {

struct LabeledImageSet;  // data.hpp

// Small convolutional classifier standing in for the pre-trained backbones:
// stages of {conv3x3, batch norm, gelu, 2x2 average pool}, then global
// average pooling and a linear head.
struct ConvStage {
    Tensor weight;  // [Co,Ci,3,3]
    Tensor bias;    // [Co]
    BnState bn;
};

struct TinyCnn {
    std::vector<ConvStage> stages;
    Tensor head_weight;  // [K, C_last]
    Tensor head_bias;    // [K]
    int input_h = 0, input_w = 0;
    int classes = 0;

    std::vector<Tensor> parameters();  // theta_p
    int64_t parameter_count();
};

// Input extent must be divisible by 2^(stage count).
TinyCnn make_tiny_cnn(int input_h, int input_w, int classes, const std::vector<int>& widths,
                      Rng& rng);

// Deep copy (tensors are handles; plain copies would share storage).
TinyCnn clone_backbone(const TinyCnn& src);

Tensor backbone_forward(const Tensor& x, TinyCnn& model, bool training);

// Trains with cross-entropy + Adam at the target resolution and returns the
// final validation top-1 (the harmonization reference accuracy).
double pretrain_backbone(TinyCnn& model, const LabeledImageSet& train,
                         const LabeledImageSet& val, int epochs, double lr, int batch_size,
                         uint64_t seed);

// Eval-mode top-1 of backbone alone over a dataset.
double backbone_top1(TinyCnn& model, const LabeledImageSet& set, int batch_size);

}  // namespace pacfno
