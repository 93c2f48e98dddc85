#pragma once

#include <vector>

#include "pacfno/tensor.hpp"

namespace pacfno {

// out[n,o,h,w] = sum_i weight[o,i] * x[n,i,h,w] + bias[o].
// Accepts [N,C,H,W] or unbatched [C,H,W]; rank is preserved.
Tensor channel_linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Fully connected: x[N,F] * weight[K,F]^T + bias[K].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Exact-erf GELU: x * Phi(x).
Tensor gelu(const Tensor& x);

struct BnState {
    Tensor gamma;
    Tensor beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    static BnState create(int channels);
    // Running stats chosen so that eval mode is the exact identity
    // (var = 1 - eps makes the normalizer land on 1.0).
    static BnState neutral(int channels);
    int channels() const { return gamma.extent(0); }
};

// Per-channel normalization over (N,H,W). Training mode uses batch statistics
// and updates running stats; eval mode is a pure per-element affine map.
Tensor batch_norm(const Tensor& x, BnState& state, bool training);

// Mean over the batch of -log softmax(logits)[label], max-stabilized.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// 3x3 convolution, stride 1, zero padding 1: weight[Co,Ci,3,3], bias[Co].
Tensor conv3x3(const Tensor& x, const Tensor& weight, const Tensor& bias);

// 2x2 average pooling; spatial extents must be even.
Tensor avg_pool2(const Tensor& x);

// Mean over spatial extents: [N,C,H,W] -> [N,C].
Tensor global_avg_pool(const Tensor& x);

}  // namespace pacfno
