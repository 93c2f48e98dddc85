#pragma once

#include <cstdint>
#include <vector>

#include "pacfno/nn.hpp"
#include "pacfno/rng.hpp"
#include "pacfno/spectral.hpp"
#include "pacfno/tensor.hpp"

namespace pacfno {

enum class LayerMode { kVanilla, kAllComponent, kLowpassAblation, kHighpassAblation };
enum class Activation { kGelu, kIdentity };  // identity is a test-harness hook

// One spectral block: learnable filter, 1x1 conv path weight and bias.
// Channel extents are fixed at 3 throughout.
struct FnoBlockParams {
    SpectralFilter filter;
    Tensor conv_weight;  // [3,3]
    Tensor conv_bias;    // [3]
};

// n stages x m parallel branches of blocks, fused by a 3m->3 linear layer
// followed by batch normalization.
struct PacFnoLayer {
    int branches = 1;  // m
    int stages = 1;    // n
    int target_h = 0, target_w = 0;
    LayerMode mode = LayerMode::kAllComponent;
    Activation act = Activation::kGelu;
    // Kept modes for vanilla / ablation masks; 0 means the min(H,W)/2 default
    // at the block's input resolution.
    int modes_h = 0, modes_w = 0;

    std::vector<FnoBlockParams> grid;  // branch-major: grid[branch * stages + stage]
    Tensor fusion_weight;              // [3, 3m]
    Tensor fusion_bias;                // [3]
    BnState bn;                        // over 3 channels

    FnoBlockParams& block(int branch, int stage) { return grid[branch * stages + stage]; }
    const FnoBlockParams& block(int branch, int stage) const {
        return grid[branch * stages + stage];
    }
    // All trainable tensors (theta_o), deterministic order.
    std::vector<Tensor> parameters();
};

// Filter entries ~ N(0, 0.02/sqrt(C_in)) per real component, conv and fusion
// Kaiming-uniform, fusion preset to the mean of branch outputs.
PacFnoLayer make_pacfno_layer(int branches, int stages, int target_h, int target_w,
                              LayerMode mode, Rng& rng);

// Identity-regime layer for tests: identity filters, zeroed conv path,
// mean fusion, neutral BN.
PacFnoLayer make_identity_pacfno(int branches, int stages, int target_h, int target_w,
                                 Activation act = Activation::kGelu);

// Deep copy (tensors are handles; plain copies would share storage).
PacFnoLayer clone_layer(const PacFnoLayer& src);

// Eq.-1 style block: low-pass to the kept modes, filter, inverse transform at
// the input resolution, plus the 1x1 conv residual, then the activation.
Tensor fno_block_forward(const Tensor& h, const FnoBlockParams& p, int modes_h, int modes_w,
                         Activation act = Activation::kGelu);

// All-component block: filter at full input spectrum, optional zero-padding
// to the target in the frequency domain, conv path optionally interpolated.
// When scale_here is false or the input is already at the target, both chi
// and psi are identities and the output keeps the input extents.
Tensor acfno_block_forward(const Tensor& h, const FnoBlockParams& p, int target_h, int target_w,
                           bool scale_here, Activation act = Activation::kGelu);

// Full parallel layer: every branch runs its stages (scaling in the first
// block), outputs are channel-concatenated, fused 3m->3 and batch-normalized.
Tensor pacfno_forward(const Tensor& x, PacFnoLayer& layer, bool training);

// First-stage hidden vector of each branch (the h^i_1 probes).
std::vector<Tensor> pacfno_first_stage_hidden(const Tensor& x, const PacFnoLayer& layer);

// m*n*(3*3*H_t*(W_t/2+1)*2 + 9 + 3) + (3m*3 + 3) + 6.
int64_t pacfno_param_count(int branches, int stages, int target_h, int target_w);

struct FlopsBreakdown {
    double transforms = 0.0;
    double filter = 0.0;
    double conv = 0.0;
    double fusion = 0.0;
    double bn = 0.0;
    double total() const { return transforms + filter + conv + fusion + bn; }
};

// Real-operation count for one forward pass at the given input resolution:
// transforms at 5*C*H*W*log2(H*W), filter at 8 ops per (o,i,bin), channel
// mixes at 2*Co*Ci*H*W, BN at 2 ops per element.
FlopsBreakdown flops_estimate(int branches, int stages, int target_h, int target_w,
                              int input_h, int input_w);

}  // namespace pacfno
