#pragma once

#include <utility>
#include <vector>

#include "pacfno/tensor.hpp"

namespace pacfno {

// Hermitian half-spectrum of a real 2-D signal. `values` has shape
// [..., H, W/2+1, 2] with DC at bin (0,0): rows index frequencies
// 0..ceil(H/2)-1 then -floor(H/2)..-1, columns index non-negative
// horizontal frequencies 0..W/2. The spatial width is stored alongside
// because it is not recoverable from floor(W/2)+1 alone.
struct HalfSpectrum {
    Tensor values;
    int width = 0;

    int rows() const { return values.extent(values.rank() - 3); }
    int cols() const { return values.extent(values.rank() - 2); }
};

// Learnable complex filter anchored at a reference resolution.
// weight shape: [C_out, C_in, H_r, W_r/2+1, 2]; each complex entry is two
// real parameters.
struct SpectralFilter {
    Tensor weight;
    int anchor_h = 0;
    int anchor_w = 0;

    static SpectralFilter identity(int channels, int anchor_h, int anchor_w);
    int out_channels() const { return weight.extent(0); }
    int in_channels() const { return weight.extent(1); }
};

// Unnormalized forward DFT restricted to non-negative horizontal
// frequencies. Differentiable (backward is the adjoint transform).
// Input [C,H,W] or [N,C,H,W].
HalfSpectrum rfft2(const Tensor& x);

// Inverse with 1/(H*W) normalization; Hermitian completion applied
// internally so the output is exactly real. Differentiable.
Tensor irfft2(const HalfSpectrum& s, int height, int width);

// Testing oracle: direct O(N^2) double-sum DFT, full complex spectrum
// [..., H, W, 2]. Capped at H*W <= 4096.
Tensor naive_dft2(const Tensor& x);

// Ideal low-pass: keeps row frequencies representable at H_r (signed
// frequency in [-floor(H_r/2), ceil(H_r/2)-1]) and columns <= floor(W_r/2),
// zeroing the rest. Masking only; extents are unchanged.
HalfSpectrum lowpass_truncate(const HalfSpectrum& s, int h_r, int w_r);

// Bin-exact complement of lowpass_truncate.
HalfSpectrum highpass_mask(const HalfSpectrum& s, int h_r, int w_r);

// Frequency-domain zero-padding (chi): embeds bins by signed frequency into
// an (H_t, W_t) spectrum and rescales by (H_t*W_t)/(H*W) so constants are
// preserved through irfft2 at the target size.
HalfSpectrum spectrum_pad(const HalfSpectrum& s, int h_t, int w_t);

// Per-bin channel mixing with the filter bin located by signed frequency
// coordinates (the centered window of the anchor-resolution filter).
// Input extents must not exceed the anchor. Differentiable in both inputs.
HalfSpectrum apply_filter(const HalfSpectrum& s, const SpectralFilter& f);

// Same matching rule without the size precondition: input bins with no
// anchor counterpart produce zeros. Used after low-pass truncation where
// those bins are already zero.
HalfSpectrum apply_filter_matched(const HalfSpectrum& s, const SpectralFilter& f);

// Half-pixel-center (align_corners=false) resampling. bilinear_resize is
// differentiable in x; the rest are inference-only kernels.
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);
Tensor bicubic_resize(const Tensor& x, int out_h, int out_w);  // Catmull-Rom a=-0.5
Tensor nearest_resize(const Tensor& x, int out_h, int out_w);
Tensor area_resize(const Tensor& x, int out_h, int out_w);     // exact box overlap

// Annulus-averaged log(1+|X|) of the centered spectrum, channels averaged,
// normalized so bin 0 equals 1. Returns (radius center, value) pairs.
std::vector<std::pair<double, double>> radial_spectrum(const Tensor& x, int bins);

}  // namespace pacfno
