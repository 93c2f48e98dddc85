#include "pacfno/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "pacfno/fft.hpp"

namespace pacfno {

using fft::cd;

namespace {

// (lead, H, W) view of a spatial tensor [..., H, W].
struct SpatialView {
    int64_t lead;
    int h, w;
};

SpatialView spatial(const Tensor& x, const char* who) {
    if (x.rank() < 2) throw ShapeError(std::string(who) + ": rank must be >= 2");
    int h = x.extent(x.rank() - 2);
    int w = x.extent(x.rank() - 1);
    if (h < 1 || w < 1) throw ShapeError(std::string(who) + ": empty spatial extents");
    return {x.size() / (static_cast<int64_t>(h) * w), h, w};
}

// (lead, H, Wh) view of spectrum values [..., H, Wh, 2].
struct SpectrumView {
    int64_t lead;
    int h, wh;
};

SpectrumView spectrum(const HalfSpectrum& s, const char* who) {
    const Tensor& t = s.values;
    if (t.rank() < 3 || t.extent(t.rank() - 1) != 2)
        throw ShapeError(std::string(who) + ": malformed half-spectrum");
    int h = t.extent(t.rank() - 3);
    int wh = t.extent(t.rank() - 2);
    if (wh != s.width / 2 + 1)
        throw ShapeError(std::string(who) + ": column extent does not match stored width");
    return {t.size() / (2LL * h * wh), h, wh};
}

int signed_freq(int u, int n) { return (u < (n + 1) / 2) ? u : u - n; }

// Row keep-set for an H_r-point transform: exactly the signed frequencies
// representable at H_r. At H_r == H this is the identity.
bool row_kept(int u, int h, int h_r) {
    int f = signed_freq(u, h);
    return f >= -(h_r / 2) && f <= (h_r - 1) / 2;
}

// Full complex spectrum (unnormalized forward) of one lead slice.
void dft2_slice(const double* x, int h, int w, std::vector<cd>& grid) {
    grid.assign(static_cast<size_t>(h) * w, cd(0.0, 0.0));
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) grid[static_cast<size_t>(r) * w + c] = cd(x[r * w + c], 0.0);
    std::vector<cd> row(w);
    for (int r = 0; r < h; ++r) {
        std::copy_n(grid.begin() + static_cast<size_t>(r) * w, w, row.begin());
        fft::transform(row, false);
        std::copy_n(row.begin(), w, grid.begin() + static_cast<size_t>(r) * w);
    }
    for (int c = 0; c < w; ++c) fft::transform_strided(grid.data() + c, h, w, false);
}

}  // namespace

SpectralFilter SpectralFilter::identity(int channels, int anchor_h, int anchor_w) {
    SpectralFilter f;
    f.anchor_h = anchor_h;
    f.anchor_w = anchor_w;
    int wh = anchor_w / 2 + 1;
    f.weight = Tensor::zeros({channels, channels, anchor_h, wh, 2});
    double* p = f.weight.data();
    for (int c = 0; c < channels; ++c)
        for (int u = 0; u < anchor_h; ++u)
            for (int v = 0; v < wh; ++v)
                p[((((static_cast<int64_t>(c) * channels + c) * anchor_h + u) * wh + v) * 2)] = 1.0;
    return f;
}

HalfSpectrum rfft2(const Tensor& x) {
    SpatialView v = spatial(x, "rfft2");
    const int h = v.h, w = v.w, wh = w / 2 + 1;
    Shape out_shape(x.shape().begin(), x.shape().end() - 2);
    out_shape.push_back(h);
    out_shape.push_back(wh);
    out_shape.push_back(2);
    Tensor out = Tensor::zeros(out_shape);
    const double* px = x.data();
    double* po = out.data();
    std::vector<cd> row(w);
    std::vector<cd> cols(static_cast<size_t>(h) * wh);
    for (int64_t l = 0; l < v.lead; ++l) {
        const double* slice = px + l * h * w;
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) row[c] = cd(slice[r * w + c], 0.0);
            fft::transform(row, false);
            for (int c = 0; c < wh; ++c) cols[static_cast<size_t>(r) * wh + c] = row[c];
        }
        for (int c = 0; c < wh; ++c) fft::transform_strided(cols.data() + c, h, wh, false);
        double* oslice = po + l * h * wh * 2;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < wh; ++c) {
                oslice[(static_cast<int64_t>(r) * wh + c) * 2] = cols[static_cast<size_t>(r) * wh + c].real();
                oslice[(static_cast<int64_t>(r) * wh + c) * 2 + 1] = cols[static_cast<size_t>(r) * wh + c].imag();
            }
    }
    if (taping({&x})) {
        out.set_requires_grad(true);
        auto xi = x.impl_;
        auto oi = out.impl_;
        Tape::current()->record([xi, oi, v, h, w, wh]() {
            if (oi->grad.empty() || !xi->requires_grad) return;
            xi->ensure_grad();
            // Adjoint: real part of the unnormalized inverse DFT of the
            // zero-padded cotangent (no Hermitian mirroring, no doubling).
            std::vector<cd> grid(static_cast<size_t>(h) * w);
            std::vector<cd> row(w);
            for (int64_t l = 0; l < v.lead; ++l) {
                std::fill(grid.begin(), grid.end(), cd(0.0, 0.0));
                const double* g = oi->grad.data() + l * h * wh * 2;
                for (int r = 0; r < h; ++r)
                    for (int c = 0; c < wh; ++c)
                        grid[static_cast<size_t>(r) * w + c] =
                            cd(g[(static_cast<int64_t>(r) * wh + c) * 2],
                               g[(static_cast<int64_t>(r) * wh + c) * 2 + 1]);
                for (int c = 0; c < wh; ++c) fft::transform_strided(grid.data() + c, h, w, true);
                for (int r = 0; r < h; ++r) {
                    std::copy_n(grid.begin() + static_cast<size_t>(r) * w, w, row.begin());
                    fft::transform(row, true);
                    double* gx = xi->grad.data() + l * h * w + static_cast<int64_t>(r) * w;
                    for (int c = 0; c < w; ++c) gx[c] += row[c].real();
                }
            }
        });
    }
    check_finite(out, "rfft2");
    return {out, w};
}

Tensor irfft2(const HalfSpectrum& s, int height, int width) {
    SpectrumView v = spectrum(s, "irfft2");
    if (v.h != height || v.wh != width / 2 + 1 || s.width != width)
        throw ShapeError("irfft2: extents do not match the spectrum");
    const int h = height, w = width, wh = v.wh;
    Shape out_shape(s.values.shape().begin(), s.values.shape().end() - 3);
    out_shape.push_back(h);
    out_shape.push_back(w);
    Tensor out = Tensor::zeros(out_shape);
    const double* ps = s.values.data();
    double* po = out.data();
    const double norm = 1.0 / (static_cast<double>(h) * w);
    std::vector<cd> grid(static_cast<size_t>(h) * w);
    std::vector<cd> row(w);
    for (int64_t l = 0; l < v.lead; ++l) {
        const double* slice = ps + l * h * wh * 2;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < wh; ++c)
                grid[static_cast<size_t>(r) * w + c] =
                    cd(slice[(static_cast<int64_t>(r) * wh + c) * 2],
                       slice[(static_cast<int64_t>(r) * wh + c) * 2 + 1]);
        // Hermitian completion of the missing columns.
        for (int c = wh; c < w; ++c) {
            int mc = w - c;
            for (int r = 0; r < h; ++r) {
                int mr = (h - r) % h;
                grid[static_cast<size_t>(r) * w + c] =
                    std::conj(grid[static_cast<size_t>(mr) * w + mc]);
            }
        }
        for (int c = 0; c < w; ++c) fft::transform_strided(grid.data() + c, h, w, true);
        double* oslice = po + l * h * w;
        for (int r = 0; r < h; ++r) {
            std::copy_n(grid.begin() + static_cast<size_t>(r) * w, w, row.begin());
            fft::transform(row, true);
            for (int c = 0; c < w; ++c) oslice[r * w + c] = row[c].real() * norm;
        }
    }
    if (taping({&s.values})) {
        out.set_requires_grad(true);
        auto si = s.values.impl_;
        auto oi = out.impl_;
        Tape::current()->record([si, oi, v, h, w, wh, norm]() {
            if (oi->grad.empty() || !si->requires_grad) return;
            si->ensure_grad();
            // Adjoint: forward DFT of the cotangent; mirrored columns double.
            std::vector<cd> grid(static_cast<size_t>(h) * w);
            std::vector<cd> row(w);
            for (int64_t l = 0; l < v.lead; ++l) {
                const double* g = oi->grad.data() + l * h * w;
                for (int r = 0; r < h; ++r) {
                    for (int c = 0; c < w; ++c) row[c] = cd(g[r * w + c], 0.0);
                    fft::transform(row, false);
                    std::copy_n(row.begin(), w, grid.begin() + static_cast<size_t>(r) * w);
                }
                for (int c = 0; c < wh; ++c) fft::transform_strided(grid.data() + c, h, w, false);
                double* gs = si->grad.data() + l * h * wh * 2;
                for (int r = 0; r < h; ++r)
                    for (int c = 0; c < wh; ++c) {
                        bool self_conj = (c == 0) || (w % 2 == 0 && c == w / 2);
                        double scale = (self_conj ? 1.0 : 2.0) * norm;
                        gs[(static_cast<int64_t>(r) * wh + c) * 2] +=
                            scale * grid[static_cast<size_t>(r) * w + c].real();
                        gs[(static_cast<int64_t>(r) * wh + c) * 2 + 1] +=
                            scale * grid[static_cast<size_t>(r) * w + c].imag();
                    }
            }
        });
    }
    check_finite(out, "irfft2");
    return out;
}

Tensor naive_dft2(const Tensor& x) {
    SpatialView v = spatial(x, "naive_dft2");
    const int h = v.h, w = v.w;
    if (static_cast<int64_t>(h) * w > 4096)
        throw ShapeError("naive_dft2: size cap H*W <= 4096 exceeded");
    Shape out_shape(x.shape().begin(), x.shape().end() - 2);
    out_shape.push_back(h);
    out_shape.push_back(w);
    out_shape.push_back(2);
    Tensor out = Tensor::zeros(out_shape);
    const double* px = x.data();
    double* po = out.data();
    for (int64_t l = 0; l < v.lead; ++l) {
        const double* slice = px + l * h * w;
        double* oslice = po + l * h * w * 2;
        for (int u = 0; u < h; ++u)
            for (int q = 0; q < w; ++q) {
                double re = 0.0, im = 0.0;
                for (int r = 0; r < h; ++r)
                    for (int c = 0; c < w; ++c) {
                        double ang = -2.0 * M_PI *
                                     (static_cast<double>(u) * r / h + static_cast<double>(q) * c / w);
                        re += slice[r * w + c] * std::cos(ang);
                        im += slice[r * w + c] * std::sin(ang);
                    }
                oslice[(static_cast<int64_t>(u) * w + q) * 2] = re;
                oslice[(static_cast<int64_t>(u) * w + q) * 2 + 1] = im;
            }
    }
    return out;
}

namespace {

HalfSpectrum mask_bins(const HalfSpectrum& s, int h_r, int w_r, bool complement,
                       const char* who) {
    SpectrumView v = spectrum(s, who);
    if (h_r > v.h || w_r > s.width)
        throw ShapeError(std::string(who) + ": threshold larger than input");
    if (h_r < 1 || w_r < 1) throw ShapeError(std::string(who) + ": threshold must be positive");
    const int h = v.h, wh = v.wh;
    std::vector<double> mask(static_cast<size_t>(h) * wh);
    for (int u = 0; u < h; ++u)
        for (int c = 0; c < wh; ++c) {
            bool keep = row_kept(u, h, h_r) && c <= w_r / 2;
            mask[static_cast<size_t>(u) * wh + c] = (keep != complement) ? 1.0 : 0.0;
        }
    Tensor out = Tensor::zeros(s.values.shape());
    const double* ps = s.values.data();
    double* po = out.data();
    for (int64_t l = 0; l < v.lead; ++l)
        for (int u = 0; u < h; ++u)
            for (int c = 0; c < wh; ++c) {
                double m = mask[static_cast<size_t>(u) * wh + c];
                int64_t base = ((l * h + u) * wh + c) * 2;
                po[base] = ps[base] * m;
                po[base + 1] = ps[base + 1] * m;
            }
    if (taping({&s.values})) {
        out.set_requires_grad(true);
        auto si = s.values.impl_;
        auto oi = out.impl_;
        int64_t lead = v.lead;
        Tape::current()->record([si, oi, mask, lead, h, wh]() {
            if (oi->grad.empty() || !si->requires_grad) return;
            si->ensure_grad();
            for (int64_t l = 0; l < lead; ++l)
                for (int u = 0; u < h; ++u)
                    for (int c = 0; c < wh; ++c) {
                        double m = mask[static_cast<size_t>(u) * wh + c];
                        int64_t base = ((l * h + u) * wh + c) * 2;
                        si->grad[base] += oi->grad[base] * m;
                        si->grad[base + 1] += oi->grad[base + 1] * m;
                    }
        });
    }
    return {out, s.width};
}

}  // namespace

HalfSpectrum lowpass_truncate(const HalfSpectrum& s, int h_r, int w_r) {
    return mask_bins(s, h_r, w_r, false, "lowpass_truncate");
}

HalfSpectrum highpass_mask(const HalfSpectrum& s, int h_r, int w_r) {
    return mask_bins(s, h_r, w_r, true, "highpass_mask");
}

HalfSpectrum spectrum_pad(const HalfSpectrum& s, int h_t, int w_t) {
    SpectrumView v = spectrum(s, "spectrum_pad");
    const int h = v.h, w = s.width, wh = v.wh;
    if (h_t < h || w_t < w) throw ShapeError("spectrum_pad: shrink request");
    if (h_t == h && w_t == w) return s;
    const int wh_t = w_t / 2 + 1;
    // Even-size Nyquist bins are copied as-is into the positive-frequency
    // region (no energy splitting): u <= H/2 maps to u.
    std::vector<int> row_map(h);
    for (int u = 0; u < h; ++u) row_map[u] = (u <= h / 2) ? u : u - h + h_t;
    const double scale =
        (static_cast<double>(h_t) * w_t) / (static_cast<double>(h) * w);
    Shape out_shape(s.values.shape().begin(), s.values.shape().end() - 3);
    out_shape.push_back(h_t);
    out_shape.push_back(wh_t);
    out_shape.push_back(2);
    Tensor out = Tensor::zeros(out_shape);
    const double* ps = s.values.data();
    double* po = out.data();
    for (int64_t l = 0; l < v.lead; ++l)
        for (int u = 0; u < h; ++u) {
            int du = row_map[u];
            for (int c = 0; c < wh; ++c) {
                int64_t src = ((l * h + u) * wh + c) * 2;
                int64_t dst = ((l * h_t + du) * wh_t + c) * 2;
                po[dst] = ps[src] * scale;
                po[dst + 1] = ps[src + 1] * scale;
            }
        }
    if (taping({&s.values})) {
        out.set_requires_grad(true);
        auto si = s.values.impl_;
        auto oi = out.impl_;
        int64_t lead = v.lead;
        Tape::current()->record([si, oi, row_map, lead, h, wh, h_t, wh_t, scale]() {
            if (oi->grad.empty() || !si->requires_grad) return;
            si->ensure_grad();
            for (int64_t l = 0; l < lead; ++l)
                for (int u = 0; u < h; ++u) {
                    int du = row_map[u];
                    for (int c = 0; c < wh; ++c) {
                        int64_t src = ((l * h + u) * wh + c) * 2;
                        int64_t dst = ((l * h_t + du) * wh_t + c) * 2;
                        si->grad[src] += oi->grad[dst] * scale;
                        si->grad[src + 1] += oi->grad[dst + 1] * scale;
                    }
                }
        });
    }
    return {out, w_t};
}

namespace {

HalfSpectrum filter_core(const HalfSpectrum& s, const SpectralFilter& f, const char* who) {
    SpectrumView v = spectrum(s, who);
    const int h = v.h, wh = v.wh;
    const int ci = f.in_channels(), co = f.out_channels();
    const int fh = f.anchor_h, fwh = f.anchor_w / 2 + 1;
    if (v.lead % ci != 0) throw ShapeError(std::string(who) + ": channel mismatch");
    const int64_t batch = v.lead / ci;

    // Filter row for each input row, or -1 when the signed frequency has no
    // anchor counterpart.
    std::vector<int> row_map(h, -1);
    for (int u = 0; u < h; ++u) {
        int freq = signed_freq(u, h);
        if (freq >= -(fh / 2) && freq <= (fh - 1) / 2) row_map[u] = (freq >= 0) ? freq : freq + fh;
    }

    Shape out_shape = s.values.shape();
    out_shape[out_shape.size() - 4] = co;
    Tensor out = Tensor::zeros(out_shape);
    const double* ps = s.values.data();
    const double* pf = f.weight.data();
    double* po = out.data();
    auto sidx = [&](int64_t b, int c, int u, int q) {
        return (((b * ci + c) * h + u) * wh + q) * 2;
    };
    auto oidx = [&](int64_t b, int o, int u, int q) {
        return (((b * co + o) * h + u) * wh + q) * 2;
    };
    auto fidx = [&](int o, int i, int r, int q) {
        return (((static_cast<int64_t>(o) * ci + i) * fh + r) * fwh + q) * 2;
    };
    for (int64_t b = 0; b < batch; ++b)
        for (int u = 0; u < h; ++u) {
            int r = row_map[u];
            if (r < 0) continue;
            for (int q = 0; q < wh && q < fwh; ++q)
                for (int o = 0; o < co; ++o) {
                    double re = 0.0, im = 0.0;
                    for (int i = 0; i < ci; ++i) {
                        double fre = pf[fidx(o, i, r, q)];
                        double fim = pf[fidx(o, i, r, q) + 1];
                        double sre = ps[sidx(b, i, u, q)];
                        double sim = ps[sidx(b, i, u, q) + 1];
                        re += fre * sre - fim * sim;
                        im += fre * sim + fim * sre;
                    }
                    po[oidx(b, o, u, q)] = re;
                    po[oidx(b, o, u, q) + 1] = im;
                }
        }
    if (taping({&s.values, &f.weight})) {
        out.set_requires_grad(true);
        auto si = s.values.impl_;
        auto fi = f.weight.impl_;
        auto oi = out.impl_;
        Tape::current()->record([si, fi, oi, row_map, batch, h, wh, ci, co, fh, fwh]() {
            if (oi->grad.empty()) return;
            if (si->requires_grad) si->ensure_grad();
            if (fi->requires_grad) fi->ensure_grad();
            auto sidx = [=](int64_t b, int c, int u, int q) {
                return (((b * ci + c) * h + u) * wh + q) * 2;
            };
            auto oidx = [=](int64_t b, int o, int u, int q) {
                return (((b * co + o) * h + u) * wh + q) * 2;
            };
            auto fidx = [=](int o, int i, int r, int q) {
                return (((static_cast<int64_t>(o) * ci + i) * fh + r) * fwh + q) * 2;
            };
            const double* g = oi->grad.data();
            for (int64_t b = 0; b < batch; ++b)
                for (int u = 0; u < h; ++u) {
                    int r = row_map[u];
                    if (r < 0) continue;
                    for (int q = 0; q < wh && q < fwh; ++q)
                        for (int o = 0; o < co; ++o) {
                            double gre = g[oidx(b, o, u, q)];
                            double gim = g[oidx(b, o, u, q) + 1];
                            for (int i = 0; i < ci; ++i) {
                                double fre = fi->data[fidx(o, i, r, q)];
                                double fim = fi->data[fidx(o, i, r, q) + 1];
                                double sre = si->data[sidx(b, i, u, q)];
                                double sim = si->data[sidx(b, i, u, q) + 1];
                                if (si->requires_grad) {
                                    si->grad[sidx(b, i, u, q)] += gre * fre + gim * fim;
                                    si->grad[sidx(b, i, u, q) + 1] += -gre * fim + gim * fre;
                                }
                                if (fi->requires_grad) {
                                    fi->grad[fidx(o, i, r, q)] += gre * sre + gim * sim;
                                    fi->grad[fidx(o, i, r, q) + 1] += -gre * sim + gim * sre;
                                }
                            }
                        }
                }
        });
    }
    check_finite(out, who);
    return {out, s.width};
}

}  // namespace

HalfSpectrum apply_filter(const HalfSpectrum& s, const SpectralFilter& f) {
    SpectrumView v = spectrum(s, "apply_filter");
    if (v.h > f.anchor_h || s.width > f.anchor_w)
        throw ShapeError("apply_filter: input larger than anchor resolution");
    return filter_core(s, f, "apply_filter");
}

HalfSpectrum apply_filter_matched(const HalfSpectrum& s, const SpectralFilter& f) {
    return filter_core(s, f, "apply_filter_matched");
}

namespace {

struct AxisTap {
    int i0, i1;
    double w0, w1;
};

std::vector<AxisTap> bilinear_taps(int in, int out) {
    std::vector<AxisTap> taps(out);
    const double r = static_cast<double>(in) / out;
    for (int i = 0; i < out; ++i) {
        double s = (i + 0.5) * r - 0.5;
        int i0 = static_cast<int>(std::floor(s));
        double t = s - i0;
        taps[i].i0 = std::clamp(i0, 0, in - 1);
        taps[i].i1 = std::clamp(i0 + 1, 0, in - 1);
        taps[i].w0 = 1.0 - t;
        taps[i].w1 = t;
    }
    return taps;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
    SpatialView v = spatial(x, "bilinear_resize");
    if (out_h < 1 || out_w < 1) throw ShapeError("bilinear_resize: bad target");
    if (out_h == v.h && out_w == v.w) return x;  // bit-exact identity
    auto ty = bilinear_taps(v.h, out_h);
    auto tx = bilinear_taps(v.w, out_w);
    Shape out_shape(x.shape().begin(), x.shape().end() - 2);
    out_shape.push_back(out_h);
    out_shape.push_back(out_w);
    Tensor out = Tensor::zeros(out_shape);
    const double* px = x.data();
    double* po = out.data();
    for (int64_t l = 0; l < v.lead; ++l) {
        const double* slice = px + l * v.h * v.w;
        double* oslice = po + static_cast<int64_t>(l) * out_h * out_w;
        for (int y = 0; y < out_h; ++y)
            for (int z = 0; z < out_w; ++z) {
                const AxisTap& ay = ty[y];
                const AxisTap& ax = tx[z];
                oslice[y * out_w + z] =
                    ay.w0 * (ax.w0 * slice[ay.i0 * v.w + ax.i0] + ax.w1 * slice[ay.i0 * v.w + ax.i1]) +
                    ay.w1 * (ax.w0 * slice[ay.i1 * v.w + ax.i0] + ax.w1 * slice[ay.i1 * v.w + ax.i1]);
            }
    }
    if (taping({&x})) {
        out.set_requires_grad(true);
        auto xi = x.impl_;
        auto oi = out.impl_;
        Tape::current()->record([xi, oi, v, out_h, out_w, ty, tx]() {
            if (oi->grad.empty() || !xi->requires_grad) return;
            xi->ensure_grad();
            for (int64_t l = 0; l < v.lead; ++l) {
                const double* g = oi->grad.data() + static_cast<int64_t>(l) * out_h * out_w;
                double* gx = xi->grad.data() + l * v.h * v.w;
                for (int y = 0; y < out_h; ++y)
                    for (int z = 0; z < out_w; ++z) {
                        const AxisTap& ay = ty[y];
                        const AxisTap& ax = tx[z];
                        double gv = g[y * out_w + z];
                        gx[ay.i0 * v.w + ax.i0] += gv * ay.w0 * ax.w0;
                        gx[ay.i0 * v.w + ax.i1] += gv * ay.w0 * ax.w1;
                        gx[ay.i1 * v.w + ax.i0] += gv * ay.w1 * ax.w0;
                        gx[ay.i1 * v.w + ax.i1] += gv * ay.w1 * ax.w1;
                    }
            }
        });
    }
    check_finite(out, "bilinear_resize");
    return out;
}

namespace {

// Catmull-Rom (a = -0.5) weights for fractional offset t.
void cubic_weights(double t, double wgt[4]) {
    double t2 = t * t, t3 = t2 * t;
    wgt[0] = -0.5 * t + t2 - 0.5 * t3;
    wgt[1] = 1.0 - 2.5 * t2 + 1.5 * t3;
    wgt[2] = 0.5 * t + 2.0 * t2 - 1.5 * t3;
    wgt[3] = -0.5 * t2 + 0.5 * t3;
}

}  // namespace

Tensor bicubic_resize(const Tensor& x, int out_h, int out_w) {
    SpatialView v = spatial(x, "bicubic_resize");
    if (out_h < 1 || out_w < 1) throw ShapeError("bicubic_resize: bad target");
    if (out_h == v.h && out_w == v.w) return x.detach_copy();
    Shape out_shape(x.shape().begin(), x.shape().end() - 2);
    out_shape.push_back(out_h);
    out_shape.push_back(out_w);
    Tensor out = Tensor::zeros(out_shape);
    const double* px = x.data();
    double* po = out.data();
    const double ry = static_cast<double>(v.h) / out_h;
    const double rx = static_cast<double>(v.w) / out_w;
    for (int64_t l = 0; l < v.lead; ++l) {
        const double* slice = px + l * v.h * v.w;
        double* oslice = po + static_cast<int64_t>(l) * out_h * out_w;
        for (int y = 0; y < out_h; ++y) {
            double sy = (y + 0.5) * ry - 0.5;
            int y0 = static_cast<int>(std::floor(sy));
            double wy[4];
            cubic_weights(sy - y0, wy);
            for (int z = 0; z < out_w; ++z) {
                double sx = (z + 0.5) * rx - 0.5;
                int x0 = static_cast<int>(std::floor(sx));
                double wx[4];
                cubic_weights(sx - x0, wx);
                double acc = 0.0;
                for (int ky = 0; ky < 4; ++ky) {
                    int yy = std::clamp(y0 - 1 + ky, 0, v.h - 1);
                    double racc = 0.0;
                    for (int kx = 0; kx < 4; ++kx) {
                        int xx = std::clamp(x0 - 1 + kx, 0, v.w - 1);
                        racc += wx[kx] * slice[yy * v.w + xx];
                    }
                    acc += wy[ky] * racc;
                }
                oslice[y * out_w + z] = acc;
            }
        }
    }
    return out;
}

Tensor nearest_resize(const Tensor& x, int out_h, int out_w) {
    SpatialView v = spatial(x, "nearest_resize");
    if (out_h == v.h && out_w == v.w) return x.detach_copy();
    Shape out_shape(x.shape().begin(), x.shape().end() - 2);
    out_shape.push_back(out_h);
    out_shape.push_back(out_w);
    Tensor out = Tensor::zeros(out_shape);
    const double* px = x.data();
    double* po = out.data();
    for (int64_t l = 0; l < v.lead; ++l)
        for (int y = 0; y < out_h; ++y)
            for (int z = 0; z < out_w; ++z) {
                int sy = std::clamp(static_cast<int>((y + 0.5) * v.h / out_h), 0, v.h - 1);
                int sx = std::clamp(static_cast<int>((z + 0.5) * v.w / out_w), 0, v.w - 1);
                po[(l * out_h + y) * out_w + z] = px[(l * v.h + sy) * v.w + sx];
            }
    return out;
}

namespace {

// Exact fractional box-overlap resampling along one axis.
void area_axis(const double* in, double* out, int64_t rows, int n_in, int n_out,
               int64_t in_stride, int64_t out_stride, int64_t row_stride_in,
               int64_t row_stride_out) {
    const double r = static_cast<double>(n_in) / n_out;
    for (int64_t row = 0; row < rows; ++row)
        for (int i = 0; i < n_out; ++i) {
            double lo = i * r, hi = (i + 1) * r;
            int j0 = static_cast<int>(std::floor(lo));
            int j1 = std::min(n_in - 1, static_cast<int>(std::ceil(hi)) - 1);
            double acc = 0.0;
            for (int j = j0; j <= j1; ++j) {
                double ov = std::min(hi, static_cast<double>(j + 1)) - std::max(lo, static_cast<double>(j));
                if (ov > 0.0) acc += ov * in[row * row_stride_in + j * in_stride];
            }
            out[row * row_stride_out + i * out_stride] = acc / r;
        }
}

}  // namespace

Tensor area_resize(const Tensor& x, int out_h, int out_w) {
    SpatialView v = spatial(x, "area_resize");
    if (out_h == v.h && out_w == v.w) return x.detach_copy();
    Shape out_shape(x.shape().begin(), x.shape().end() - 2);
    out_shape.push_back(out_h);
    out_shape.push_back(out_w);
    Tensor out = Tensor::zeros(out_shape);
    std::vector<double> tmp(static_cast<size_t>(v.h) * out_w);
    const double* px = x.data();
    double* po = out.data();
    for (int64_t l = 0; l < v.lead; ++l) {
        const double* slice = px + l * v.h * v.w;
        // Columns first, then rows.
        area_axis(slice, tmp.data(), v.h, v.w, out_w, 1, 1, v.w, out_w);
        area_axis(tmp.data(), po + static_cast<int64_t>(l) * out_h * out_w, out_w, v.h, out_h,
                  out_w, out_w, 1, 1);
    }
    return out;
}

std::vector<std::pair<double, double>> radial_spectrum(const Tensor& x, int bins) {
    if (bins < 2) throw ShapeError("radial_spectrum: bins must be >= 2");
    SpatialView v = spatial(x, "radial_spectrum");
    const int h = v.h, w = v.w;
    std::vector<double> acc(bins, 0.0);
    std::vector<int64_t> cnt(bins, 0);
    const double mu = std::max(1, h / 2);
    const double mv = std::max(1, w / 2);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const double* px = x.data();
    std::vector<cd> grid;
    for (int64_t l = 0; l < v.lead; ++l) {
        dft2_slice(px + l * h * w, h, w, grid);
        for (int u = 0; u < h; ++u)
            for (int q = 0; q < w; ++q) {
                double fu = signed_freq(u, h) / mu;
                double fv = signed_freq(q, w) / mv;
                double r = std::sqrt(fu * fu + fv * fv) * inv_sqrt2;
                int b = std::min(bins - 1, static_cast<int>(r * bins));
                acc[b] += std::log1p(std::abs(grid[static_cast<size_t>(u) * w + q]));
                cnt[b] += 1;
            }
    }
    std::vector<std::pair<double, double>> curve(bins);
    for (int b = 0; b < bins; ++b) {
        double val = (cnt[b] > 0) ? acc[b] / static_cast<double>(cnt[b]) : 0.0;
        curve[b] = {(b + 0.5) / bins, val};
    }
    double dc = curve[0].second;
    if (dc > 0.0)
        for (auto& p : curve) p.second /= dc;
    return curve;
}

}  // namespace pacfno
