#include "pacfno/nn.hpp"

#include <cmath>

namespace pacfno {

namespace {

// Collapses [N,C,H,W] / [C,H,W] to (batch, channels, spatial).
struct NchwView {
    int n, c;
    int64_t hw;
    bool batched;
};

NchwView nchw(const Tensor& x, const char* who) {
    const Shape& s = x.shape();
    if (s.size() == 4) return {s[0], s[1], static_cast<int64_t>(s[2]) * s[3], true};
    if (s.size() == 3) return {1, s[0], static_cast<int64_t>(s[1]) * s[2], false};
    throw ShapeError(std::string(who) + ": expected rank 3 or 4 input");
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Tensor channel_linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    NchwView v = nchw(x, "channel_linear");
    if (weight.rank() != 2) throw ShapeError("channel_linear: weight must be [Co,Ci]");
    int co = weight.extent(0), ci = weight.extent(1);
    if (ci != v.c) throw ShapeError("channel_linear: channel mismatch");
    if (bias.size() != co) throw ShapeError("channel_linear: bias mismatch");

    Shape out_shape = x.shape();
    out_shape[v.batched ? 1 : 0] = co;
    Tensor out = Tensor::zeros(out_shape);
    const double* px = x.data();
    const double* pw = weight.data();
    const double* pb = bias.data();
    double* po = out.data();
    for (int n = 0; n < v.n; ++n) {
        const double* xn = px + static_cast<int64_t>(n) * v.c * v.hw;
        double* on = po + static_cast<int64_t>(n) * co * v.hw;
        for (int o = 0; o < co; ++o) {
            double* orow = on + static_cast<int64_t>(o) * v.hw;
            for (int64_t s = 0; s < v.hw; ++s) orow[s] = pb[o];
            for (int i = 0; i < ci; ++i) {
                double w = pw[o * ci + i];
                if (w == 0.0) continue;
                const double* xrow = xn + static_cast<int64_t>(i) * v.hw;
                for (int64_t s = 0; s < v.hw; ++s) orow[s] += w * xrow[s];
            }
        }
    }
    if (taping({&x, &weight, &bias})) {
        out.set_requires_grad(true);
        auto xi = x.impl_;
        auto wi = weight.impl_;
        auto bi = bias.impl_;
        auto oi = out.impl_;
        Tape::current()->record([xi, wi, bi, oi, v, co, ci]() {
            if (oi->grad.empty()) return;
            const double* g = oi->grad.data();
            if (xi->requires_grad) xi->ensure_grad();
            if (wi->requires_grad) wi->ensure_grad();
            if (bi->requires_grad) bi->ensure_grad();
            for (int n = 0; n < v.n; ++n) {
                const double* gn = g + static_cast<int64_t>(n) * co * v.hw;
                const double* xn = xi->data.data() + static_cast<int64_t>(n) * v.c * v.hw;
                for (int o = 0; o < co; ++o) {
                    const double* grow = gn + static_cast<int64_t>(o) * v.hw;
                    if (bi->requires_grad) {
                        double acc = 0.0;
                        for (int64_t s = 0; s < v.hw; ++s) acc += grow[s];
                        bi->grad[o] += acc;
                    }
                    for (int i = 0; i < ci; ++i) {
                        const double* xrow = xn + static_cast<int64_t>(i) * v.hw;
                        if (wi->requires_grad) {
                            double acc = 0.0;
                            for (int64_t s = 0; s < v.hw; ++s) acc += grow[s] * xrow[s];
                            wi->grad[o * ci + i] += acc;
                        }
                        if (xi->requires_grad) {
                            double w = wi->data[o * ci + i];
                            if (w == 0.0) continue;
                            double* gx = xi->grad.data() + (static_cast<int64_t>(n) * v.c + i) * v.hw;
                            for (int64_t s = 0; s < v.hw; ++s) gx[s] += w * grow[s];
                        }
                    }
                }
            }
        });
    }
    check_finite(out, "channel_linear");
    return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.rank() != 2) throw ShapeError("linear: expected [N,F]");
    Tensor x4 = reshape(x, {x.extent(0), x.extent(1), 1, 1});
    Tensor y = channel_linear(x4, weight, bias);
    return reshape(y, {x.extent(0), weight.extent(0)});
}

Tensor gelu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const double* px = x.data();
    double* po = out.data();
    for (int64_t i = 0; i < x.size(); ++i) {
        double v = px[i];
        po[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    }
    if (taping({&x})) {
        out.set_requires_grad(true);
        auto xi = x.impl_;
        auto oi = out.impl_;
        Tape::current()->record([xi, oi]() {
            if (oi->grad.empty() || !xi->requires_grad) return;
            xi->ensure_grad();
            for (size_t i = 0; i < oi->grad.size(); ++i) {
                double v = xi->data[i];
                double phi = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
                xi->grad[i] += oi->grad[i] * (phi + v * pdf);
            }
        });
    }
    check_finite(out, "gelu");
    return out;
}

BnState BnState::create(int channels) {
    BnState st;
    st.gamma = Tensor::full({channels}, 1.0).set_requires_grad(true);
    st.beta = Tensor::zeros({channels}).set_requires_grad(true);
    st.running_mean.assign(channels, 0.0);
    st.running_var.assign(channels, 1.0);
    return st;
}

BnState BnState::neutral(int channels) {
    BnState st = create(channels);
    st.gamma.set_requires_grad(false);
    st.beta.set_requires_grad(false);
    for (int c = 0; c < channels; ++c) st.running_var[c] = 1.0 - st.eps;
    return st;
}

Tensor batch_norm(const Tensor& x, BnState& state, bool training) {
    NchwView v = nchw(x, "batch_norm");
    if (v.n < 1) throw ShapeError("batch_norm: empty batch");
    int c = v.c;
    if (c != state.channels()) throw ShapeError("batch_norm: channel mismatch");
    int64_t count = static_cast<int64_t>(v.n) * v.hw;
    if (training && count < 2) throw ShapeError("batch_norm: training needs N*H*W >= 2");

    std::vector<double> mean(c, 0.0), var(c, 0.0);
    const double* px = x.data();
    if (training) {
        for (int ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            for (int n = 0; n < v.n; ++n) {
                const double* row = px + (static_cast<int64_t>(n) * c + ch) * v.hw;
                for (int64_t s = 0; s < v.hw; ++s) acc += row[s];
            }
            mean[ch] = acc / static_cast<double>(count);
            double acc2 = 0.0;
            for (int n = 0; n < v.n; ++n) {
                const double* row = px + (static_cast<int64_t>(n) * c + ch) * v.hw;
                for (int64_t s = 0; s < v.hw; ++s) {
                    double d = row[s] - mean[ch];
                    acc2 += d * d;
                }
            }
            var[ch] = acc2 / static_cast<double>(count);  // biased, used for normalization
        }
        // Running update uses the unbiased variance.
        double unbias = (count > 1) ? static_cast<double>(count) / (count - 1) : 1.0;
        for (int ch = 0; ch < c; ++ch) {
            state.running_mean[ch] =
                (1.0 - state.momentum) * state.running_mean[ch] + state.momentum * mean[ch];
            state.running_var[ch] =
                (1.0 - state.momentum) * state.running_var[ch] + state.momentum * var[ch] * unbias;
        }
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }

    std::vector<double> inv_std(c);
    for (int ch = 0; ch < c; ++ch) inv_std[ch] = 1.0 / std::sqrt(var[ch] + state.eps);

    Tensor out = Tensor::zeros(x.shape());
    double* po = out.data();
    const double* pg = state.gamma.data();
    const double* pb = state.beta.data();
    for (int n = 0; n < v.n; ++n)
        for (int ch = 0; ch < c; ++ch) {
            const double* row = px + (static_cast<int64_t>(n) * c + ch) * v.hw;
            double* orow = po + (static_cast<int64_t>(n) * c + ch) * v.hw;
            double m = mean[ch], is = inv_std[ch], g = pg[ch], b = pb[ch];
            for (int64_t s = 0; s < v.hw; ++s) orow[s] = g * (row[s] - m) * is + b;
        }

    if (taping({&x, &state.gamma, &state.beta})) {
        out.set_requires_grad(true);
        auto xi = x.impl_;
        auto gi = state.gamma.impl_;
        auto bi = state.beta.impl_;
        auto oi = out.impl_;
        Tape::current()->record([xi, gi, bi, oi, v, c, count, mean, inv_std, training]() {
            if (oi->grad.empty()) return;
            const double* g = oi->grad.data();
            if (gi->requires_grad) gi->ensure_grad();
            if (bi->requires_grad) bi->ensure_grad();
            if (xi->requires_grad) xi->ensure_grad();
            for (int ch = 0; ch < c; ++ch) {
                double m = mean[ch], is = inv_std[ch];
                double sum_g = 0.0, sum_gx = 0.0;
                for (int n = 0; n < v.n; ++n) {
                    const double* grow = g + (static_cast<int64_t>(n) * c + ch) * v.hw;
                    const double* xrow = xi->data.data() + (static_cast<int64_t>(n) * c + ch) * v.hw;
                    for (int64_t s = 0; s < v.hw; ++s) {
                        sum_g += grow[s];
                        sum_gx += grow[s] * (xrow[s] - m) * is;
                    }
                }
                if (gi->requires_grad) gi->grad[ch] += sum_gx;
                if (bi->requires_grad) bi->grad[ch] += sum_g;
                if (xi->requires_grad) {
                    double gamma = gi->data[ch];
                    double inv_n = 1.0 / static_cast<double>(count);
                    for (int n = 0; n < v.n; ++n) {
                        const double* grow = g + (static_cast<int64_t>(n) * c + ch) * v.hw;
                        const double* xrow =
                            xi->data.data() + (static_cast<int64_t>(n) * c + ch) * v.hw;
                        double* gx = xi->grad.data() + (static_cast<int64_t>(n) * c + ch) * v.hw;
                        for (int64_t s = 0; s < v.hw; ++s) {
                            double xhat = (xrow[s] - m) * is;
                            if (training)
                                gx[s] += gamma * is *
                                         (grow[s] - inv_n * sum_g - xhat * inv_n * sum_gx);
                            else
                                gx[s] += gamma * is * grow[s];
                        }
                    }
                }
            }
        });
    }
    check_finite(out, "batch_norm");
    return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) throw ShapeError("cross_entropy: expected [N,K] logits");
    int n = logits.extent(0), k = logits.extent(1);
    if (n < 1) throw ShapeError("cross_entropy: empty batch");
    if (static_cast<int>(labels.size()) != n)
        throw ShapeError("cross_entropy: label count mismatch");
    for (int label : labels)
        if (label < 0 || label >= k) throw ConfigError("cross_entropy: label out of range");

    const double* pl = logits.data();
    std::vector<double> softmax(static_cast<size_t>(n) * k);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* row = pl + static_cast<int64_t>(i) * k;
        double mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < k; ++j) {
            double e = std::exp(row[j] - mx);
            softmax[static_cast<size_t>(i) * k + j] = e;
            z += e;
        }
        for (int j = 0; j < k; ++j) softmax[static_cast<size_t>(i) * k + j] /= z;
        total += -(row[labels[i]] - mx - std::log(z));
    }
    Tensor out = Tensor::scalar(total / n);
    if (taping({&logits})) {
        out.set_requires_grad(true);
        auto li = logits.impl_;
        auto oi = out.impl_;
        Tape::current()->record([li, oi, softmax, labels, n, k]() {
            if (oi->grad.empty() || !li->requires_grad) return;
            li->ensure_grad();
            double g = oi->grad[0] / n;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < k; ++j) {
                    double sm = softmax[static_cast<size_t>(i) * k + j];
                    double onehot = (j == labels[i]) ? 1.0 : 0.0;
                    li->grad[static_cast<size_t>(i) * k + j] += g * (sm - onehot);
                }
        });
    }
    check_finite(out, "cross_entropy");
    return out;
}

Tensor conv3x3(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.rank() != 4) throw ShapeError("conv3x3: expected [N,C,H,W]");
    if (weight.rank() != 4 || weight.extent(2) != 3 || weight.extent(3) != 3)
        throw ShapeError("conv3x3: weight must be [Co,Ci,3,3]");
    int n = x.extent(0), ci = x.extent(1), h = x.extent(2), w = x.extent(3);
    int co = weight.extent(0);
    if (weight.extent(1) != ci) throw ShapeError("conv3x3: channel mismatch");
    if (bias.size() != co) throw ShapeError("conv3x3: bias mismatch");

    Tensor out = Tensor::zeros({n, co, h, w});
    const double* px = x.data();
    const double* pw = weight.data();
    const double* pb = bias.data();
    double* po = out.data();
    auto xat = [&](int b, int c, int y, int z) -> double {
        if (y < 0 || y >= h || z < 0 || z >= w) return 0.0;
        return px[((static_cast<int64_t>(b) * ci + c) * h + y) * w + z];
    };
    for (int b = 0; b < n; ++b)
        for (int o = 0; o < co; ++o)
            for (int y = 0; y < h; ++y)
                for (int z = 0; z < w; ++z) {
                    double acc = pb[o];
                    for (int c = 0; c < ci; ++c)
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kz = 0; kz < 3; ++kz)
                                acc += pw[((static_cast<int64_t>(o) * ci + c) * 3 + ky) * 3 + kz] *
                                       xat(b, c, y + ky - 1, z + kz - 1);
                    po[((static_cast<int64_t>(b) * co + o) * h + y) * w + z] = acc;
                }
    if (taping({&x, &weight, &bias})) {
        out.set_requires_grad(true);
        auto xi = x.impl_;
        auto wi = weight.impl_;
        auto bi = bias.impl_;
        auto oi = out.impl_;
        Tape::current()->record([xi, wi, bi, oi, n, ci, co, h, w]() {
            if (oi->grad.empty()) return;
            const double* g = oi->grad.data();
            if (xi->requires_grad) xi->ensure_grad();
            if (wi->requires_grad) wi->ensure_grad();
            if (bi->requires_grad) bi->ensure_grad();
            const double* px = xi->data.data();
            const double* pw = wi->data.data();
            for (int b = 0; b < n; ++b)
                for (int o = 0; o < co; ++o)
                    for (int y = 0; y < h; ++y)
                        for (int z = 0; z < w; ++z) {
                            double go = g[((static_cast<int64_t>(b) * co + o) * h + y) * w + z];
                            if (go == 0.0) continue;
                            if (bi->requires_grad) bi->grad[o] += go;
                            for (int c = 0; c < ci; ++c)
                                for (int ky = 0; ky < 3; ++ky) {
                                    int yy = y + ky - 1;
                                    if (yy < 0 || yy >= h) continue;
                                    for (int kz = 0; kz < 3; ++kz) {
                                        int zz = z + kz - 1;
                                        if (zz < 0 || zz >= w) continue;
                                        int64_t xidx =
                                            ((static_cast<int64_t>(b) * ci + c) * h + yy) * w + zz;
                                        int64_t widx =
                                            ((static_cast<int64_t>(o) * ci + c) * 3 + ky) * 3 + kz;
                                        if (wi->requires_grad) wi->grad[widx] += go * px[xidx];
                                        if (xi->requires_grad) xi->grad[xidx] += go * pw[widx];
                                    }
                                }
                        }
        });
    }
    check_finite(out, "conv3x3");
    return out;
}

Tensor avg_pool2(const Tensor& x) {
    if (x.rank() != 4) throw ShapeError("avg_pool2: expected [N,C,H,W]");
    int n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
    if (h % 2 != 0 || w % 2 != 0) throw ShapeError("avg_pool2: extents must be even");
    int oh = h / 2, ow = w / 2;
    Tensor out = Tensor::zeros({n, c, oh, ow});
    const double* px = x.data();
    double* po = out.data();
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < oh; ++y)
                for (int z = 0; z < ow; ++z) {
                    const double* base =
                        px + ((static_cast<int64_t>(b) * c + ch) * h + 2 * y) * w + 2 * z;
                    po[((static_cast<int64_t>(b) * c + ch) * oh + y) * ow + z] =
                        0.25 * (base[0] + base[1] + base[w] + base[w + 1]);
                }
    if (taping({&x})) {
        out.set_requires_grad(true);
        auto xi = x.impl_;
        auto oi = out.impl_;
        Tape::current()->record([xi, oi, n, c, h, w, oh, ow]() {
            if (oi->grad.empty() || !xi->requires_grad) return;
            xi->ensure_grad();
            const double* g = oi->grad.data();
            for (int b = 0; b < n; ++b)
                for (int ch = 0; ch < c; ++ch)
                    for (int y = 0; y < oh; ++y)
                        for (int z = 0; z < ow; ++z) {
                            double gv =
                                0.25 * g[((static_cast<int64_t>(b) * c + ch) * oh + y) * ow + z];
                            double* base = xi->grad.data() +
                                           ((static_cast<int64_t>(b) * c + ch) * h + 2 * y) * w +
                                           2 * z;
                            base[0] += gv;
                            base[1] += gv;
                            base[w] += gv;
                            base[w + 1] += gv;
                        }
        });
    }
    check_finite(out, "avg_pool2");
    return out;
}

Tensor global_avg_pool(const Tensor& x) {
    if (x.rank() != 4) throw ShapeError("global_avg_pool: expected [N,C,H,W]");
    int n = x.extent(0), c = x.extent(1);
    int64_t hw = static_cast<int64_t>(x.extent(2)) * x.extent(3);
    Tensor out = Tensor::zeros({n, c});
    const double* px = x.data();
    double* po = out.data();
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            const double* row = px + (static_cast<int64_t>(b) * c + ch) * hw;
            double acc = 0.0;
            for (int64_t s = 0; s < hw; ++s) acc += row[s];
            po[b * c + ch] = acc / static_cast<double>(hw);
        }
    if (taping({&x})) {
        out.set_requires_grad(true);
        auto xi = x.impl_;
        auto oi = out.impl_;
        Tape::current()->record([xi, oi, n, c, hw]() {
            if (oi->grad.empty() || !xi->requires_grad) return;
            xi->ensure_grad();
            for (int b = 0; b < n; ++b)
                for (int ch = 0; ch < c; ++ch) {
                    double gv = oi->grad[b * c + ch] / static_cast<double>(hw);
                    double* row = xi->grad.data() + (static_cast<int64_t>(b) * c + ch) * hw;
                    for (int64_t s = 0; s < hw; ++s) row[s] += gv;
                }
        });
    }
    check_finite(out, "global_avg_pool");
    return out;
}

}  // namespace pacfno
