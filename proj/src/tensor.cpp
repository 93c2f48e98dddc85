#include "pacfno/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstring>

#include "pacfno/rng.hpp"

namespace pacfno {

int64_t shape_size(const Shape& s) {
    int64_t n = 1;
    for (int e : s) {
        if (e < 0) throw ShapeError("negative extent");
        n *= e;
    }
    return n;
}

Tensor Tensor::zeros(const Shape& shape) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = shape;
    impl->data.assign(shape_size(shape), 0.0);
    return Tensor(std::move(impl));
}

Tensor Tensor::full(const Shape& shape, double value) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = shape;
    impl->data.assign(shape_size(shape), value);
    return Tensor(std::move(impl));
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data) {
    if (shape_size(shape) != static_cast<int64_t>(data.size()))
        throw ShapeError("data length does not match shape");
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = shape;
    impl->data = std::move(data);
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

double Tensor::value() const {
    if (size() != 1) throw ShapeError("value() requires a scalar tensor");
    return impl_->data[0];
}

Tensor Tensor::detach_copy() const {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    return Tensor(std::move(impl));
}

namespace {
thread_local Tape* tl_tape = nullptr;
std::atomic<bool> g_finite_checks{true};
}  // namespace

Tape* Tape::current() { return tl_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(tl_tape) { tl_tape = &tape; }
TapeScope::~TapeScope() { tl_tape = previous_; }

void Tape::backward_from(const Tensor& loss) {
    if (used_) throw ConfigError("backward called twice without tape reset");
    if (loss.size() != 1) throw ShapeError("backward requires a scalar loss");
    if (!loss.requires_grad())
        throw ConfigError("loss was not recorded on this tape");
    used_ = true;
    loss.impl_->ensure_grad();
    loss.impl_->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

bool taping(std::initializer_list<const Tensor*> inputs) {
    if (tl_tape == nullptr) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

void backward(const Tensor& loss) {
    if (tl_tape == nullptr) throw ConfigError("no active tape");
    tl_tape->backward_from(loss);
}

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks_enabled() { return g_finite_checks.load(); }

void check_finite(const Tensor& t, const char* where) {
    if (!g_finite_checks.load()) return;
    const double* p = t.data();
    for (int64_t i = 0; i < t.size(); ++i)
        if (!std::isfinite(p[i]))
            throw NumericError(std::string("non-finite value in ") + where);
}

namespace {

void accumulate(TensorImpl* t, int64_t index, double v) {
    t->ensure_grad();
    t->grad[index] += v;
}

enum class Broadcast { kNone, kScalar, kTrailing };

Broadcast classify(const Shape& a, const Shape& b) {
    if (a == b) return Broadcast::kNone;
    if (shape_size(b) == 1) return Broadcast::kScalar;
    if (b.size() < a.size()) {
        size_t off = a.size() - b.size();
        bool match = true;
        for (size_t i = 0; i < b.size(); ++i)
            if (a[off + i] != b[i]) match = false;
        if (match) return Broadcast::kTrailing;
    }
    throw ShapeError("ew_binary: shapes are not broadcast-compatible");
}

}  // namespace

Tensor ew_binary(const Tensor& a, const Tensor& b, EwOp op) {
    Broadcast bc = classify(a.shape(), b.shape());
    const int64_t n = a.size();
    const int64_t bn = b.size();
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int64_t i = 0; i < n; ++i) {
        double bv = (bc == Broadcast::kScalar) ? pb[0]
                    : (bc == Broadcast::kTrailing) ? pb[i % bn]
                                                   : pb[i];
        switch (op) {
            case EwOp::kAdd: po[i] = pa[i] + bv; break;
            case EwOp::kSub: po[i] = pa[i] - bv; break;
            case EwOp::kMul: po[i] = pa[i] * bv; break;
        }
    }
    if (taping({&a, &b})) {
        out.set_requires_grad(true);
        auto ai = a.impl_;
        auto bi = b.impl_;
        auto oi = out.impl_;
        Tape::current()->record([ai, bi, oi, op, bc, n, bn]() {
            const double* g = oi->grad.data();
            if (oi->grad.empty()) return;
            for (int64_t i = 0; i < n; ++i) {
                int64_t j = (bc == Broadcast::kScalar) ? 0
                            : (bc == Broadcast::kTrailing) ? (i % bn)
                                                           : i;
                double bv = bi->data[j];
                if (ai->requires_grad) {
                    double da = (op == EwOp::kMul) ? g[i] * bv : g[i];
                    accumulate(ai.get(), i, da);
                }
                if (bi->requires_grad) {
                    double db = 0.0;
                    switch (op) {
                        case EwOp::kAdd: db = g[i]; break;
                        case EwOp::kSub: db = -g[i]; break;
                        case EwOp::kMul: db = g[i] * ai->data[i]; break;
                    }
                    accumulate(bi.get(), j, db);
                }
            }
        });
    }
    check_finite(out, "ew_binary");
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return ew_binary(a, b, EwOp::kAdd); }
Tensor sub(const Tensor& a, const Tensor& b) { return ew_binary(a, b, EwOp::kSub); }
Tensor mul(const Tensor& a, const Tensor& b) { return ew_binary(a, b, EwOp::kMul); }

Tensor mul_scalar(const Tensor& a, double s) {
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    for (int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] * s;
    if (taping({&a})) {
        out.set_requires_grad(true);
        auto ai = a.impl_;
        auto oi = out.impl_;
        Tape::current()->record([ai, oi, s]() {
            if (oi->grad.empty() || !ai->requires_grad) return;
            for (size_t i = 0; i < oi->grad.size(); ++i)
                accumulate(ai.get(), static_cast<int64_t>(i), oi->grad[i] * s);
        });
    }
    check_finite(out, "mul_scalar");
    return out;
}

Tensor add_scalar(const Tensor& a, double s) {
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    for (int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] + s;
    if (taping({&a})) {
        out.set_requires_grad(true);
        auto ai = a.impl_;
        auto oi = out.impl_;
        Tape::current()->record([ai, oi]() {
            if (oi->grad.empty() || !ai->requires_grad) return;
            for (size_t i = 0; i < oi->grad.size(); ++i)
                accumulate(ai.get(), static_cast<int64_t>(i), oi->grad[i]);
        });
    }
    check_finite(out, "add_scalar");
    return out;
}

Tensor sum(const Tensor& a) {
    double total = 0.0;
    const double* pa = a.data();
    for (int64_t i = 0; i < a.size(); ++i) total += pa[i];
    Tensor out = Tensor::scalar(total);
    if (taping({&a})) {
        out.set_requires_grad(true);
        auto ai = a.impl_;
        auto oi = out.impl_;
        Tape::current()->record([ai, oi]() {
            if (oi->grad.empty() || !ai->requires_grad) return;
            double g = oi->grad[0];
            for (size_t i = 0; i < ai->data.size(); ++i)
                accumulate(ai.get(), static_cast<int64_t>(i), g);
        });
    }
    check_finite(out, "sum");
    return out;
}

Tensor reshape(const Tensor& a, const Shape& shape) {
    if (shape_size(shape) != a.size()) throw ShapeError("reshape: size mismatch");
    Tensor out = Tensor::from_data(shape, std::vector<double>(a.data(), a.data() + a.size()));
    if (taping({&a})) {
        out.set_requires_grad(true);
        auto ai = a.impl_;
        auto oi = out.impl_;
        Tape::current()->record([ai, oi]() {
            if (oi->grad.empty() || !ai->requires_grad) return;
            for (size_t i = 0; i < oi->grad.size(); ++i)
                accumulate(ai.get(), static_cast<int64_t>(i), oi->grad[i]);
        });
    }
    return out;
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels: empty input");
    const Shape& s0 = parts[0].shape();
    if (s0.size() < 2) throw ShapeError("concat_channels: rank must be >= 2");
    int batch = s0[0];
    int64_t inner = 1;
    for (size_t i = 2; i < s0.size(); ++i) inner *= s0[i];
    int total_c = 0;
    for (const Tensor& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != s0.size() || s[0] != batch)
            throw ShapeError("concat_channels: incompatible shapes");
        for (size_t i = 2; i < s.size(); ++i)
            if (s[i] != s0[i]) throw ShapeError("concat_channels: incompatible shapes");
        total_c += s[1];
    }
    Shape out_shape = s0;
    out_shape[1] = total_c;
    Tensor out = Tensor::zeros(out_shape);
    double* po = out.data();
    int c_off = 0;
    for (const Tensor& p : parts) {
        int c = p.extent(1);
        const double* pp = p.data();
        for (int n = 0; n < batch; ++n)
            std::memcpy(po + (static_cast<int64_t>(n) * total_c + c_off) * inner,
                        pp + static_cast<int64_t>(n) * c * inner,
                        sizeof(double) * c * inner);
        c_off += c;
    }
    bool any_rg = false;
    for (const Tensor& p : parts)
        if (p.requires_grad()) any_rg = true;
    if (Tape::current() != nullptr && any_rg) {
        out.set_requires_grad(true);
        std::vector<std::shared_ptr<TensorImpl>> impls;
        impls.reserve(parts.size());
        for (const Tensor& p : parts) impls.push_back(p.impl_);
        auto oi = out.impl_;
        Tape::current()->record([impls, oi, batch, inner, total_c]() {
            if (oi->grad.empty()) return;
            const double* g = oi->grad.data();
            int c_off = 0;
            for (auto& pi : impls) {
                int c = pi->shape[1];
                if (pi->requires_grad) {
                    pi->ensure_grad();
                    for (int n = 0; n < batch; ++n) {
                        const double* gs = g + (static_cast<int64_t>(n) * total_c + c_off) * inner;
                        double* gd = pi->grad.data() + static_cast<int64_t>(n) * c * inner;
                        for (int64_t i = 0; i < c * inner; ++i) gd[i] += gs[i];
                    }
                }
                c_off += c;
            }
        });
    }
    return out;
}

OptimState OptimState::create(const std::vector<Tensor>& params, double lr) {
    OptimState st;
    st.lr = lr;
    st.m.resize(params.size());
    st.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        st.m[i].assign(params[i].size(), 0.0);
        st.v[i].assign(params[i].size(), 0.0);
    }
    return st;
}

void adam_step(std::vector<Tensor>& params, OptimState& state) {
    if (state.m.size() != params.size())
        throw ShapeError("adam_step: state does not match parameter list");
    if (state.lr <= 0.0) throw ConfigError("adam_step: lr must be positive");
    state.step += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t p = 0; p < params.size(); ++p) {
        Tensor& t = params[p];
        if (state.m[p].size() != static_cast<size_t>(t.size()))
            throw ShapeError("adam_step: moment buffer shape mismatch");
        if (!t.has_grad()) continue;  // no gradient reached this parameter
        double* w = t.data();
        const double* g = t.grad();
        double* m = state.m[p].data();
        double* v = state.v[p].data();
        for (int64_t i = 0; i < t.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            double mh = m[i] / bc1;
            double vh = v[i] / bc2;
            w[i] -= state.lr * mh / (std::sqrt(vh) + state.eps);
        }
    }
}

double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                  double h, int samples, uint64_t seed) {
    // Analytic pass.
    std::vector<std::vector<double>> analytic(params.size());
    {
        for (Tensor& p : params) p.zero_grad();
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = f();
        tape.backward_from(loss);
        for (size_t i = 0; i < params.size(); ++i) {
            if (params[i].has_grad())
                analytic[i].assign(params[i].grad(), params[i].grad() + params[i].size());
            else
                analytic[i].assign(params[i].size(), 0.0);
        }
    }
    // Central differences on sampled coordinates, no tape.
    Rng rng(seed);
    double max_rel = 0.0;
    for (size_t p = 0; p < params.size(); ++p) {
        Tensor& t = params[p];
        int64_t n = t.size();
        std::vector<int64_t> coords;
        if (n <= samples) {
            coords.resize(n);
            for (int64_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            for (int s = 0; s < samples; ++s)
                coords.push_back(static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(n)));
        }
        for (int64_t c : coords) {
            double saved = t.data()[c];
            t.data()[c] = saved + h;
            double lp = f().value();
            t.data()[c] = saved - h;
            double lm = f().value();
            t.data()[c] = saved;
            double fd = (lp - lm) / (2.0 * h);
            double an = analytic[p][c];
            double rel = std::abs(an - fd) / std::max(1.0, std::abs(an));
            if (rel > max_rel) max_rel = rel;
        }
    }
    return max_rel;
}

}  // namespace pacfno
