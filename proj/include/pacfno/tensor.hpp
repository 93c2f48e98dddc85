#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "pacfno/errors.hpp"

namespace pacfno {

using Shape = std::vector<int>;

int64_t shape_size(const Shape& s);

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // empty until first accumulation

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
    }
};

// Dense 64-bit real tensor, row-major. Canonical image layout is
// channels x height x width; batches prepend a leading extent.
// Copies are shallow handles onto shared storage.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape);
    static Tensor full(const Shape& shape, double value);
    static Tensor from_data(const Shape& shape, std::vector<double> data);
    static Tensor scalar(double value);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    int extent(int axis) const { return impl_->shape[axis]; }
    int64_t size() const { return static_cast<int64_t>(impl_->data.size()); }

    double* data() { return impl_->data.data(); }
    const double* data() const { return impl_->data.data(); }
    double value() const;  // scalar tensors only

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool rg) {
        impl_->requires_grad = rg;
        return *this;
    }

    bool has_grad() const { return !impl_->grad.empty(); }
    double* grad() {
        impl_->ensure_grad();
        return impl_->grad.data();
    }
    const double* grad() const { return impl_->grad.data(); }
    void zero_grad() {
        if (!impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
    }

    // Deep copy of the values; no grad, no tape linkage.
    Tensor detach_copy() const;

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

    std::shared_ptr<TensorImpl> impl_;

private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
};

// Reverse-mode tape. Operations append backward closures in execution
// order; backward replays them exactly once in reverse.
class Tape {
public:
    void record(std::function<void()> step) { nodes_.push_back(std::move(step)); }
    void backward_from(const Tensor& loss);
    void reset() {
        nodes_.clear();
        used_ = false;
    }
    size_t node_count() const { return nodes_.size(); }
    bool used() const { return used_; }

    static Tape* current();

private:
    friend struct TapeScope;
    std::vector<std::function<void()>> nodes_;
    bool used_ = false;
};

// RAII activation of a tape on the current thread.
struct TapeScope {
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

// True when a tape is active and any input wants gradients.
bool taping(std::initializer_list<const Tensor*> inputs);

// Runs backward on the currently active tape.
void backward(const Tensor& loss);

// Debug guard: every op output is scanned for NaN/Inf while enabled (default on).
void set_finite_checks(bool enabled);
bool finite_checks_enabled();
void check_finite(const Tensor& t, const char* where);

enum class EwOp { kAdd, kSub, kMul };

// Elementwise binary op. Shapes must match, or b must be a scalar, or b's
// shape must equal a trailing suffix of a's shape (broadcast over leading
// extents).
Tensor ew_binary(const Tensor& a, const Tensor& b, EwOp op);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor mul_scalar(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor sum(const Tensor& a);                       // -> scalar
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor concat_channels(const std::vector<Tensor>& parts);  // along axis 1 of [N,C,...]

// Adam optimizer state over an ordered parameter list.
struct OptimState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    static OptimState create(const std::vector<Tensor>& params, double lr);
};

// Standard Adam update with bias correction, reading params[i].grad().
void adam_step(std::vector<Tensor>& params, OptimState& state);

// Max over sampled coordinates of |analytic - central difference| / max(1, |analytic|).
// Samples at most `samples` coordinates per parameter with a fixed seed.
double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                  double h = 1e-5, int samples = 64, uint64_t seed = 12345);

}  // namespace pacfno
