#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pacfno/nn.hpp"
#include "pacfno/rng.hpp"
#include "pacfno/tensor.hpp"

using namespace pacfno;

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
    Tensor t = Tensor::zeros(shape);
    for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal() * scale;
    return t;
}

}  // namespace

TEST_CASE("elementwise add and mul basics") {
    Tensor a = Tensor::from_data({2}, {1, 2});
    Tensor b = Tensor::from_data({2}, {3, 4});
    Tensor c = add(a, b);
    CHECK(c.data()[0] == 4.0);
    CHECK(c.data()[1] == 6.0);

    Tensor z = mul(a, Tensor::zeros({2}));
    CHECK(z.data()[0] == 0.0);
    CHECK(z.data()[1] == 0.0);

    CHECK_THROWS_AS(add(a, Tensor::zeros({3})), ShapeError);
}

TEST_CASE("broadcast over leading extent and scalar") {
    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor s = Tensor::scalar(10.0);
    Tensor r = add(a, s);
    CHECK(r.data()[3] == 14.0);
    Tensor trailing = Tensor::from_data({2}, {100, 200});
    Tensor r2 = add(a, trailing);
    CHECK(r2.data()[0] == 101.0);
    CHECK(r2.data()[3] == 204.0);
}

TEST_CASE("grad of sum(mul(a,b)) wrt a equals b") {
    Rng rng(7);
    Tensor a = random_tensor({5}, rng).set_requires_grad(true);
    Tensor b = random_tensor({5}, rng);
    auto f = [&]() { return sum(mul(a, b)); };
    double err = grad_check(f, {a}, 1e-6);
    CHECK(err < 1e-8);
    // The analytic gradient itself equals b.
    a.zero_grad();
    Tape tape;
    {
        TapeScope scope(tape);
        backward(f());
    }
    for (int i = 0; i < 5; ++i) CHECK(a.grad()[i] == doctest::Approx(b.data()[i]).epsilon(1e-12));
}

TEST_CASE("backward on sum gives ones; x*x gives 2x") {
    Tensor x = Tensor::from_data({5}, {1, 2, 3, 4, 5}).set_requires_grad(true);
    Tape tape;
    {
        TapeScope scope(tape);
        backward(sum(x));
    }
    for (int i = 0; i < 5; ++i) CHECK(x.grad()[i] == 1.0);

    Tensor y = Tensor::from_data({3}, {1, 2, 3}).set_requires_grad(true);
    Tape tape2;
    {
        TapeScope scope(tape2);
        backward(sum(mul(y, y)));
    }
    CHECK(y.grad()[0] == 2.0);
    CHECK(y.grad()[1] == 4.0);
    CHECK(y.grad()[2] == 6.0);
}

TEST_CASE("backward error paths") {
    Tensor x = Tensor::from_data({2}, {1, 2}).set_requires_grad(true);
    Tape tape;
    {
        TapeScope scope(tape);
        Tensor nonscalar = mul(x, x);
        CHECK_THROWS_AS(backward(nonscalar), ShapeError);
        Tensor loss = sum(mul(x, x));
        backward(loss);
        CHECK_THROWS_AS(backward(loss), ConfigError);  // double backward without reset
        tape.reset();
        Tensor loss2 = sum(mul(x, x));
        backward(loss2);  // fine after reset
    }
    CHECK_THROWS_AS(backward(Tensor::scalar(0.0)), ConfigError);  // no active tape
}

TEST_CASE("linearity of backward") {
    Rng rng(3);
    Tensor x = random_tensor({6}, rng).set_requires_grad(true);
    const double alpha = 1.7, beta = -0.4;

    auto grads_of = [&](const std::function<Tensor()>& f) {
        x.zero_grad();
        Tape tape;
        TapeScope scope(tape);
        backward(f());
        return std::vector<double>(x.grad(), x.grad() + x.size());
    };
    auto g1 = grads_of([&]() { return sum(mul(x, x)); });
    auto g2 = grads_of([&]() { return sum(gelu(x)); });
    auto gc = grads_of([&]() {
        return add(mul_scalar(sum(mul(x, x)), alpha), mul_scalar(sum(gelu(x)), beta));
    });
    for (int i = 0; i < 6; ++i)
        CHECK(std::abs(gc[i] - (alpha * g1[i] + beta * g2[i])) < 1e-12);
}

TEST_CASE("gelu values") {
    Tensor x = Tensor::from_data({3}, {0.0, 1.0, -10.0});
    Tensor y = gelu(x);
    CHECK(y.data()[0] == 0.0);
    CHECK(y.data()[1] == doctest::Approx(0.841345).epsilon(1e-5));
    CHECK(std::abs(y.data()[2]) < 1e-21);  // ~ -7.6e-23, not NaN
    CHECK(std::isfinite(y.data()[2]));
}

TEST_CASE("channel_linear identity and row sum") {
    Rng rng(11);
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    Tensor id = Tensor::zeros({3, 3});
    for (int i = 0; i < 3; ++i) id.data()[i * 3 + i] = 1.0;
    Tensor zero_bias = Tensor::zeros({3});
    Tensor y = channel_linear(x, id, zero_bias);
    for (int64_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);

    Tensor ones_in = Tensor::full({3, 2, 2}, 1.0);
    Tensor w = Tensor::full({1, 3}, 1.0);
    Tensor out = channel_linear(ones_in, w, Tensor::zeros({1}));
    for (int64_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 3.0);

    CHECK_THROWS_AS(channel_linear(x, Tensor::zeros({3, 4}), zero_bias), ShapeError);
}

TEST_CASE("channel_linear gradient vs finite differences") {
    Rng rng(5);
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    Tensor w = random_tensor({2, 3}, rng).set_requires_grad(true);
    Tensor b = random_tensor({2}, rng).set_requires_grad(true);
    auto f = [&]() { return sum(channel_linear(x, w, b)); };
    CHECK(grad_check(f, {w, b}, 1e-5) < 1e-5);
}

TEST_CASE("batch_norm constant input collapses to beta") {
    BnState st = BnState::create(3);
    st.beta.data()[0] = 0.3;
    st.beta.data()[1] = -0.2;
    st.beta.data()[2] = 1.5;
    Tensor x = Tensor::zeros({2, 3, 4, 4});
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c)
            for (int s = 0; s < 16; ++s) x.data()[(n * 3 + c) * 16 + s] = 2.0 + c;
    Tensor y = batch_norm(x, st, true);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c)
            for (int s = 0; s < 16; ++s)
                CHECK(y.data()[(n * 3 + c) * 16 + s] ==
                      doctest::Approx(st.beta.data()[c]).epsilon(1e-12));
}

TEST_CASE("batch_norm normalizes to mean 0 variance 1") {
    Rng rng(21);
    BnState st = BnState::create(3);
    Tensor x = random_tensor({4, 3, 8, 8}, rng, 10.0);  // variance >> eps
    Tensor y = batch_norm(x, st, true);
    const int64_t per = 4 * 64;
    for (int c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        for (int n = 0; n < 4; ++n)
            for (int s = 0; s < 64; ++s) mean += y.data()[(n * 3 + c) * 64 + s];
        mean /= static_cast<double>(per);
        for (int n = 0; n < 4; ++n)
            for (int s = 0; s < 64; ++s) {
                double d = y.data()[(n * 3 + c) * 64 + s] - mean;
                var += d * d;
            }
        var /= static_cast<double>(per);
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(var - 1.0) < 1e-6);
    }
}

TEST_CASE("batch_norm gradient check") {
    Rng rng(9);
    Tensor x = random_tensor({2, 3, 4, 4}, rng).set_requires_grad(true);
    BnState st = BnState::create(3);
    auto f = [&]() {
        BnState local = st;  // running stats drift is irrelevant to the value
        return sum(gelu(batch_norm(x, local, true)));
    };
    CHECK(grad_check(f, {x, st.gamma, st.beta}, 1e-5) < 1e-5);
}

TEST_CASE("batch_norm eval mode is a pure affine map") {
    Rng rng(2);
    BnState st = BnState::create(3);
    st.running_mean = {0.5, -0.1, 0.2};
    st.running_var = {2.0, 1.0, 0.5};
    auto saved_mean = st.running_mean;
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    Tensor y1 = batch_norm(x, st, false);
    Tensor y2 = batch_norm(x, st, false);
    for (int64_t i = 0; i < y1.size(); ++i) CHECK(y1.data()[i] == y2.data()[i]);
    CHECK(st.running_mean == saved_mean);  // idempotent statistics
    CHECK_THROWS_AS(batch_norm(Tensor::zeros({0, 3, 2, 2}), st, true), ShapeError);
}

TEST_CASE("cross_entropy values and gradient") {
    Tensor uniform = Tensor::from_data({1, 2}, {0.0, 0.0});
    CHECK(cross_entropy(uniform, {0}).value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Tensor saturated = Tensor::from_data({1, 2}, {100.0, 0.0});
    double loss = cross_entropy(saturated, {0}).value();
    CHECK(loss >= 0.0);
    CHECK(loss < 1e-40);
    CHECK(std::isfinite(loss));

    CHECK_THROWS_AS(cross_entropy(uniform, {5}), ConfigError);

    Rng rng(13);
    Tensor logits = random_tensor({4, 10}, rng).set_requires_grad(true);
    std::vector<int> labels = {3, 1, 9, 0};
    auto f = [&]() { return cross_entropy(logits, labels); };
    CHECK(grad_check(f, {logits}, 1e-6) < 1e-6);

    // Analytic gradient equals (softmax - onehot)/N.
    logits.zero_grad();
    Tape tape;
    {
        TapeScope scope(tape);
        backward(f());
    }
    for (int i = 0; i < 4; ++i) {
        double mx = -1e300, z = 0.0;
        for (int j = 0; j < 10; ++j) mx = std::max(mx, logits.data()[i * 10 + j]);
        for (int j = 0; j < 10; ++j) z += std::exp(logits.data()[i * 10 + j] - mx);
        for (int j = 0; j < 10; ++j) {
            double sm = std::exp(logits.data()[i * 10 + j] - mx) / z;
            double expect = (sm - (labels[i] == j ? 1.0 : 0.0)) / 4.0;
            CHECK(logits.grad()[i * 10 + j] == doctest::Approx(expect).epsilon(1e-9));
        }
    }
}

TEST_CASE("grad_check self-tests") {
    Rng rng(17);
    Tensor x = random_tensor({6}, rng).set_requires_grad(true);
    CHECK(grad_check([&]() { return sum(x); }, {x}) < 1e-10);

    Tensor img = random_tensor({2, 3, 2, 2}, rng);
    Tensor w = random_tensor({4, 3}, rng).set_requires_grad(true);
    Tensor b = Tensor::zeros({4}).set_requires_grad(true);
    std::vector<int> labels = {1, 2};
    auto f = [&]() {
        Tensor y = channel_linear(img, w, b);
        Tensor pooled = global_avg_pool(y);
        return cross_entropy(pooled, labels);
    };
    CHECK(grad_check(f, {w, b}, 1e-6) < 1e-6);
}

TEST_CASE("adam: zero grad leaves params unchanged") {
    Tensor p = Tensor::from_data({3}, {1.0, 2.0, 3.0}).set_requires_grad(true);
    p.zero_grad();
    std::vector<Tensor> params = {p};
    OptimState st = OptimState::create(params, 0.1);
    adam_step(params, st);
    CHECK(p.data()[0] == 1.0);
    CHECK(p.data()[1] == 2.0);
    CHECK(p.data()[2] == 3.0);
}

TEST_CASE("adam: first step with unit gradient moves by ~lr") {
    Tensor p = Tensor::scalar(5.0).set_requires_grad(true);
    p.grad()[0] = 1.0;
    std::vector<Tensor> params = {p};
    OptimState st = OptimState::create(params, 0.1);
    adam_step(params, st);
    // Bias-corrected m_hat/sqrt(v_hat) = 1 at step 1.
    CHECK(p.data()[0] == doctest::Approx(5.0 - 0.1).epsilon(1e-6));
}

TEST_CASE("adam: identical params stay bit-identical over 100 steps") {
    Tensor a = Tensor::from_data({2}, {0.7, -0.3}).set_requires_grad(true);
    Tensor b = Tensor::from_data({2}, {0.7, -0.3}).set_requires_grad(true);
    std::vector<Tensor> params = {a, b};
    OptimState st = OptimState::create(params, 0.01);
    Rng rng(31);
    for (int step = 0; step < 100; ++step) {
        double g0 = rng.normal(), g1 = rng.normal();
        a.zero_grad();
        b.zero_grad();
        a.grad()[0] = g0;
        a.grad()[1] = g1;
        b.grad()[0] = g0;
        b.grad()[1] = g1;
        adam_step(params, st);
        CHECK(a.data()[0] == b.data()[0]);
        CHECK(a.data()[1] == b.data()[1]);
    }
}

TEST_CASE("deterministic forward given the same seed") {
    auto run = [&]() {
        Rng rng(99);
        Tensor x = random_tensor({2, 3, 4, 4}, rng);
        Tensor w = random_tensor({3, 3}, rng);
        Tensor y = gelu(channel_linear(x, w, Tensor::zeros({3})));
        return std::vector<double>(y.data(), y.data() + y.size());
    };
    CHECK(run() == run());
}

TEST_CASE("finite check surfaces NaN/Inf as NumericError") {
    Tensor huge = Tensor::scalar(1e308);
    CHECK_THROWS_AS(add(huge, huge), NumericError);
    set_finite_checks(false);
    Tensor inf = add(huge, huge);
    CHECK(std::isinf(inf.data()[0]));
    set_finite_checks(true);
}

TEST_CASE("conv3x3 and pooling gradients") {
    Rng rng(23);
    Tensor x = random_tensor({2, 2, 4, 4}, rng).set_requires_grad(true);
    Tensor w = random_tensor({3, 2, 3, 3}, rng).set_requires_grad(true);
    Tensor b = random_tensor({3}, rng).set_requires_grad(true);
    auto f = [&]() { return sum(gelu(avg_pool2(conv3x3(x, w, b)))); };
    CHECK(grad_check(f, {x, w, b}, 1e-5) < 1e-5);
}
