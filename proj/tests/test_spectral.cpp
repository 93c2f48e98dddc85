#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pacfno/rng.hpp"
#include "pacfno/spectral.hpp"
#include "pacfno/tensor.hpp"

using namespace pacfno;

namespace {

Tensor random_image(int c, int h, int w, Rng& rng) {
    Tensor t = Tensor::zeros({c, h, w});
    for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
    return t;
}

double max_abs(const Tensor& a, const Tensor& b) {
    double worst = 0.0;
    for (int64_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    return worst;
}

}  // namespace

TEST_CASE("lowpass at full resolution is the identity") {
    Rng rng(1);
    for (int h : {4, 5})
        for (int w : {6, 7}) {
            Tensor x = random_image(2, h, w, rng);
            HalfSpectrum s = rfft2(x);
            HalfSpectrum lp = lowpass_truncate(s, h, w);
            CHECK(max_abs(lp.values, s.values) == 0.0);
        }
}

TEST_CASE("lowpass keeps a constant image unchanged") {
    Tensor x = Tensor::full({1, 8, 8}, 2.5);
    HalfSpectrum s = rfft2(x);
    HalfSpectrum lp = lowpass_truncate(s, 1, 1);
    Tensor back = irfft2(lp, 8, 8);
    for (int64_t i = 0; i < back.size(); ++i)
        CHECK(back.data()[i] == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("lowpass removes the Nyquist checkerboard") {
    const int n = 4;
    Tensor x = Tensor::zeros({1, n, n});
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) x.data()[r * n + c] = 0.5 + 0.25 * (((r + c) % 2) ? -1.0 : 1.0);
    HalfSpectrum s = rfft2(x);
    Tensor back = irfft2(lowpass_truncate(s, 2, 2), n, n);
    for (int64_t i = 0; i < back.size(); ++i)
        CHECK(back.data()[i] == doctest::Approx(0.5).epsilon(1e-10));  // constant mean survives

    CHECK_THROWS_AS(lowpass_truncate(s, 5, 4), ShapeError);
    CHECK_THROWS_AS(highpass_mask(s, 4, 5), ShapeError);
}

TEST_CASE("lowpass and highpass partition every bin exactly") {
    Rng rng(12);
    Tensor x = random_image(3, 6, 9, rng);
    HalfSpectrum s = rfft2(x);
    for (int hr : {1, 2, 3, 4, 5, 6})
        for (int wr : {1, 2, 5, 9}) {
            HalfSpectrum lo = lowpass_truncate(s, hr, wr);
            HalfSpectrum hi = highpass_mask(s, hr, wr);
            for (int64_t i = 0; i < s.values.size(); ++i) {
                double l = lo.values.data()[i], h = hi.values.data()[i], orig = s.values.data()[i];
                CHECK(l + h == orig);          // bin-exact partition
                CHECK((l == 0.0 || h == 0.0));  // never both
            }
        }
    // Constant image loses everything under the high-pass (DC removed).
    HalfSpectrum hc = highpass_mask(rfft2(Tensor::full({1, 4, 4}, 1.0)), 1, 1);
    for (int64_t i = 0; i < hc.values.size(); ++i) CHECK(hc.values.data()[i] == 0.0);
}

TEST_CASE("lowpass + highpass reconstructions add back to the original") {
    Rng rng(3);
    Tensor x = random_image(3, 8, 8, rng);
    HalfSpectrum s = rfft2(x);
    Tensor lo = irfft2(lowpass_truncate(s, 4, 4), 8, 8);
    Tensor hi = irfft2(highpass_mask(s, 4, 4), 8, 8);
    Tensor sum_img = add(lo, hi);
    CHECK(max_abs(sum_img, x) < 1e-10);
}

TEST_CASE("spectrum_pad preserves constants") {
    Tensor x = Tensor::full({1, 2, 2}, 1.0);
    HalfSpectrum padded = spectrum_pad(rfft2(x), 4, 4);
    CHECK(padded.width == 4);
    Tensor up = irfft2(padded, 4, 4);
    for (int64_t i = 0; i < up.size(); ++i)
        CHECK(up.data()[i] == doctest::Approx(1.0).epsilon(1e-12));

    // No-op when target equals source.
    HalfSpectrum s = rfft2(x);
    HalfSpectrum same = spectrum_pad(s, 2, 2);
    CHECK(same.values.same_storage(s.values));

    CHECK_THROWS_AS(spectrum_pad(s, 1, 2), ShapeError);
}

TEST_CASE("spectrum_pad reproduces the band-limited sinusoid closed form") {
    const int h = 8, w = 8, ht = 16, wt = 16;
    Tensor x = Tensor::zeros({1, h, w});
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) x.data()[r * w + c] = std::cos(2.0 * M_PI * r / h);
    Tensor up = irfft2(spectrum_pad(rfft2(x), ht, wt), ht, wt);
    for (int r = 0; r < ht; ++r)
        for (int c = 0; c < wt; ++c)
            CHECK(std::abs(up.data()[r * wt + c] - std::cos(2.0 * M_PI * r / ht)) < 1e-9);
}

TEST_CASE("spectrum_pad is linear") {
    Rng rng(30);
    Tensor a = random_image(1, 5, 6, rng);
    Tensor b = random_image(1, 5, 6, rng);
    const double ca = 1.3, cb = -0.7;
    HalfSpectrum sa = rfft2(a), sb = rfft2(b);
    Tensor mix = add(mul_scalar(sa.values, ca), mul_scalar(sb.values, cb));
    HalfSpectrum pm = spectrum_pad({mix, 6}, 9, 11);
    Tensor pa = spectrum_pad(sa, 9, 11).values;
    Tensor pb = spectrum_pad(sb, 9, 11).values;
    Tensor expect = add(mul_scalar(pa, ca), mul_scalar(pb, cb));
    CHECK(max_abs(pm.values, expect) < 1e-12);
}

TEST_CASE("identity filter is the identity at every resolution up to the anchor") {
    Rng rng(14);
    SpectralFilter id = SpectralFilter::identity(3, 16, 16);
    for (int h : {4, 5, 8, 16})
        for (int w : {4, 7, 16}) {
            Tensor x = random_image(3, h, w, rng);
            HalfSpectrum s = rfft2(x);
            HalfSpectrum f = apply_filter(s, id);
            CHECK(max_abs(f.values, s.values) == 0.0);
        }
    Tensor big = random_image(3, 17, 16, rng);
    CHECK_THROWS_AS(apply_filter(rfft2(big), id), ShapeError);
}

TEST_CASE("imaginary identity turns the DC real part into zero output") {
    // F = (0+1i) * identity applied to a DC-only real spectrum makes the DC
    // bin purely imaginary; the real inverse transform is then 0.
    SpectralFilter f = SpectralFilter::identity(1, 4, 4);
    for (int64_t i = 0; i < f.weight.size(); i += 2) {
        f.weight.data()[i + 1] = f.weight.data()[i];
        f.weight.data()[i] = 0.0;
    }
    Tensor x = Tensor::full({1, 4, 4}, 1.0);
    HalfSpectrum s = apply_filter(rfft2(x), f);
    CHECK(s.values.data()[0] == doctest::Approx(0.0));
    CHECK(s.values.data()[1] == doctest::Approx(16.0));
    Tensor back = irfft2(s, 4, 4);
    for (int64_t i = 0; i < back.size(); ++i) CHECK(std::abs(back.data()[i]) < 1e-12);
}

TEST_CASE("apply_filter gradients pass the finite-difference oracle") {
    Rng rng(25);
    Tensor x = random_image(3, 4, 4, rng).set_requires_grad(true);
    SpectralFilter f = SpectralFilter::identity(3, 4, 4);
    for (int64_t i = 0; i < f.weight.size(); ++i) f.weight.data()[i] += 0.1 * rng.normal();
    f.weight.set_requires_grad(true);
    auto loss = [&]() {
        HalfSpectrum s = rfft2(x);
        HalfSpectrum y = apply_filter(s, f);
        Tensor img = irfft2(y, 4, 4);
        return sum(mul(img, img));
    };
    CHECK(grad_check(loss, {x, f.weight}, 1e-5) < 1e-5);
}

TEST_CASE("spectrum_pad path gradient") {
    Rng rng(26);
    Tensor x = random_image(3, 4, 6, rng).set_requires_grad(true);
    auto loss = [&]() {
        HalfSpectrum s = rfft2(x);
        HalfSpectrum padded = spectrum_pad(s, 8, 9);
        Tensor img = irfft2(padded, 8, 9);
        return sum(mul(img, img));
    };
    CHECK(grad_check(loss, {x}, 1e-5) < 1e-5);
}

TEST_CASE("bilinear resize basics") {
    Tensor c = Tensor::full({3, 5, 5}, 0.42);
    Tensor up = bilinear_resize(c, 9, 13);
    for (int64_t i = 0; i < up.size(); ++i)
        CHECK(up.data()[i] == doctest::Approx(0.42).epsilon(1e-12));

    Tensor x = Tensor::from_data({1, 2, 2}, {0, 1, 0, 1});
    Tensor same = bilinear_resize(x, 2, 2);
    CHECK(same.same_storage(x));  // bit-exact identity
}

TEST_CASE("bilinear resize half-pixel weights on the 2x4 example") {
    Tensor x = Tensor::from_data({1, 2, 2}, {0, 1, 0, 1});
    Tensor up = bilinear_resize(x, 2, 4);
    const double expect[4] = {0.0, 0.25, 0.75, 1.0};
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 4; ++c)
            CHECK(up.data()[r * 4 + c] == doctest::Approx(expect[c]).epsilon(1e-12));
}

TEST_CASE("bilinear resize gradient") {
    Rng rng(44);
    Tensor x = random_image(3, 4, 4, rng).set_requires_grad(true);
    auto loss = [&]() {
        Tensor y = bilinear_resize(x, 7, 9);
        return sum(mul(y, y));
    };
    CHECK(grad_check(loss, {x}, 1e-5) < 1e-5);
}

TEST_CASE("bicubic constant, identity and overshoot bound") {
    Tensor c = Tensor::full({1, 4, 4}, 0.9);
    Tensor up = bicubic_resize(c, 11, 5);
    for (int64_t i = 0; i < up.size(); ++i)
        CHECK(up.data()[i] == doctest::Approx(0.9).epsilon(1e-12));

    Rng rng(9);
    Tensor x = random_image(1, 6, 6, rng);
    Tensor same = bicubic_resize(x, 6, 6);
    for (int64_t i = 0; i < x.size(); ++i) CHECK(same.data()[i] == x.data()[i]);

    // Linear ramp: Catmull-Rom overshoot stays below half the value range.
    Tensor ramp = Tensor::zeros({1, 1, 8});
    for (int i = 0; i < 8; ++i) ramp.data()[i] = i / 7.0;
    Tensor big = bicubic_resize(ramp, 1, 37);
    for (int64_t i = 0; i < big.size(); ++i) {
        CHECK(big.data()[i] > 0.0 - 0.5);
        CHECK(big.data()[i] < 1.0 + 0.5);
    }
}

TEST_CASE("radial spectrum shapes and ordering") {
    Tensor c = Tensor::full({3, 16, 16}, 0.7);
    auto curve = radial_spectrum(c, 8);
    REQUIRE(curve.size() == 8);
    CHECK(curve[0].second == doctest::Approx(1.0));
    for (size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].second == doctest::Approx(0.0));
    for (auto& [r, v] : curve) {
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
    }

    // White noise is approximately flat; low-passed noise loses high-radius mass.
    Rng rng(123);
    const int bins = 6;
    std::vector<double> noise_acc(bins, 0.0), lp_acc(bins, 0.0);
    const int trials = 40;
    for (int t = 0; t < trials; ++t) {
        Tensor x = random_image(1, 32, 32, rng);
        auto cn = radial_spectrum(x, bins);
        HalfSpectrum s = lowpass_truncate(rfft2(x), 8, 8);
        Tensor xlp = irfft2(s, 32, 32);
        auto cl = radial_spectrum(xlp, bins);
        for (int b = 0; b < bins; ++b) {
            noise_acc[b] += cn[b].second;
            lp_acc[b] += cl[b].second;
        }
    }
    double lo = 1e300, hi = 0.0;
    for (int b = 1; b < bins; ++b) {
        lo = std::min(lo, noise_acc[b]);
        hi = std::max(hi, noise_acc[b]);
    }
    CHECK(hi / lo < 2.0);  // flat within a factor of two
    CHECK(lp_acc[bins - 1] < 0.5 * noise_acc[bins - 1]);
    CHECK_THROWS_AS(radial_spectrum(c, 1), ShapeError);
}
