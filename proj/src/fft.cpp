#include "pacfno/fft.hpp"

#include <cmath>
#include <cstdint>

namespace pacfno::fft {

namespace {

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Iterative radix-2 Cooley-Tukey, n a power of two.
void fft_pow2(std::vector<cd>& a, bool inverse) {
    const size_t n = a.size();
    if (n <= 1) return;
    // Bit-reversal permutation.
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const double sign = inverse ? 1.0 : -1.0;
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * M_PI / static_cast<double>(len);
        for (size_t i = 0; i < n; i += len)
            for (size_t j = 0; j < len / 2; ++j) {
                cd w = std::polar(1.0, ang * static_cast<double>(j));
                cd u = a[i + j];
                cd v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
            }
    }
}

// Bluestein chirp-z: arbitrary n via a power-of-two circular convolution.
void fft_bluestein(std::vector<cd>& a, bool inverse) {
    const size_t n = a.size();
    const double sign = inverse ? 1.0 : -1.0;
    // chirp[k] = exp(sign * i * pi * k^2 / n); k^2 taken mod 2n keeps the
    // angle argument small for large k.
    std::vector<cd> chirp(n);
    for (size_t k = 0; k < n; ++k) {
        uint64_t k2 = (static_cast<uint64_t>(k) * k) % (2 * n);
        chirp[k] = std::polar(1.0, sign * M_PI * static_cast<double>(k2) / static_cast<double>(n));
    }
    const size_t m = next_pow2(2 * n - 1);
    std::vector<cd> fa(m, cd(0.0, 0.0)), fb(m, cd(0.0, 0.0));
    for (size_t k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
    for (size_t k = 0; k < n; ++k) {
        fb[k] = std::conj(chirp[k]);
        if (k != 0) fb[m - k] = std::conj(chirp[k]);
    }
    fft_pow2(fa, false);
    fft_pow2(fb, false);
    for (size_t k = 0; k < m; ++k) fa[k] *= fb[k];
    fft_pow2(fa, true);
    const double norm = 1.0 / static_cast<double>(m);
    for (size_t k = 0; k < n; ++k) a[k] = fa[k] * norm * chirp[k];
}

}  // namespace

void transform(std::vector<cd>& a, bool inverse) {
    if (a.size() <= 1) return;
    if (is_pow2(a.size()))
        fft_pow2(a, inverse);
    else
        fft_bluestein(a, inverse);
}

void transform_strided(cd* base, int count, int stride, bool inverse) {
    std::vector<cd> tmp(count);
    for (int i = 0; i < count; ++i) tmp[i] = base[static_cast<int64_t>(i) * stride];
    transform(tmp, inverse);
    for (int i = 0; i < count; ++i) base[static_cast<int64_t>(i) * stride] = tmp[i];
}

}  // namespace pacfno::fft
