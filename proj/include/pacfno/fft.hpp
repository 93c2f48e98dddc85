#pragma once

#include <complex>
#include <vector>

namespace pacfno::fft {

using cd = std::complex<double>;

// In-place complex transform of arbitrary length, unnormalized in both
// directions (the caller applies 1/N where needed). Power-of-two lengths run
// iterative radix-2; everything else goes through Bluestein's chirp-z
// algorithm, so the cost stays O(N log N) for all N.
void transform(std::vector<cd>& a, bool inverse);

// Strided transform over a larger buffer (for the second axis of 2-D FFTs).
void transform_strided(cd* base, int count, int stride, bool inverse);

}  // namespace pacfno::fft
