#pragma once

#include <cstdint>
#include <vector>

#include "parasq/common.hpp"

namespace parasq {

// In-place unnormalised 2D transform of an n x n row-major array.
// sign = +1 computes sum_k a_k exp(+2 pi i k.j / n).
void fft2d(std::vector<cplx>& data, int64_t n, int sign);

// In-place unnormalised 1D transform.
void fft1d(std::vector<cplx>& data, int sign);

}  // namespace parasq
