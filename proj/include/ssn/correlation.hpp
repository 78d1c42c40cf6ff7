#pragma once

#include <vector>

#include "ssn/autograd.hpp"

namespace ssn {

/// values[i,j,k]: row i, left column j, right column k.
struct CorrVolume {
    Var values;  // [H4, W4, W4]
};

/// levels[L] has last dimension floor(W4 / 2^L).
struct CorrPyramid {
    std::vector<Var> levels;
};

/// Channel inner product scaled by 1/sqrt(C).
CorrVolume build_volume(const Var& f_left, const Var& f_right);

/// Repeated 1D mean pooling (kernel 2, stride 2) on the last axis.
CorrPyramid build_pyramid(const CorrVolume& volume, std::size_t levels = 4);

/// Local cost around the current disparity. For level L and offset delta in
/// [-r, r] samples level L at (j - d[i,j]) / 2^L + delta with linear
/// interpolation, clamping to the edge. Output channel L*(2r+1) + (delta+r).
/// Disparity is treated as a constant (no gradient); gradient flows into
/// the pyramid.
Var lookup(const CorrPyramid& pyramid, const Tensor& disparity, std::size_t radius);

}  // namespace ssn
