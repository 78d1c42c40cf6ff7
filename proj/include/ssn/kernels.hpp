#pragma once

// Forward/backward compute kernels on plain tensors. Loops over output
// elements are OpenMP-parallel; the GEMM cores go through Eigen. The
// autodiff layer in ops.hpp wraps these.

#include "ssn/tensor.hpp"

namespace ssn::kernels {

struct ConvGeometry {
    std::size_t c_in, h, w;
    std::size_t c_out, kh, kw;
    std::size_t stride, pad;
    std::size_t h_out, w_out;
};

ConvGeometry conv_geometry(const Shape& input, const Shape& kernel, std::size_t stride, std::size_t pad);

/// Cross-correlation of x[C_in,H,W] with w[C_out,C_in,kH,kW], zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, std::size_t stride, std::size_t pad);

/// Accumulates into whichever of gx, gw, gb are non-null.
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gy, std::size_t stride, std::size_t pad,
                     Tensor* gx, Tensor* gw, Tensor* gb);

/// 1D mean pooling along the last axis.
Tensor avg_pool_lastdim(const Tensor& x, std::size_t kernel, std::size_t stride);
void avg_pool_lastdim_backward(const Tensor& gy, std::size_t kernel, std::size_t stride, Tensor& gx);

struct GroupNormResult {
    Tensor y;     // normalized, before affine
    Tensor mean;  // per group
    Tensor rstd;  // per group
};

GroupNormResult group_norm(const Tensor& x, std::size_t groups, double eps);

/// values[i,j,k] = <left[:,i,j], right[:,i,k]> / sqrt(C)
Tensor correlation_volume(const Tensor& left, const Tensor& right);
void correlation_volume_backward(const Tensor& left, const Tensor& right, const Tensor& gv, Tensor* gl,
                                 Tensor* gr);

}  // namespace ssn::kernels
