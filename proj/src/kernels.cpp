#include "ssn/kernels.hpp"

#include <Eigen/Core>
#include <cmath>
#include <numeric>

namespace ssn::kernels {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

bool is_pointwise(const ConvGeometry& g) { return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad == 0; }

// cols[(c*kh + ky)*kw + kx, oy*w_out + ox]
void im2col(const ConvGeometry& g, const double* x, double* cols) {
    const std::size_t rows = g.c_in * g.kh * g.kw;
    const std::size_t n = g.h_out * g.w_out;
#pragma omp parallel for schedule(static)
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t kx = r % g.kw;
        const std::size_t ky = (r / g.kw) % g.kh;
        const std::size_t c = r / (g.kw * g.kh);
        double* out = cols + r * n;
        for (std::size_t oy = 0; oy < g.h_out; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            for (std::size_t ox = 0; ox < g.w_out; ++ox) {
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(g.h) && ix < static_cast<long>(g.w);
                out[oy * g.w_out + ox] = inside ? x[(c * g.h + iy) * g.w + ix] : 0.0;
            }
        }
    }
}

void col2im_add(const ConvGeometry& g, const double* cols, double* gx) {
    const std::size_t n = g.h_out * g.w_out;
    // Parallel over input channels: each channel's rows touch only that channel.
#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < g.c_in; ++c) {
        for (std::size_t ky = 0; ky < g.kh; ++ky)
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                const double* src = cols + ((c * g.kh + ky) * g.kw + kx) * n;
                for (std::size_t oy = 0; oy < g.h_out; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                    if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                    for (std::size_t ox = 0; ox < g.w_out; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                        if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
                        gx[(c * g.h + iy) * g.w + ix] += src[oy * g.w_out + ox];
                    }
                }
            }
    }
}

}  // namespace

ConvGeometry conv_geometry(const Shape& input, const Shape& kernel, std::size_t stride, std::size_t pad) {
    if (input.size() != 3) throw ShapeError("conv2d input must be [C,H,W], got " + shape_str(input));
    if (kernel.size() != 4) throw ShapeError("conv2d kernel must be [Cout,Cin,kH,kW], got " + shape_str(kernel));
    if (kernel[1] != input[0])
        throw ShapeError("conv2d channel mismatch: input " + shape_str(input) + " kernel " + shape_str(kernel));
    if (stride == 0) throw ShapeError("conv2d stride must be positive");
    ConvGeometry g{input[0], input[1], input[2], kernel[0], kernel[2], kernel[3], stride, pad, 0, 0};
    if (g.h + 2 * pad < g.kh || g.w + 2 * pad < g.kw)
        throw ShapeError("conv2d kernel " + shape_str(kernel) + " larger than padded input " + shape_str(input));
    g.h_out = (g.h + 2 * pad - g.kh) / stride + 1;
    g.w_out = (g.w + 2 * pad - g.kw) / stride + 1;
    return g;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, std::size_t stride, std::size_t pad) {
    const ConvGeometry g = conv_geometry(x.shape(), w.shape(), stride, pad);
    if (bias && bias->numel() != g.c_out)
        throw ShapeError("conv2d bias has " + std::to_string(bias->numel()) + " values, expected " +
                         std::to_string(g.c_out));
    const std::size_t k = g.c_in * g.kh * g.kw;
    const std::size_t n = g.h_out * g.w_out;
    Tensor out({g.c_out, g.h_out, g.w_out});
    CMapMat wm(w.data().data(), g.c_out, k);
    MapMat om(out.data().data(), g.c_out, n);
    if (is_pointwise(g)) {
        om.noalias() = wm * CMapMat(x.data().data(), k, n);
    } else {
        std::vector<double> cols(k * n);
        im2col(g, x.data().data(), cols.data());
        om.noalias() = wm * CMapMat(cols.data(), k, n);
    }
    if (bias) {
#pragma omp parallel for schedule(static)
        for (std::size_t c = 0; c < g.c_out; ++c) om.row(c).array() += (*bias)[c];
    }
    return out;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gy, std::size_t stride, std::size_t pad,
                     Tensor* gx, Tensor* gw, Tensor* gb) {
    const ConvGeometry g = conv_geometry(x.shape(), w.shape(), stride, pad);
    const std::size_t k = g.c_in * g.kh * g.kw;
    const std::size_t n = g.h_out * g.w_out;
    CMapMat gym(gy.data().data(), g.c_out, n);
    if (gb) {
        // Plain loop: Eigen's vectorized sum depends on buffer alignment, which breaks run-to-run determinism.
        for (std::size_t c = 0; c < g.c_out; ++c) {
            const double* row = gy.data().data() + c * n;
            (*gb)[c] += std::accumulate(row, row + n, 0.0);
        }
    }
    const bool pointwise = is_pointwise(g);
    if (gw) {
        MapMat gwm(gw->data().data(), g.c_out, k);
        if (pointwise) {
            gwm.noalias() += gym * CMapMat(x.data().data(), k, n).transpose();
        } else {
            std::vector<double> cols(k * n);
            im2col(g, x.data().data(), cols.data());
            gwm.noalias() += gym * CMapMat(cols.data(), k, n).transpose();
        }
    }
    if (gx) {
        CMapMat wm(w.data().data(), g.c_out, k);
        if (pointwise) {
            MapMat(gx->data().data(), k, n).noalias() += wm.transpose() * gym;
        } else {
            std::vector<double> gcols(k * n);
            MapMat(gcols.data(), k, n).noalias() = wm.transpose() * gym;
            col2im_add(g, gcols.data(), gx->data().data());
        }
    }
}

Tensor avg_pool_lastdim(const Tensor& x, std::size_t kernel, std::size_t stride) {
    if (x.rank() == 0) throw ShapeError("avg_pool_lastdim on rank-0 tensor");
    const std::size_t d = x.shape().back();
    if (kernel == 0 || stride == 0) throw ShapeError("avg_pool_lastdim kernel and stride must be positive");
    if (kernel > d)
        throw ShapeError("avg_pool_lastdim kernel " + std::to_string(kernel) + " exceeds last dim " +
                         std::to_string(d));
    const std::size_t d_out = (d - kernel) / stride + 1;
    Shape out_shape = x.shape();
    out_shape.back() = d_out;
    Tensor out(out_shape);
    const std::size_t outer = x.numel() / d;
    const double inv = 1.0 / static_cast<double>(kernel);
#pragma omp parallel for schedule(static)
    for (std::size_t o = 0; o < outer; ++o) {
        const double* src = x.data().data() + o * d;
        double* dst = out.data().data() + o * d_out;
        for (std::size_t i = 0; i < d_out; ++i) {
            double s = 0.0;
            for (std::size_t t = 0; t < kernel; ++t) s += src[i * stride + t];
            dst[i] = s * inv;
        }
    }
    return out;
}

void avg_pool_lastdim_backward(const Tensor& gy, std::size_t kernel, std::size_t stride, Tensor& gx) {
    const std::size_t d = gx.shape().back();
    const std::size_t d_out = gy.shape().back();
    const std::size_t outer = gx.numel() / d;
    const double inv = 1.0 / static_cast<double>(kernel);
#pragma omp parallel for schedule(static)
    for (std::size_t o = 0; o < outer; ++o) {
        const double* src = gy.data().data() + o * d_out;
        double* dst = gx.data().data() + o * d;
        for (std::size_t i = 0; i < d_out; ++i)
            for (std::size_t t = 0; t < kernel; ++t) dst[i * stride + t] += src[i] * inv;
    }
}

GroupNormResult group_norm(const Tensor& x, std::size_t groups, double eps) {
    if (x.rank() != 3) throw ShapeError("group_norm input must be [C,H,W], got " + shape_str(x.shape()));
    const std::size_t c = x.dim(0);
    if (groups == 0 || c % groups != 0)
        throw ShapeError("group_norm: " + std::to_string(c) + " channels not divisible into " +
                         std::to_string(groups) + " groups");
    const std::size_t n = x.numel() / groups;
    GroupNormResult r{Tensor(x.shape()), Tensor({groups}), Tensor({groups})};
#pragma omp parallel for schedule(static)
    for (std::size_t gi = 0; gi < groups; ++gi) {
        const double* src = x.data().data() + gi * n;
        double* dst = r.y.data().data() + gi * n;
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += src[i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (src[i] - mean) * (src[i] - mean);
        var /= static_cast<double>(n);
        const double rstd = 1.0 / std::sqrt(var + eps);
        for (std::size_t i = 0; i < n; ++i) dst[i] = (src[i] - mean) * rstd;
        r.mean[gi] = mean;
        r.rstd[gi] = rstd;
    }
    return r;
}

Tensor correlation_volume(const Tensor& left, const Tensor& right) {
    if (left.rank() != 3 || left.shape() != right.shape())
        throw ShapeError("correlation features must share a [C,H,W] shape, got " + shape_str(left.shape()) +
                         " and " + shape_str(right.shape()));
    const std::size_t c = left.dim(0), h = left.dim(1), w = left.dim(2);
    const double norm = 1.0 / std::sqrt(static_cast<double>(c));
    Tensor vol({h, w, w});
    using StrideMat = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < h; ++i) {
        // Row i of every channel: [C, W] with outer stride H*W.
        StrideMat l(left.data().data() + i * w, c, w, Eigen::OuterStride<>(h * w));
        StrideMat r(right.data().data() + i * w, c, w, Eigen::OuterStride<>(h * w));
        MapMat(vol.data().data() + i * w * w, w, w).noalias() = norm * (l.transpose() * r);
    }
    return vol;
}

void correlation_volume_backward(const Tensor& left, const Tensor& right, const Tensor& gv, Tensor* gl,
                                 Tensor* gr) {
    const std::size_t c = left.dim(0), h = left.dim(1), w = left.dim(2);
    const double norm = 1.0 / std::sqrt(static_cast<double>(c));
    using StrideMat = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
    using MutStrideMat = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < h; ++i) {
        StrideMat l(left.data().data() + i * w, c, w, Eigen::OuterStride<>(h * w));
        StrideMat r(right.data().data() + i * w, c, w, Eigen::OuterStride<>(h * w));
        CMapMat g(gv.data().data() + i * w * w, w, w);
        if (gl) {
            MutStrideMat dl(gl->data().data() + i * w, c, w, Eigen::OuterStride<>(h * w));
            dl.noalias() += norm * (r * g.transpose());
        }
        if (gr) {
            MutStrideMat dr(gr->data().data() + i * w, c, w, Eigen::OuterStride<>(h * w));
            dr.noalias() += norm * (l * g);
        }
    }
}

}  // namespace ssn::kernels
