#pragma once

// Serial, nested-loop reference implementations used as test oracles and as
// the baseline in benchmarks. Nothing here shares code with the library
// kernels beyond the Tensor container.

#include <functional>
#include <random>

#include "ssn/objective.hpp"
#include "ssn/spike_codec.hpp"

namespace ref {

using ssn::Shape;
using ssn::Tensor;

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, std::size_t stride, std::size_t pad);
Tensor avg_pool_lastdim(const Tensor& x, std::size_t kernel, std::size_t stride);
Tensor group_norm(const Tensor& x, std::size_t groups, double eps, const Tensor* gamma = nullptr,
                  const Tensor* beta = nullptr);
/// vol[i,j,k] = sum_c l[c,i,j] r[c,i,k] / sqrt(C)
Tensor correlation_volume(const Tensor& left, const Tensor& right);
std::vector<Tensor> pyramid(const Tensor& volume, std::size_t levels);
Tensor lookup(const std::vector<Tensor>& levels, const Tensor& disparity, std::size_t radius);
Tensor avg_pool2x(const Tensor& x);
Tensor upsample2x(const Tensor& x);
Tensor convex_upsample(const Tensor& disparity, const Tensor& mask);

/// Counts with explicit per-pixel branches.
ssn::Metrics metrics(const Tensor& pred, const Tensor& gt);

/// Bit string in (t,row,col) order, LSB first per byte, plus the 20-byte header.
std::vector<std::uint8_t> pack_dat(const ssn::SpikeStream& s);
/// Direct simulation of an integrator per pixel.
ssn::SpikeStream encode(const ssn::FrameSequence& f, double threshold);

/// Central differences of a scalar function with respect to every entry of x.
Tensor numeric_gradient(const std::function<double()>& f, Tensor& x, double h);

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0);
ssn::SpikeStream random_stream(std::size_t n, std::size_t h, std::size_t w, double p, std::mt19937_64& rng);

/// Largest |a-b|; throws on size mismatch.
double max_abs_diff(const Tensor& a, const Tensor& b);
/// ||a-b|| / max(||a||, ||b||), 0 when both vanish.
double rel_error(const Tensor& a, const Tensor& b);

}  // namespace ref
