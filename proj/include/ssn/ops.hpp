#pragma once

#include <string_view>
#include <vector>

#include "ssn/autograd.hpp"

namespace ssn {

/// Spike nonlinearity. Relu is the 1-Lipschitz relaxation used for
/// finite-difference checks and the contraction analysis.
enum class SpikeRelaxation { Heaviside, Relu };

/// Pseudo-derivative of the spike step: gain * slope * sig(slope x) * (1 - sig(slope x)).
struct Surrogate {
    double slope = 4.0;
    double gain = 1.0;
    SpikeRelaxation relaxation = SpikeRelaxation::Heaviside;

    double derivative(double x) const;
};

/// Broadcast result shape. Allowed: equal shapes, a scalar (one element)
/// against anything, or a channel vector [C] against a tensor whose leading
/// dimension is C. Spatial broadcasting is rejected.
Shape broadcast_shape(const Shape& a, const Shape& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var one_minus(const Var& a);

Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var abs(const Var& a);
Var square(const Var& a);
/// Forward: step(x) with step(0) = 1. Backward: surrogate derivative.
Var heaviside(const Var& a, const Surrogate& sg = {});
/// heaviside or relu, per sg.relaxation.
Var spike(const Var& a, const Surrogate& sg);

/// Name-dispatched form: add, sub, mul, sigmoid, tanh, relu, heaviside_surrogate.
Var elementwise(std::string_view name, const std::vector<Var>& inputs, const Surrogate& sg = {});

Var sum(const Var& a);
Var mean(const Var& a);

/// bias may be an undefined Var.
Var conv2d(const Var& input, const Var& kernel, const Var& bias, std::size_t stride, std::size_t padding);
Var conv2d(const Var& input, const Var& kernel, std::size_t stride, std::size_t padding);

Var avg_pool_lastdim(const Var& input, std::size_t kernel, std::size_t stride);

/// Per-group standardization of [C,H,W]; gamma/beta ([C]) optional.
Var group_norm(const Var& input, std::size_t groups, double eps, const Var& gamma = {}, const Var& beta = {});

Var concat_channels(const std::vector<Var>& parts);
Var slice_channels(const Var& input, std::size_t begin, std::size_t count);

/// 2x2 mean pooling of [C,H,W] with stride 2 (H, W even).
Var avg_pool2x(const Var& input);
/// Bilinear x2 upsampling of [C,H,W] (half-pixel centers, edge clamp).
Var upsample2x(const Var& input);
/// Keep the top-left [C,h,w] window.
Var crop(const Var& input, std::size_t h, std::size_t w);
Var reshape(const Var& input, Shape shape);

}  // namespace ssn
