#include "ssn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "ssn/kernels.hpp"

namespace ssn {

namespace {

enum class Bcast { Same, Scalar, Channel };

Bcast bcast_kind(const Shape& operand, const Shape& out) {
    if (operand == out) return Bcast::Same;
    if (numel_of(operand) == 1) return Bcast::Scalar;
    return Bcast::Channel;
}

// Maps a flat output index to the operand's flat index.
struct Indexer {
    Bcast kind;
    std::size_t inner = 1;  // elements per channel (Channel only)

    Indexer(const Shape& operand, const Shape& out) : kind(bcast_kind(operand, out)) {
        if (kind == Bcast::Channel) inner = numel_of(out) / out[0];
    }
    std::size_t operator()(std::size_t i) const {
        switch (kind) {
            case Bcast::Same: return i;
            case Bcast::Scalar: return 0;
            case Bcast::Channel: return i / inner;
        }
        return i;
    }
};

double sigmoid_d(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

template <class Fwd, class Dx>
Var unary(const Var& a, Fwd f, Dx dfdx, const char* name) {
    Tensor out(a.shape());
    const auto& in = a.value();
    const std::size_t n = in.numel();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) out[i] = f(in[i]);
    return make_result(std::move(out), {a}, [dfdx](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buffer();
        const std::size_t m = g.numel();
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < m; ++i) g[i] += self.grad[i] * dfdx(p.value[i], self.value[i]);
    }, name);
}

}  // namespace

double Surrogate::derivative(double x) const {
    const double s = sigmoid_d(slope * x);
    return gain * slope * s * (1.0 - s);
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
    if (a == b) return a;
    if (numel_of(b) == 1) return a;
    if (numel_of(a) == 1) return b;
    if (b.size() == 1 && a.size() >= 2 && a[0] == b[0]) return a;
    if (a.size() == 1 && b.size() >= 2 && b[0] == a[0]) return b;
    throw ShapeError("shapes " + shape_str(a) + " and " + shape_str(b) + " are not broadcast-compatible");
}

namespace {

enum class BinOp { Add, Sub, Mul };

Var binary(const Var& a, const Var& b, BinOp op) {
    const Shape out_shape = broadcast_shape(a.shape(), b.shape());
    const Indexer ia(a.shape(), out_shape), ib(b.shape(), out_shape);
    Tensor out(out_shape);
    const auto& av = a.value();
    const auto& bv = b.value();
    const std::size_t n = out.numel();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        const double x = av[ia(i)], y = bv[ib(i)];
        out[i] = op == BinOp::Add ? x + y : op == BinOp::Sub ? x - y : x * y;
    }
    const char* name = op == BinOp::Add ? "add" : op == BinOp::Sub ? "sub" : "mul";
    return make_result(std::move(out), {a, b}, [ia, ib, op](detail::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const std::size_t n = self.grad.numel();
        // Reductions into broadcast operands are serial to stay race-free.
        if (pa.requires_grad) {
            Tensor& g = pa.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                const double d = op == BinOp::Mul ? pb.value[ib(i)] : 1.0;
                g[ia(i)] += self.grad[i] * d;
            }
        }
        if (pb.requires_grad) {
            Tensor& g = pb.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                const double d = op == BinOp::Mul ? pa.value[ia(i)] : op == BinOp::Sub ? -1.0 : 1.0;
                g[ib(i)] += self.grad[i] * d;
            }
        }
    }, name);
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary(a, b, BinOp::Add); }
Var sub(const Var& a, const Var& b) { return binary(a, b, BinOp::Sub); }
Var mul(const Var& a, const Var& b) { return binary(a, b, BinOp::Mul); }

Var scale(const Var& a, double s) {
    return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; }, "scale");
}

Var add_scalar(const Var& a, double s) {
    return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; }, "add_scalar");
}

Var one_minus(const Var& a) {
    return unary(a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; }, "one_minus");
}

Var sigmoid(const Var& a) {
    return unary(a, sigmoid_d, [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

Var tanh(const Var& a) {
    return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; }, "tanh");
}

Var relu(const Var& a) {
    return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; },
                 "relu");
}

Var abs(const Var& a) {
    return unary(a, [](double x) { return std::abs(x); },
                 [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }, "abs");
}

Var square(const Var& a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; }, "square");
}

Var heaviside(const Var& a, const Surrogate& sg) {
    return unary(a, [](double x) { return x >= 0 ? 1.0 : 0.0; },
                 [sg](double x, double) { return sg.derivative(x); }, "heaviside");
}

Var spike(const Var& a, const Surrogate& sg) {
    return sg.relaxation == SpikeRelaxation::Relu ? relu(a) : heaviside(a, sg);
}

Var elementwise(std::string_view name, const std::vector<Var>& inputs, const Surrogate& sg) {
    auto need = [&](std::size_t n) {
        if (inputs.size() != n)
            throw ShapeError(std::string(name) + " expects " + std::to_string(n) + " inputs, got " +
                             std::to_string(inputs.size()));
    };
    if (name == "add") return need(2), add(inputs[0], inputs[1]);
    if (name == "sub") return need(2), sub(inputs[0], inputs[1]);
    if (name == "mul") return need(2), mul(inputs[0], inputs[1]);
    if (name == "sigmoid") return need(1), sigmoid(inputs[0]);
    if (name == "tanh") return need(1), tanh(inputs[0]);
    if (name == "relu") return need(1), relu(inputs[0]);
    if (name == "heaviside_surrogate") return need(1), heaviside(inputs[0], sg);
    throw std::invalid_argument("unknown elementwise op: " + std::string(name));
}

Var sum(const Var& a) {
    return make_result(Tensor::scalar(a.value().sum()), {a}, [](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buffer();
        const double d = self.grad[0];
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += d;
    }, "sum");
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Var conv2d(const Var& input, const Var& kernel, const Var& bias, std::size_t stride, std::size_t padding) {
    const bool has_bias = bias.defined();
    Tensor out = kernels::conv2d(input.value(), kernel.value(), has_bias ? &bias.value() : nullptr, stride, padding);
    std::vector<Var> parents{input, kernel};
    if (has_bias) parents.push_back(bias);
    return make_result(std::move(out), std::move(parents), [stride, padding, has_bias](detail::Node& self) {
        auto& x = *self.parents[0];
        auto& w = *self.parents[1];
        Tensor* gb = has_bias && self.parents[2]->requires_grad ? &self.parents[2]->grad_buffer() : nullptr;
        kernels::conv2d_backward(x.value, w.value, self.grad, stride, padding,
                                 x.requires_grad ? &x.grad_buffer() : nullptr,
                                 w.requires_grad ? &w.grad_buffer() : nullptr, gb);
    }, "conv2d");
}

Var conv2d(const Var& input, const Var& kernel, std::size_t stride, std::size_t padding) {
    return conv2d(input, kernel, Var{}, stride, padding);
}

Var avg_pool_lastdim(const Var& input, std::size_t kernel, std::size_t stride) {
    Tensor out = kernels::avg_pool_lastdim(input.value(), kernel, stride);
    return make_result(std::move(out), {input}, [kernel, stride](detail::Node& self) {
        auto& p = *self.parents[0];
        if (p.requires_grad) kernels::avg_pool_lastdim_backward(self.grad, kernel, stride, p.grad_buffer());
    }, "avg_pool_lastdim");
}

Var group_norm(const Var& input, std::size_t groups, double eps, const Var& gamma, const Var& beta) {
    auto r = kernels::group_norm(input.value(), groups, eps);
    const std::size_t c = input.shape()[0];
    const std::size_t plane = input.numel() / c;
    const bool has_gamma = gamma.defined(), has_beta = beta.defined();
    if ((has_gamma && gamma.numel() != c) || (has_beta && beta.numel() != c))
        throw ShapeError("group_norm affine parameters must have " + std::to_string(c) + " entries");
    Tensor out = r.y;
    if (has_gamma || has_beta) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double g = has_gamma ? gamma.value()[ch] : 1.0;
            const double b = has_beta ? beta.value()[ch] : 0.0;
            for (std::size_t i = 0; i < plane; ++i) out[ch * plane + i] = out[ch * plane + i] * g + b;
        }
    }
    std::vector<Var> parents{input};
    if (has_gamma) parents.push_back(gamma);
    if (has_beta) parents.push_back(beta);
    Tensor xhat = std::move(r.y);
    Tensor rstd = std::move(r.rstd);
    return make_result(std::move(out), std::move(parents),
                       [xhat = std::move(xhat), rstd = std::move(rstd), groups, c, plane, has_gamma,
                        has_beta](detail::Node& self) {
        auto& x = *self.parents[0];
        detail::Node* gam = has_gamma ? self.parents[1].get() : nullptr;
        detail::Node* bet = has_beta ? self.parents[has_gamma ? 2 : 1].get() : nullptr;
        const Tensor& gy = self.grad;
        if (gam && gam->requires_grad) {
            Tensor& g = gam->grad_buffer();
            for (std::size_t ch = 0; ch < c; ++ch) {
                double s = 0.0;
                for (std::size_t i = 0; i < plane; ++i) s += gy[ch * plane + i] * xhat[ch * plane + i];
                g[ch] += s;
            }
        }
        if (bet && bet->requires_grad) {
            Tensor& g = bet->grad_buffer();
            for (std::size_t ch = 0; ch < c; ++ch) {
                double s = 0.0;
                for (std::size_t i = 0; i < plane; ++i) s += gy[ch * plane + i];
                g[ch] += s;
            }
        }
        if (!x.requires_grad) return;
        Tensor& gx = x.grad_buffer();
        const std::size_t n = xhat.numel() / groups;
        const std::size_t ch_per_group = c / groups;
#pragma omp parallel for schedule(static)
        for (std::size_t gi = 0; gi < groups; ++gi) {
            std::vector<double> dxhat(n);
            double sum_d = 0.0, sum_dx = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t idx = gi * n + i;
                const std::size_t ch = gi * ch_per_group + i / plane;
                const double gmul = gam ? gam->value[ch] : 1.0;
                dxhat[i] = gy[idx] * gmul;
                sum_d += dxhat[i];
                sum_dx += dxhat[i] * xhat[idx];
            }
            const double inv_n = 1.0 / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t idx = gi * n + i;
                gx[idx] += rstd[gi] * (dxhat[i] - inv_n * sum_d - xhat[idx] * inv_n * sum_dx);
            }
        }
    }, "group_norm");
}

Var concat_channels(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels of nothing");
    const Shape& first = parts[0].shape();
    if (first.size() != 3) throw ShapeError("concat_channels expects [C,H,W] parts");
    std::size_t c = 0;
    for (const auto& p : parts) {
        if (p.shape().size() != 3 || p.shape()[1] != first[1] || p.shape()[2] != first[2])
            throw ShapeError("concat_channels spatial mismatch: " + shape_str(first) + " vs " + shape_str(p.shape()));
        c += p.shape()[0];
    }
    Tensor out({c, first[1], first[2]});
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.value().vec().begin(), p.value().vec().end(), out.vec().begin() + static_cast<long>(off));
        off += p.numel();
    }
    return make_result(std::move(out), parts, [](detail::Node& self) {
        std::size_t off = 0;
        for (auto& p : self.parents) {
            const std::size_t n = p->value.numel();
            if (p->requires_grad) {
                Tensor& g = p->grad_buffer();
                for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[off + i];
            }
            off += n;
        }
    }, "concat_channels");
}

Var slice_channels(const Var& input, std::size_t begin, std::size_t count) {
    const Shape& s = input.shape();
    if (s.size() != 3 || begin + count > s[0])
        throw ShapeError("slice_channels [" + std::to_string(begin) + ", +" + std::to_string(count) + ") out of " +
                         shape_str(s));
    const std::size_t plane = s[1] * s[2];
    Tensor out({count, s[1], s[2]});
    std::copy_n(input.value().vec().begin() + static_cast<long>(begin * plane), count * plane, out.vec().begin());
    return make_result(std::move(out), {input}, [begin, plane](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buffer();
        for (std::size_t i = 0; i < self.grad.numel(); ++i) g[begin * plane + i] += self.grad[i];
    }, "slice_channels");
}

Var avg_pool2x(const Var& input) {
    const Shape& s = input.shape();
    if (s.size() != 3 || s[1] % 2 || s[2] % 2)
        throw ShapeError("avg_pool2x needs [C,H,W] with even H,W, got " + shape_str(s));
    const std::size_t c = s[0], h = s[1] / 2, w = s[2] / 2;
    Tensor out({c, h, w});
    const auto& x = input.value();
#pragma omp parallel for schedule(static)
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t xx = 0; xx < w; ++xx)
                out.at(ch, y, xx) = 0.25 * (x.at(ch, 2 * y, 2 * xx) + x.at(ch, 2 * y, 2 * xx + 1) +
                                            x.at(ch, 2 * y + 1, 2 * xx) + x.at(ch, 2 * y + 1, 2 * xx + 1));
    return make_result(std::move(out), {input}, [](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buffer();
        const auto& gs = self.grad.shape();
#pragma omp parallel for schedule(static)
        for (std::size_t ch = 0; ch < gs[0]; ++ch)
            for (std::size_t y = 0; y < gs[1]; ++y)
                for (std::size_t xx = 0; xx < gs[2]; ++xx) {
                    const double d = 0.25 * self.grad.at(ch, y, xx);
                    g.at(ch, 2 * y, 2 * xx) += d;
                    g.at(ch, 2 * y, 2 * xx + 1) += d;
                    g.at(ch, 2 * y + 1, 2 * xx) += d;
                    g.at(ch, 2 * y + 1, 2 * xx + 1) += d;
                }
    }, "avg_pool2x");
}

namespace {

// Source taps for x2 bilinear upsampling along one axis of length n.
struct Taps {
    std::size_t i0, i1;
    double w0, w1;
};

std::vector<Taps> upsample_taps(std::size_t n) {
    std::vector<Taps> taps(2 * n);
    for (std::size_t o = 0; o < 2 * n; ++o) {
        const double src = std::clamp((static_cast<double>(o) + 0.5) / 2.0 - 0.5, 0.0, static_cast<double>(n - 1));
        const auto i0 = static_cast<std::size_t>(std::floor(src));
        const std::size_t i1 = std::min(i0 + 1, n - 1);
        const double f = src - static_cast<double>(i0);
        taps[o] = {i0, i1, 1.0 - f, f};
    }
    return taps;
}

}  // namespace

Var upsample2x(const Var& input) {
    const Shape& s = input.shape();
    if (s.size() != 3) throw ShapeError("upsample2x needs [C,H,W], got " + shape_str(s));
    const std::size_t c = s[0], h = s[1], w = s[2];
    auto ty = upsample_taps(h), tx = upsample_taps(w);
    Tensor out({c, 2 * h, 2 * w});
    const auto& x = input.value();
#pragma omp parallel for schedule(static)
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < 2 * h; ++y)
            for (std::size_t xx = 0; xx < 2 * w; ++xx) {
                const Taps& a = ty[y];
                const Taps& b = tx[xx];
                out.at(ch, y, xx) = a.w0 * (b.w0 * x.at(ch, a.i0, b.i0) + b.w1 * x.at(ch, a.i0, b.i1)) +
                                    a.w1 * (b.w0 * x.at(ch, a.i1, b.i0) + b.w1 * x.at(ch, a.i1, b.i1));
            }
    return make_result(std::move(out), {input}, [ty, tx](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buffer();
        const auto& gs = self.grad.shape();
#pragma omp parallel for schedule(static)
        for (std::size_t ch = 0; ch < gs[0]; ++ch)
            for (std::size_t y = 0; y < gs[1]; ++y)
                for (std::size_t xx = 0; xx < gs[2]; ++xx) {
                    const double d = self.grad.at(ch, y, xx);
                    const Taps& a = ty[y];
                    const Taps& b = tx[xx];
                    g.at(ch, a.i0, b.i0) += d * a.w0 * b.w0;
                    g.at(ch, a.i0, b.i1) += d * a.w0 * b.w1;
                    g.at(ch, a.i1, b.i0) += d * a.w1 * b.w0;
                    g.at(ch, a.i1, b.i1) += d * a.w1 * b.w1;
                }
    }, "upsample2x");
}

Var crop(const Var& input, std::size_t h, std::size_t w) {
    const Shape& s = input.shape();
    if (s.size() != 3 || h > s[1] || w > s[2])
        throw ShapeError("crop to " + std::to_string(h) + "x" + std::to_string(w) + " from " + shape_str(s));
    if (h == s[1] && w == s[2]) return input;
    const std::size_t c = s[0], sh = s[1], sw = s[2];
    Tensor out({c, h, w});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) out.at(ch, y, x) = input.value().at(ch, y, x);
    return make_result(std::move(out), {input}, [c, h, w, sh, sw](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buffer();
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) g[(ch * sh + y) * sw + x] += self.grad.at(ch, y, x);
    }, "crop");
}

Var reshape(const Var& input, Shape shape) {
    Tensor out = input.value().reshaped(std::move(shape));
    return make_result(std::move(out), {input}, [](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buffer();
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    }, "reshape");
}

}  // namespace ssn
