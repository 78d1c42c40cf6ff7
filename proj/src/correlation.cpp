#include "ssn/correlation.hpp"

#include <cmath>

#include "ssn/kernels.hpp"
#include "ssn/ops.hpp"

namespace ssn {

CorrVolume build_volume(const Var& f_left, const Var& f_right) {
    Tensor vol = kernels::correlation_volume(f_left.value(), f_right.value());
    return {make_result(std::move(vol), {f_left, f_right}, [](detail::Node& self) {
        auto& l = *self.parents[0];
        auto& r = *self.parents[1];
        kernels::correlation_volume_backward(l.value, r.value, self.grad, l.requires_grad ? &l.grad_buffer() : nullptr,
                                             r.requires_grad ? &r.grad_buffer() : nullptr);
    }, "build_volume")};
}

CorrPyramid build_pyramid(const CorrVolume& volume, std::size_t levels) {
    const Shape& s = volume.values.shape();
    if (s.size() != 3) throw ShapeError("correlation volume must be [H,W,W], got " + shape_str(s));
    if (levels == 0) throw std::invalid_argument("pyramid needs at least one level");
    if (s[2] < (std::size_t{1} << (levels - 1)) || s[2] < 8)
        throw ShapeError("correlation width " + std::to_string(s[2]) + " too small for a " + std::to_string(levels) +
                         "-level pyramid (need >= 8)");
    CorrPyramid p;
    p.levels.push_back(volume.values);
    for (std::size_t l = 1; l < levels; ++l) p.levels.push_back(avg_pool_lastdim(p.levels.back(), 2, 2));
    return p;
}

namespace {

struct Sample {
    std::size_t k0, k1;
    double w0, w1;
};

Sample sample_at(double x, std::size_t width) {
    const double hi = static_cast<double>(width - 1);
    const double xc = std::clamp(x, 0.0, hi);
    const auto k0 = static_cast<std::size_t>(std::floor(xc));
    const std::size_t k1 = std::min(k0 + 1, width - 1);
    const double f = xc - static_cast<double>(k0);
    return {k0, k1, 1.0 - f, f};
}

}  // namespace

Var lookup(const CorrPyramid& pyramid, const Tensor& disparity, std::size_t radius) {
    if (radius < 1) throw std::invalid_argument("lookup radius must be >= 1");
    if (pyramid.levels.empty()) throw std::invalid_argument("lookup on empty pyramid");
    const Shape& s0 = pyramid.levels[0].shape();
    const std::size_t h = s0[0], w = s0[1];
    if (disparity.numel() != h * w)
        throw ShapeError("disparity " + shape_str(disparity.shape()) + " does not match volume " + shape_str(s0));
    const std::size_t taps = 2 * radius + 1;
    const std::size_t nlev = pyramid.levels.size();
    Tensor out({taps * nlev, h, w});
    for (std::size_t l = 0; l < nlev; ++l) {
        const Tensor& vol = pyramid.levels[l].value();
        const std::size_t wl = vol.dim(2);
        const double scale = std::ldexp(1.0, -static_cast<int>(l));
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                const double centre = (static_cast<double>(j) - disparity[i * w + j]) * scale;
                const double* row = vol.data().data() + (i * w + j) * wl;
                for (std::size_t t = 0; t < taps; ++t) {
                    const Sample sm = sample_at(centre + static_cast<double>(t) - static_cast<double>(radius), wl);
                    out.at(l * taps + t, i, j) = sm.w0 * row[sm.k0] + sm.w1 * row[sm.k1];
                }
            }
    }
    Tensor disp = disparity;
    return make_result(std::move(out), pyramid.levels, [disp = std::move(disp), radius, taps, h, w](detail::Node& self) {
        for (std::size_t l = 0; l < self.parents.size(); ++l) {
            auto& p = *self.parents[l];
            if (!p.requires_grad) continue;
            Tensor& g = p.grad_buffer();
            const std::size_t wl = p.value.dim(2);
            const double scale = std::ldexp(1.0, -static_cast<int>(l));
#pragma omp parallel for schedule(static)
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j) {
                    const double centre = (static_cast<double>(j) - disp[i * w + j]) * scale;
                    double* row = g.data().data() + (i * w + j) * wl;
                    for (std::size_t t = 0; t < taps; ++t) {
                        const Sample sm =
                            sample_at(centre + static_cast<double>(t) - static_cast<double>(radius), wl);
                        const double d = self.grad.at(l * taps + t, i, j);
                        row[sm.k0] += sm.w0 * d;
                        row[sm.k1] += sm.w1 * d;
                    }
                }
        }
    }, "lookup");
}

}  // namespace ssn
