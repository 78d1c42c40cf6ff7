#include "ssn/refinement.hpp"

#include <algorithm>
#include <cmath>

namespace ssn {

void RigCalibration::validate() const {
    if (!(baseline_m > 0.0)) throw std::invalid_argument("rig baseline must be positive");
    if (!(focal_px > 0.0)) throw std::invalid_argument("rig focal length must be positive");
}

RefinementHead::RefinementHead(ParamStore& ps, Initializer& init, const NetConfig& cfg) {
    const double relu_gain = std::sqrt(2.0);
    disp1_ = Conv2d(ps, init, "head.disp1", cfg.hidden, cfg.head_channels, 3, 1, true, relu_gain);
    disp2_ = Conv2d(ps, init, "head.disp2", cfg.head_channels, 1, 3, 1, true, 0.1);
    mask1_ = Conv2d(ps, init, "head.mask1", cfg.hidden, cfg.head_channels, 3, 1, true, relu_gain);
    mask2_ = Conv2d(ps, init, "head.mask2", cfg.head_channels, kMaskChannels, 1, 1, true);
}

RefinementHead::Output RefinementHead::operator()(const AlifLayerState& st) const {
    Var delta = disp2_(relu(disp1_(st.v)));
    Var mask = scale(mask2_(relu(mask1_(st.v))), 0.25);
    return {delta, mask};
}

void RefinementHead::zero_residual_output() {
    disp2_.weight.mutable_value().fill(0.0);
    disp2_.bias.mutable_value().fill(0.0);
}

namespace {

struct Neighbourhood {
    std::array<std::size_t, 9> idx;
};

Neighbourhood neighbours(std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
    Neighbourhood n{};
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            const auto yy = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(y) + dy, 0, static_cast<long>(h) - 1));
            const auto xx = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(x) + dx, 0, static_cast<long>(w) - 1));
            n.idx[static_cast<std::size_t>((dy + 1) * 3 + (dx + 1))] = yy * w + xx;
        }
    return n;
}

}  // namespace

Var convex_upsample(const Var& disparity, const Var& mask_logits) {
    const Shape& ds = disparity.shape();
    if (ds.size() != 3 || ds[0] != 1) throw ShapeError("convex_upsample disparity must be [1,H,W], got " + shape_str(ds));
    const std::size_t h = ds[1], w = ds[2];
    if (mask_logits.shape() != Shape{kMaskChannels, h, w})
        throw ShapeError("convex_upsample mask must be [144," + std::to_string(h) + "," + std::to_string(w) + "], got " +
                         shape_str(mask_logits.shape()));
    constexpr std::size_t f = kUpsampleFactor;
    const std::size_t hw = h * w;
    const auto& d = disparity.value();
    const auto& m = mask_logits.value();
    Tensor out({1, h * f, w * f});
    Tensor weights({kMaskChannels, h, w});  // softmax over the 9 neighbours
#pragma omp parallel for schedule(static)
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const Neighbourhood nb = neighbours(y, x, h, w);
            for (std::size_t sub = 0; sub < f * f; ++sub) {
                double mx = -INFINITY;
                for (std::size_t k = 0; k < 9; ++k) mx = std::max(mx, m[(k * f * f + sub) * hw + y * w + x]);
                double z = 0.0;
                std::array<double, 9> e{};
                for (std::size_t k = 0; k < 9; ++k) {
                    e[k] = std::exp(m[(k * f * f + sub) * hw + y * w + x] - mx);
                    z += e[k];
                }
                double acc = 0.0;
                for (std::size_t k = 0; k < 9; ++k) {
                    const double wk = e[k] / z;
                    weights[(k * f * f + sub) * hw + y * w + x] = wk;
                    acc += wk * static_cast<double>(f) * d[nb.idx[k]];
                }
                out[(y * f + sub / f) * w * f + x * f + sub % f] = acc;
            }
        }
    return make_result(std::move(out), {disparity, mask_logits},
                       [weights = std::move(weights), h, w](detail::Node& self) {
        auto& pd = *self.parents[0];
        auto& pm = *self.parents[1];
        const std::size_t hw = h * w;
        Tensor* gd = pd.requires_grad ? &pd.grad_buffer() : nullptr;
        Tensor* gm = pm.requires_grad ? &pm.grad_buffer() : nullptr;
        // Serial: neighbourhoods overlap in the disparity gradient.
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const Neighbourhood nb = neighbours(y, x, h, w);
                for (std::size_t sub = 0; sub < f * f; ++sub) {
                    const std::size_t oi = (y * f + sub / f) * w * f + x * f + sub % f;
                    const double go = self.grad[oi];
                    const double out_v = self.value[oi];
                    for (std::size_t k = 0; k < 9; ++k) {
                        const std::size_t mi = (k * f * f + sub) * hw + y * w + x;
                        const double wk = weights[mi];
                        const double vk = static_cast<double>(f) * pd.value[nb.idx[k]];
                        if (gd) (*gd)[nb.idx[k]] += go * wk * static_cast<double>(f);
                        if (gm) (*gm)[mi] += go * wk * (vk - out_v);
                    }
                }
            }
    }, "convex_upsample");
}

DisparityField project_nonnegative(DisparityField d) {
    for (auto& v : d.values.vec()) v = std::max(v, 0.0);
    return d;
}

DepthMap disparity_to_depth(const DisparityField& d, const RigCalibration& rig, double eps) {
    rig.validate();
    DepthMap out{Tensor(d.values.shape()), std::vector<std::uint8_t>(d.values.numel(), 0)};
    const double bf = rig.baseline_m * rig.focal_px;
    for (std::size_t i = 0; i < d.values.numel(); ++i) {
        const double denom = d.values[i] + rig.principal_offset_px;
        if (std::isfinite(denom) && denom > eps) {
            out.depth_m[i] = bf / denom;
            out.valid[i] = 1;
        }
    }
    return out;
}

DisparityField depth_to_disparity(const Tensor& depth_m, const RigCalibration& rig) {
    rig.validate();
    DisparityField out{Tensor(depth_m.shape()), FieldScale::Full};
    const double bf = rig.baseline_m * rig.focal_px;
    for (std::size_t i = 0; i < depth_m.numel(); ++i)
        out.values[i] = depth_m[i] > 0.0 ? bf / depth_m[i] - rig.principal_offset_px : 0.0;
    return out;
}

}  // namespace ssn
