#include "ssn/alif_rsnn.hpp"

#include <cmath>

namespace ssn {

namespace {
const double kReluGain = std::sqrt(2.0);
}

AlifLayerParams make_alif_layer(ParamStore& ps, Initializer& init, const std::string& prefix, std::size_t hidden,
                                std::size_t x_channels, bool has_feedforward, const NetConfig& cfg) {
    AlifLayerParams p;
    p.gates = Conv2d(ps, init, prefix + ".gates", hidden + x_channels, 3 * hidden, 3);
    p.gn_gamma = ps.add(prefix + ".gn.gamma", Tensor({3 * hidden}, 1.0));
    p.gn_beta = ps.add(prefix + ".gn.beta", Tensor({3 * hidden}, 0.0));
    p.w_rec = ps.add(prefix + ".w_rec", init.uniform_fan_in({hidden, hidden, 3, 3}, hidden * 9));
    if (has_feedforward) p.w_f = ps.add(prefix + ".w_f", init.uniform_fan_in({hidden, hidden, 3, 3}, hidden * 9));
    p.v_peak = cfg.v_peak;
    p.gate_groups = cfg.gate_groups;
    return p;
}

GateTensors compute_gates(const AlifLayerState& state, const Var& x, const ContextScale& ctx,
                          const AlifLayerParams& p, bool use_gn) {
    const std::size_t hid = p.hidden();
    Var pre = p.gates(concat_channels({state.s, x}));
    if (use_gn) pre = group_norm(pre, 3 * p.gate_groups, 1e-5, p.gn_gamma, p.gn_beta);
    return {sigmoid(add(slice_channels(pre, 0, hid), ctx.c_alpha)),
            sigmoid(add(slice_channels(pre, hid, hid), ctx.c_beta)),
            sigmoid(add(slice_channels(pre, 2 * hid, hid), ctx.c_gamma))};
}

AlifStep alif_step(const AlifLayerState& state, const Var& below_spikes, const GateTensors& g,
                   const AlifLayerParams& p, const Surrogate& sg) {
    Var syn = conv2d(state.s, p.w_rec, 1, p.w_rec.shape()[2] / 2);
    if (below_spikes.defined() && p.w_f.defined())
        syn = add(syn, conv2d(below_spikes, p.w_f, 1, p.w_f.shape()[2] / 2));
    Var h = add(mul(g.alpha, state.v), mul(one_minus(g.alpha), syn));
    Var v_th = scale(g.beta, p.v_peak);
    Var s = spike(sub(h, v_th), sg);
    Var v = sub(h, mul(mul(g.gamma, s), v_th));
    return {{v, s}, h, v_th};
}

AlifLayerState initial_state(const ContextScale& ctx) {
    return {tanh(ctx.seed), Var(Tensor(ctx.seed.shape(), 0.0))};
}

RsnnStates rsnn_update(const RsnnStates& states, const ContextSet& ctx, const Var& motion, const RsnnParams& p,
                       const Surrogate& sg, bool use_gn, RsnnStepTrace* trace) {
    for (std::size_t s = 0; s < 3; ++s) {
        const Shape& want = ctx.scales[s].seed.shape();
        if (states[s].v.shape() != want || states[s].s.shape() != want)
            throw ShapeError("RSNN state at scale 1/" + std::to_string(kScaleFactor[s]) + " has shape " +
                             shape_str(states[s].v.shape()) + ", context expects " + shape_str(want));
    }
    const Shape& q = states[kQuarter].v.shape();
    if (motion.shape().size() != 3 || motion.shape()[1] != q[1] || motion.shape()[2] != q[2])
        throw ShapeError("motion features " + shape_str(motion.shape()) + " do not match 1/4 state " + shape_str(q));

    RsnnStates next;
    RsnnStepTrace local;
    RsnnStepTrace& tr = trace ? *trace : local;

    auto run = [&](std::size_t s, const Var& x, const Var& below) {
        tr.gates[s] = compute_gates(states[s], x, ctx.scales[s], p.layers[s], use_gn);
        tr.steps[s] = alif_step(states[s], below, tr.gates[s], p.layers[s], sg);
        next[s] = tr.steps[s].state;
    };

    run(kSixteenth, concat_channels({ctx.scales[kSixteenth].features, avg_pool2x(states[kEighth].s)}), Var{});
    run(kEighth, concat_channels({ctx.scales[kEighth].features, avg_pool2x(states[kQuarter].s)}),
        upsample2x(next[kSixteenth].s));
    run(kQuarter, motion, upsample2x(next[kEighth].s));
    return next;
}

MotionEncoder::MotionEncoder(ParamStore& ps, Initializer& init, const NetConfig& cfg) {
    const std::size_t corr_ch = (2 * cfg.corr_radius + 1) * cfg.corr_levels;
    const std::size_t mc = cfg.motion_channels;
    corr1_ = Conv2d(ps, init, "update.motion.corr1", corr_ch, 2 * mc, 1, 1, true, kReluGain);
    corr2_ = Conv2d(ps, init, "update.motion.corr2", 2 * mc, mc, 3, 1, true, kReluGain);
    disp1_ = Conv2d(ps, init, "update.motion.disp1", 1, mc / 2, 7, 1, true, kReluGain);
    disp2_ = Conv2d(ps, init, "update.motion.disp2", mc / 2, mc / 2, 3, 1, true, kReluGain);
    out_ = Conv2d(ps, init, "update.motion.out", mc + mc / 2, mc - 1, 3, 1, true, kReluGain);
}

Var MotionEncoder::operator()(const Var& corr, const Tensor& disparity) const {
    const Shape& cs = corr.shape();
    Var d(disparity.reshaped({1, cs[1], cs[2]}));
    Var c = relu(corr2_(relu(corr1_(corr))));
    Var e = relu(disp2_(relu(disp1_(d))));
    Var m = relu(out_(concat_channels({c, e})));
    return concat_channels({m, d});
}

UpdateBlock::UpdateBlock(ParamStore& ps, Initializer& init, const NetConfig& cfg) : motion(ps, init, cfg) {
    const std::size_t hid = cfg.hidden;
    rsnn.layers[kSixteenth] = make_alif_layer(ps, init, "update.rsnn16", hid, cfg.feat_c16 + hid, false, cfg);
    rsnn.layers[kEighth] = make_alif_layer(ps, init, "update.rsnn8", hid, cfg.feat_c8 + hid, true, cfg);
    rsnn.layers[kQuarter] = make_alif_layer(ps, init, "update.rsnn4", hid, cfg.motion_channels, true, cfg);
}

}  // namespace ssn
