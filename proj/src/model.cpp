#include "ssn/model.hpp"

namespace ssn {

DisparityField Rollout::final_disparity() const {
    if (disparities.empty()) throw std::logic_error("empty rollout");
    const Var& d = disparities.back();
    return project_nonnegative({d.value().reshaped({d.shape()[1], d.shape()[2]}), FieldScale::Full});
}

SpikeStereoNet::SpikeStereoNet(NetConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg_.hidden % cfg_.gate_groups != 0)
        throw std::invalid_argument("hidden channels must be divisible by gate_groups");
    if (cfg_.motion_channels < 4) throw std::invalid_argument("motion_channels must be >= 4");
    Initializer init(seed);
    ParamStore& ps = params_;
    fnet_ = FeatureNet(ps, init, cfg_);
    cnet_ = ContextNet(ps, init, cfg_);
    update_ = UpdateBlock(ps, init, cfg_);
    head_ = RefinementHead(ps, init, cfg_);
}

Rollout SpikeStereoNet::iterate(const SpikeStream& left, const SpikeStream& right, std::size_t iterations,
                                bool record_dynamics) const {
    if (iterations < 1) throw std::invalid_argument("iterate needs at least one iteration");
    if (left.h != right.h || left.w != right.w || left.n != right.n)
        throw ShapeError("left and right spike streams differ in shape");

    const NetworkInput in_l = prepare_input(left, cfg_);
    const NetworkInput in_r = prepare_input(right, cfg_);
    const FeaturePyramid fl = fnet_(in_l);
    const FeaturePyramid fr = fnet_(in_r);
    const ContextSet ctx = cnet_(in_l);
    const CorrPyramid pyr = build_pyramid(build_volume(fl.f4, fr.f4), cfg_.corr_levels);

    RsnnStates states;
    for (std::size_t s = 0; s < 3; ++s) states[s] = initial_state(ctx.scales[s]);

    const Shape q = states[kQuarter].v.shape();
    Var d(Tensor({1, q[1], q[2]}, 0.0));
    Rollout out;
    for (std::size_t t = 0; t < iterations; ++t) {
        const Tensor d_now = d.value().reshaped({q[1], q[2]});
        Var corr = lookup(pyr, d_now, cfg_.corr_radius);
        Var motion = update_.motion(corr, d_now);
        RsnnStepTrace trace;
        states = rsnn_update(states, ctx, motion, update_.rsnn, cfg_.surrogate, cfg_.use_group_norm, &trace);
        auto res = head_(states[kQuarter]);
        d = add(d.detach(), res.delta);
        Var up = crop(convex_upsample(d, res.mask), left.h, left.w);

        out.disparities.push_back(up);
        out.quarter.push_back(d);
        out.deltas.push_back(res.delta);
        out.spikes.push_back({states[0].s, states[1].s, states[2].s});
        out.voltages.push_back({states[0].v, states[1].v, states[2].v});
        if (record_dynamics) {
            const auto& st = trace.steps[kQuarter];
            const auto& g = trace.gates[kQuarter];
            out.snapshots.push_back({st.h.value(), st.state.v.value(), st.state.s.value(), st.v_th.value(),
                                     g.alpha.value(), g.beta.value(), g.gamma.value()});
        }
    }
    return out;
}

void SpikeStereoNet::save(const std::filesystem::path& path, nlohmann::json meta) const {
    meta["net"] = cfg_.to_json();
    save_checkpoint(path, params_, meta);
}

SpikeStereoNet SpikeStereoNet::load(const std::filesystem::path& path) {
    Checkpoint ck = load_checkpoint(path);
    if (!ck.meta.contains("net")) throw std::runtime_error("checkpoint " + path.string() + " has no network config");
    SpikeStereoNet net(NetConfig::from_json(ck.meta.at("net")), 0);
    net.params_.assign(ck.tensors);
    return net;
}

}  // namespace ssn
