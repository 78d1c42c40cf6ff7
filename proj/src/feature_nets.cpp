#include "ssn/feature_nets.hpp"

#include <cmath>

namespace ssn {

namespace {
const double kReluGain = std::sqrt(2.0);

std::size_t round_up16(std::size_t v) { return (v + 15) / 16 * 16; }
}  // namespace

NetworkInput prepare_input(const SpikeStream& stream, const NetConfig& cfg) {
    const std::size_t hp = round_up16(stream.h), wp = round_up16(stream.w);
    if (hp < 32 || wp < 32)
        throw ShapeError("spike stream " + std::to_string(stream.h) + "x" + std::to_string(stream.w) +
                         " pads to " + std::to_string(hp) + "x" + std::to_string(wp) + ", below the 32x32 minimum");
    const Tensor binned = bin_stream(stream, cfg.input_bins);
    NetworkInput in{Tensor({cfg.input_bins, hp, wp}), stream.h, stream.w};
    for (std::size_t c = 0; c < cfg.input_bins; ++c)
        for (std::size_t y = 0; y < stream.h; ++y)
            for (std::size_t x = 0; x < stream.w; ++x) in.bins.at(c, y, x) = binned.at(c, y, x);
    return in;
}

Backbone::Backbone(ParamStore& ps, Initializer& init, const std::string& p, const NetConfig& cfg) {
    auto make_stage = [&](const std::string& name, std::size_t c_in, std::size_t c_out, std::size_t k) {
        Stage s;
        s.down = Conv2d(ps, init, p + "." + name + ".down", c_in, c_out, k, 2, true, kReluGain);
        for (std::size_t b = 0; b < cfg.res_blocks; ++b) {
            const std::string bn = p + "." + name + ".res" + std::to_string(b);
            s.blocks.push_back({Conv2d(ps, init, bn + ".a", c_out, c_out, 3, 1, true, kReluGain),
                                Conv2d(ps, init, bn + ".b", c_out, c_out, 3, 1, true, kReluGain)});
        }
        return s;
    };
    half_ = make_stage("s2", cfg.input_bins, cfg.stem_channels, 7);
    quarter_ = make_stage("s4", cfg.stem_channels, cfg.feat_c4, 3);
    eighth_ = make_stage("s8", cfg.feat_c4, cfg.feat_c8, 3);
    sixteenth_ = make_stage("s16", cfg.feat_c8, cfg.feat_c16, 3);
}

Var Backbone::run_stage(const Stage& s, const Var& x) const {
    Var y = relu(instance_norm(s.down(x)));
    for (const auto& b : s.blocks) {
        Var r = relu(instance_norm(b.a(y)));
        r = instance_norm(b.b(r));
        y = relu(add(y, r));
    }
    return y;
}

std::array<Var, 3> Backbone::operator()(const Var& input) const {
    Var x2 = run_stage(half_, input);
    Var x4 = run_stage(quarter_, x2);
    Var x8 = run_stage(eighth_, x4);
    Var x16 = run_stage(sixteenth_, x8);
    return {x4, x8, x16};
}

FeatureNet::FeatureNet(ParamStore& ps, Initializer& init, const NetConfig& cfg)
    : backbone_(ps, init, "fnet", cfg), proj4_(ps, init, "fnet.proj4", cfg.feat_c4, cfg.feat_c4, 1) {}

FeaturePyramid FeatureNet::operator()(const NetworkInput& input) const {
    auto [x4, x8, x16] = backbone_(Var(input.bins));
    return {proj4_(x4), x8, x16};
}

ContextNet::ContextNet(ParamStore& ps, Initializer& init, const NetConfig& cfg)
    : backbone_(ps, init, "cnet", cfg), hidden_(cfg.hidden) {
    const std::array<std::size_t, 3> widths{cfg.feat_c4, cfg.feat_c8, cfg.feat_c16};
    for (std::size_t s = 0; s < 3; ++s)
        heads_[s] = Conv2d(ps, init, "cnet.head" + std::to_string(kScaleFactor[s]), widths[s], 4 * cfg.hidden, 1);
}

ContextSet ContextNet::operator()(const NetworkInput& input) const {
    auto feats = backbone_(Var(input.bins));
    ContextSet ctx;
    for (std::size_t s = 0; s < 3; ++s) {
        Var h = heads_[s](feats[s]);
        ctx.scales[s] = {feats[s], slice_channels(h, 0, hidden_), slice_channels(h, hidden_, hidden_),
                         slice_channels(h, 2 * hidden_, hidden_), slice_channels(h, 3 * hidden_, hidden_)};
    }
    return ctx;
}

FeaturePyramid extract_features(const FeatureNet& net, const SpikeStream& stream, const NetConfig& cfg) {
    return net(prepare_input(stream, cfg));
}

ContextSet extract_context(const ContextNet& net, const SpikeStream& stream, const NetConfig& cfg) {
    return net(prepare_input(stream, cfg));
}

}  // namespace ssn
