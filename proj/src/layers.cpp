#include "ssn/layers.hpp"

namespace ssn {

NetConfig NetConfig::desk() {
    NetConfig c;
    c.stem_channels = 16;
    c.feat_c4 = 32;
    c.feat_c8 = 48;
    c.feat_c16 = 64;
    c.hidden = 32;
    c.motion_channels = 32;
    c.head_channels = 32;
    c.gate_groups = 4;
    return c;
}

nlohmann::json NetConfig::to_json() const {
    return {{"input_bins", input_bins},       {"stem_channels", stem_channels},
            {"feat_c4", feat_c4},             {"feat_c8", feat_c8},
            {"feat_c16", feat_c16},           {"res_blocks", res_blocks},
            {"hidden", hidden},               {"motion_channels", motion_channels},
            {"head_channels", head_channels}, {"corr_levels", corr_levels},
            {"corr_radius", corr_radius},     {"gate_groups", gate_groups},
            {"use_group_norm", use_group_norm}, {"v_peak", v_peak},
            {"surrogate_slope", surrogate.slope}, {"surrogate_gain", surrogate.gain}};
}

NetConfig NetConfig::from_json(const nlohmann::json& j) {
    NetConfig c;
    c.input_bins = j.at("input_bins");
    c.stem_channels = j.at("stem_channels");
    c.feat_c4 = j.at("feat_c4");
    c.feat_c8 = j.at("feat_c8");
    c.feat_c16 = j.at("feat_c16");
    c.res_blocks = j.at("res_blocks");
    c.hidden = j.at("hidden");
    c.motion_channels = j.at("motion_channels");
    c.head_channels = j.at("head_channels");
    c.corr_levels = j.at("corr_levels");
    c.corr_radius = j.at("corr_radius");
    c.gate_groups = j.at("gate_groups");
    c.use_group_norm = j.at("use_group_norm");
    c.v_peak = j.at("v_peak");
    c.surrogate.slope = j.at("surrogate_slope");
    c.surrogate.gain = j.at("surrogate_gain");
    return c;
}

Conv2d::Conv2d(ParamStore& ps, Initializer& init, const std::string& name, std::size_t c_in, std::size_t c_out,
               std::size_t k, std::size_t stride_, bool with_bias, double gain)
    : stride(stride_), pad(k / 2) {
    const std::size_t fan_in = c_in * k * k;
    weight = ps.add(name + ".weight", init.uniform_fan_in({c_out, c_in, k, k}, fan_in, gain));
    if (with_bias) bias = ps.add(name + ".bias", Tensor({c_out}, 0.0));
}

}  // namespace ssn
