#pragma once

#include <string>

#include "ssn/ops.hpp"
#include "ssn/params.hpp"

namespace ssn {

/// Architecture hyperparameters shared by every network component.
struct NetConfig {
    std::size_t input_bins = 10;  // spike frames summed into this many input channels
    std::size_t stem_channels = 64;
    std::size_t feat_c4 = 96;
    std::size_t feat_c8 = 128;
    std::size_t feat_c16 = 160;
    std::size_t res_blocks = 2;
    std::size_t hidden = 128;  // RSNN neurons per pixel and context channels
    std::size_t motion_channels = 64;
    std::size_t head_channels = 128;
    std::size_t corr_levels = 4;
    std::size_t corr_radius = 4;
    std::size_t gate_groups = 8;  // group-norm groups per gate
    bool use_group_norm = true;
    double v_peak = 1.0;
    Surrogate surrogate{};

    static NetConfig full() { return {}; }
    /// Narrow widths for single-core desk-scale runs.
    static NetConfig desk();

    nlohmann::json to_json() const;
    static NetConfig from_json(const nlohmann::json& j);
};

struct Conv2d {
    Var weight;
    Var bias;  // may be undefined
    std::size_t stride = 1;
    std::size_t pad = 0;

    Conv2d() = default;
    Conv2d(ParamStore& ps, Initializer& init, const std::string& name, std::size_t c_in, std::size_t c_out,
           std::size_t k, std::size_t stride = 1, bool with_bias = true, double gain = 1.0);

    Var operator()(const Var& x) const { return conv2d(x, weight, bias, stride, pad); }
};

/// Instance normalization (one group per channel, no affine).
inline Var instance_norm(const Var& x) { return group_norm(x, x.shape()[0], 1e-5); }

}  // namespace ssn
