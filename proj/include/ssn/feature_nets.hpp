#pragma once

// Spike feature extraction: a shared-weight feature network for the two
// views and a context network that seeds and conditions the RSNN.

#include <array>

#include "ssn/layers.hpp"
#include "ssn/spike_codec.hpp"

namespace ssn {

/// Scale index used across the update operator: 0 -> 1/4, 1 -> 1/8, 2 -> 1/16.
enum Scale : std::size_t { kQuarter = 0, kEighth = 1, kSixteenth = 2 };
inline constexpr std::array<std::size_t, 3> kScaleFactor{4, 8, 16};

struct FeaturePyramid {
    Var f4, f8, f16;
};

struct ContextScale {
    Var features;                         // backbone features at this scale
    Var c_alpha, c_beta, c_gamma, seed;   // each [hidden, Hs, Ws]
};

struct ContextSet {
    std::array<ContextScale, 3> scales;  // indexed by Scale
};

/// Stream binned into input channels and zero padded to multiples of 16.
struct NetworkInput {
    Tensor bins;  // [input_bins, Hp, Wp]
    std::size_t height = 0, width = 0;  // before padding
};

NetworkInput prepare_input(const SpikeStream& stream, const NetConfig& cfg);

/// stem 7x7/2 -> residual stages at 1/2, 1/4, 1/8, 1/16.
class Backbone {
public:
    Backbone() = default;
    Backbone(ParamStore& ps, Initializer& init, const std::string& prefix, const NetConfig& cfg);

    /// Features at 1/4, 1/8, 1/16.
    std::array<Var, 3> operator()(const Var& input) const;

private:
    struct ResidualBlock {
        Conv2d a, b;
    };
    struct Stage {
        Conv2d down;
        std::vector<ResidualBlock> blocks;
    };
    Var run_stage(const Stage& s, const Var& x) const;

    Stage half_, quarter_, eighth_, sixteenth_;
};

class FeatureNet {
public:
    FeatureNet() = default;
    FeatureNet(ParamStore& ps, Initializer& init, const NetConfig& cfg);

    FeaturePyramid operator()(const NetworkInput& input) const;

private:
    Backbone backbone_;
    Conv2d proj4_;
};

class ContextNet {
public:
    ContextNet() = default;
    ContextNet(ParamStore& ps, Initializer& init, const NetConfig& cfg);

    ContextSet operator()(const NetworkInput& input) const;

private:
    Backbone backbone_;
    std::array<Conv2d, 3> heads_;
    std::size_t hidden_ = 0;
};

/// Throws ShapeError when the padded input is smaller than 32 px on a side.
FeaturePyramid extract_features(const FeatureNet& net, const SpikeStream& stream, const NetConfig& cfg);
ContextSet extract_context(const ContextNet& net, const SpikeStream& stream, const NetConfig& cfg);

}  // namespace ssn
