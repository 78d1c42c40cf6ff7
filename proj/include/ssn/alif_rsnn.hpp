#pragma once

// Three-layer recurrent spiking update operator built from adaptive leaky
// integrate-and-fire (ALIF) neurons with convolutional gating:
//
//   alpha, beta, gamma = sigmoid(GN(conv([s_{t-1}, x_t])) + context)
//   h_t   = alpha * v_{t-1} + (1 - alpha) * (W_rec s_{t-1} + W_f s_t^{below})
//   v_th  = beta * v_peak
//   s_t   = step(h_t - v_th)
//   v_t   = h_t - gamma * s_t * v_th

#include <array>
#include <optional>

#include "ssn/feature_nets.hpp"
#include "ssn/layers.hpp"

namespace ssn {

struct AlifLayerState {
    Var v;  // membrane potential [hidden, Hs, Ws]
    Var s;  // binary spikes, same shape
};

struct GateTensors {
    Var alpha, beta, gamma;  // each strictly inside (0,1)
};

struct AlifLayerParams {
    Conv2d gates;          // [3*hidden, hidden + x_channels, 3, 3]
    Var gn_gamma, gn_beta;  // [3*hidden]
    Var w_rec;             // [hidden, hidden, 3, 3]
    Var w_f;               // [hidden, hidden, 3, 3]; undefined on the coarsest layer
    double v_peak = 1.0;
    std::size_t gate_groups = 8;

    std::size_t hidden() const { return w_rec.shape()[0]; }
};

AlifLayerParams make_alif_layer(ParamStore& ps, Initializer& init, const std::string& prefix, std::size_t hidden,
                                std::size_t x_channels, bool has_feedforward, const NetConfig& cfg);

/// Per-gate group norm uses p.gate_groups groups inside each gate's channels.
GateTensors compute_gates(const AlifLayerState& state, const Var& x, const ContextScale& ctx,
                          const AlifLayerParams& p, bool use_gn);

struct AlifStep {
    AlifLayerState state;
    Var h;     // pre-reset potential
    Var v_th;  // firing threshold
};

/// below_spikes must already be at this layer's resolution; undefined means
/// no feedforward input.
AlifStep alif_step(const AlifLayerState& state, const Var& below_spikes, const GateTensors& gates,
                   const AlifLayerParams& p, const Surrogate& sg);

/// s_0 = 0, v_0 = tanh(seed).
AlifLayerState initial_state(const ContextScale& ctx);

struct RsnnParams {
    std::array<AlifLayerParams, 3> layers;  // indexed by Scale
};

/// Everything one rsnn_update produced, per scale.
struct RsnnStepTrace {
    std::array<AlifStep, 3> steps;
    std::array<GateTensors, 3> gates;
};

using RsnnStates = std::array<AlifLayerState, 3>;

/// Coarse to fine: 1/16, then 1/8, then 1/4. Layer inputs x_t:
///   1/16: [context features, pooled 1/8 spikes from the previous iteration]
///   1/8 : [context features, pooled 1/4 spikes from the previous iteration]
///   1/4 : motion features
/// The feedforward term of a layer reads the freshly emitted spikes of the
/// next coarser layer, upsampled.
RsnnStates rsnn_update(const RsnnStates& states, const ContextSet& ctx, const Var& motion, const RsnnParams& p,
                       const Surrogate& sg, bool use_gn, RsnnStepTrace* trace = nullptr);

/// Encodes the local cost lookup and the current disparity into the 1/4
/// layer's input.
class MotionEncoder {
public:
    MotionEncoder() = default;
    MotionEncoder(ParamStore& ps, Initializer& init, const NetConfig& cfg);

    /// corr [(2r+1)*levels, H4, W4], disparity [H4, W4] (constant).
    Var operator()(const Var& corr, const Tensor& disparity) const;

private:
    Conv2d corr1_, corr2_, disp1_, disp2_, out_;
};

struct UpdateBlock {
    MotionEncoder motion;
    RsnnParams rsnn;

    UpdateBlock() = default;
    UpdateBlock(ParamStore& ps, Initializer& init, const NetConfig& cfg);
};

}  // namespace ssn
