#pragma once

#include <filesystem>

#include "ssn/correlation.hpp"
#include "ssn/refinement.hpp"

namespace ssn {

/// Quarter-resolution 1/4 layer internals at one iteration, for analysis.
struct DynamicsSnapshot {
    Tensor h, v, s, v_th, alpha, beta, gamma;
};

struct Rollout {
    std::vector<Var> disparities;  // full resolution [1,H,W], one per iteration
    std::vector<Var> quarter;      // accumulated d_t at 1/4 [1,H4,W4]
    std::vector<Var> deltas;       // residuals [1,H4,W4]
    std::vector<std::array<Var, 3>> spikes;    // [iteration][scale]
    std::vector<std::array<Var, 3>> voltages;  // [iteration][scale]
    std::vector<DynamicsSnapshot> snapshots;   // filled when recording

    std::size_t iterations() const { return disparities.size(); }
    /// Final full-resolution field, projected to d >= 0.
    DisparityField final_disparity() const;
};

class SpikeStereoNet {
public:
    SpikeStereoNet(NetConfig cfg, std::uint64_t seed);
    // Sub-networks hold handles into params_, so copies would alias.
    SpikeStereoNet(const SpikeStereoNet&) = delete;
    SpikeStereoNet& operator=(const SpikeStereoNet&) = delete;
    SpikeStereoNet(SpikeStereoNet&&) = default;
    SpikeStereoNet& operator=(SpikeStereoNet&&) = default;

    /// d_0 = 0 at 1/4. Each iteration: lookup -> motion features ->
    /// rsnn_update -> residual -> d += delta -> convex upsample.
    Rollout iterate(const SpikeStream& left, const SpikeStream& right, std::size_t iterations,
                    bool record_dynamics = false) const;

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const NetConfig& config() const { return cfg_; }
    const UpdateBlock& update_block() const { return update_; }
    const FeatureNet& feature_net() const { return fnet_; }
    const ContextNet& context_net() const { return cnet_; }
    RefinementHead& head() { return head_; }

    void save(const std::filesystem::path& path, nlohmann::json meta = nlohmann::json::object()) const;
    static SpikeStereoNet load(const std::filesystem::path& path);

private:
    NetConfig cfg_;
    ParamStore params_;
    FeatureNet fnet_;
    ContextNet cnet_;
    UpdateBlock update_;
    RefinementHead head_;
};

}  // namespace ssn
