#pragma once

#include <vector>

#include "ssn/model.hpp"

namespace ssn {

/// How the regularizers aggregate over neurons (and steps for the voltage term).
enum class RegReduction { Sum, Mean };

struct LossConfig {
    double eta = 0.9;
    double lambda_f = 1e-2;
    double lambda_v = 1e-4;
    double r0 = 0.1;
    RegReduction reduction = RegReduction::Mean;

    void validate() const;
};

/// gt > 0 and finite.
std::vector<std::uint8_t> valid_mask(const Tensor& gt);

/// eta^(T-t) for t = 1..T.
std::vector<double> iteration_weights(std::size_t iterations, double eta);

/// sum_t eta^(T-t) * mean over valid pixels of |d_gt - d_t|. Throws if no
/// pixel is valid. Predictions are [1,H,W] or [H,W]; gt is [H,W].
Var stereo_loss(const std::vector<Var>& disparities, const Tensor& gt, double eta);

/// sum_i (r_i - r0)^2
Var rate_reg(const Var& rates, double r0);
/// sum_i sum_t v_i(t)^2
Var voltage_reg(const std::vector<Var>& voltages);

/// Per-neuron firing rates over the rollout, one Var per scale.
std::array<Var, 3> firing_rates(const Rollout& rollout);

struct LossTerms {
    Var total;
    double stereo = 0, rate = 0, voltage = 0;
};

LossTerms composite_loss(const Rollout& rollout, const Tensor& gt, const LossConfig& cfg);

struct Metrics {
    double bad1 = 0, bad2 = 0, bad3 = 0;  // percent of valid pixels with |err| > tau
    double avg_err = 0;                   // mean |err| in px
    std::size_t valid = 0;
};

/// Errors on pixels where gt is valid. Throws if none.
Metrics metrics(const Tensor& pred, const Tensor& gt);

}  // namespace ssn
