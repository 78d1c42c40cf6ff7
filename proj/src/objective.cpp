#include "ssn/objective.hpp"

#include <cmath>

namespace ssn {

void LossConfig::validate() const {
    if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("loss eta must lie in (0,1]");
    if (lambda_f < 0.0 || lambda_v < 0.0) throw std::invalid_argument("loss lambdas must be non-negative");
    if (!(r0 > 0.0 && r0 < 1.0)) throw std::invalid_argument("target firing rate r0 must lie in (0,1)");
}

std::vector<std::uint8_t> valid_mask(const Tensor& gt) {
    std::vector<std::uint8_t> m(gt.numel());
    for (std::size_t i = 0; i < gt.numel(); ++i) m[i] = std::isfinite(gt[i]) && gt[i] > 0.0;
    return m;
}

std::vector<double> iteration_weights(std::size_t iterations, double eta) {
    std::vector<double> w(iterations);
    for (std::size_t t = 1; t <= iterations; ++t) w[t - 1] = std::pow(eta, static_cast<double>(iterations - t));
    return w;
}

Var stereo_loss(const std::vector<Var>& disparities, const Tensor& gt, double eta) {
    if (disparities.empty()) throw std::invalid_argument("stereo_loss needs at least one prediction");
    const auto mask = valid_mask(gt);
    std::size_t n_valid = 0;
    for (auto m : mask) n_valid += m;
    if (n_valid == 0) throw std::invalid_argument("stereo_loss: ground truth has no valid pixels");

    Tensor mask_t(gt.shape());
    Tensor gt_clean(gt.shape());
    for (std::size_t i = 0; i < gt.numel(); ++i) {
        mask_t[i] = mask[i];
        gt_clean[i] = mask[i] ? gt[i] : 0.0;
    }
    const Var mask_v(mask_t), gt_v(gt_clean);
    const auto weights = iteration_weights(disparities.size(), eta);
    Var total;
    for (std::size_t t = 0; t < disparities.size(); ++t) {
        if (disparities[t].numel() != gt.numel())
            throw ShapeError("prediction " + shape_str(disparities[t].shape()) + " does not match gt " +
                             shape_str(gt.shape()));
        Var pred = reshape(disparities[t], gt.shape());
        Var term = scale(sum(mul(abs(sub(gt_v, pred)), mask_v)), weights[t] / static_cast<double>(n_valid));
        total = total.defined() ? add(total, term) : term;
    }
    return total;
}

Var rate_reg(const Var& rates, double r0) { return sum(square(add_scalar(rates, -r0))); }

Var voltage_reg(const std::vector<Var>& voltages) {
    if (voltages.empty()) return Var(Tensor::scalar(0.0));
    Var total;
    for (const auto& v : voltages) {
        Var term = sum(square(v));
        total = total.defined() ? add(total, term) : term;
    }
    return total;
}

std::array<Var, 3> firing_rates(const Rollout& r) {
    std::array<Var, 3> rates;
    const double inv_t = 1.0 / static_cast<double>(r.iterations());
    for (std::size_t s = 0; s < 3; ++s) {
        Var acc;
        for (const auto& sp : r.spikes) acc = acc.defined() ? add(acc, sp[s]) : sp[s];
        rates[s] = scale(acc, inv_t);
    }
    return rates;
}

LossTerms composite_loss(const Rollout& rollout, const Tensor& gt, const LossConfig& cfg) {
    cfg.validate();
    LossTerms out;
    Var stereo = stereo_loss(rollout.disparities, gt, cfg.eta);
    out.stereo = stereo.value().item();
    Var total = stereo;

    std::size_t neurons = 0;
    for (const auto& v : rollout.voltages.front()) neurons += v.numel();
    const double steps = static_cast<double>(rollout.iterations());
    const bool mean = cfg.reduction == RegReduction::Mean;

    if (cfg.lambda_f > 0.0) {
        Var rate;
        for (const auto& r : firing_rates(rollout)) {
            Var term = rate_reg(r, cfg.r0);
            rate = rate.defined() ? add(rate, term) : term;
        }
        if (mean) rate = scale(rate, 1.0 / static_cast<double>(neurons));
        out.rate = rate.value().item();
        total = add(total, scale(rate, cfg.lambda_f));
    }
    if (cfg.lambda_v > 0.0) {
        std::vector<Var> all;
        for (const auto& step : rollout.voltages) all.insert(all.end(), step.begin(), step.end());
        Var volt = voltage_reg(all);
        if (mean) volt = scale(volt, 1.0 / (static_cast<double>(neurons) * steps));
        out.voltage = volt.value().item();
        total = add(total, scale(volt, cfg.lambda_v));
    }
    out.total = total;
    return out;
}

Metrics metrics(const Tensor& pred, const Tensor& gt) {
    if (pred.numel() != gt.numel())
        throw ShapeError("metrics: prediction " + shape_str(pred.shape()) + " vs gt " + shape_str(gt.shape()));
    const auto mask = valid_mask(gt);
    Metrics m;
    std::size_t b1 = 0, b2 = 0, b3 = 0;
    double err_sum = 0.0;
    for (std::size_t i = 0; i < gt.numel(); ++i) {
        if (!mask[i]) continue;
        const double e = std::abs(pred[i] - gt[i]);
        ++m.valid;
        err_sum += e;
        b1 += e > 1.0;
        b2 += e > 2.0;
        b3 += e > 3.0;
    }
    if (m.valid == 0) throw std::invalid_argument("metrics: ground truth has no valid pixels");
    const double n = static_cast<double>(m.valid);
    m.bad1 = 100.0 * static_cast<double>(b1) / n;
    m.bad2 = 100.0 * static_cast<double>(b2) / n;
    m.bad3 = 100.0 * static_cast<double>(b3) / n;
    m.avg_err = err_sum / n;
    return m;
}

}  // namespace ssn
