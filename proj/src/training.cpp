#include "ssn/training.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace ssn {

namespace {

SpikeStream mirror(const SpikeStream& s, bool horizontal) {
    SpikeStream out(s.n, s.h, s.w);
    for (std::size_t t = 0; t < s.n; ++t)
        for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x)
                out.at(t, y, x) = horizontal ? s.at(t, y, s.w - 1 - x) : s.at(t, s.h - 1 - y, x);
    return out;
}

Tensor mirror(const Tensor& m, bool horizontal) {
    const std::size_t h = m.shape()[0], w = m.shape()[1];
    Tensor out(m.shape());
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            out[y * w + x] = horizontal ? m[y * w + (w - 1 - x)] : m[(h - 1 - y) * w + x];
    return out;
}

}  // namespace

Sample hflip(const Sample& s) {
    if (!s.gt_right) throw std::invalid_argument("hflip of sample '" + s.name + "' needs right-view ground truth");
    return {s.name + "/hflip", mirror(s.right, true), mirror(s.left, true), mirror(*s.gt_right, true),
            mirror(s.gt, true)};
}

Sample vflip(const Sample& s) {
    std::optional<Tensor> gr;
    if (s.gt_right) gr = mirror(*s.gt_right, false);
    return {s.name + "/vflip", mirror(s.left, false), mirror(s.right, false), mirror(s.gt, false), gr};
}

AdamW::AdamW(ParamStore& params, AdamWConfig cfg) : params_(&params), cfg_(cfg) {
    for (const auto& [name, p] : params.entries()) {
        m_.emplace_back(p.shape(), 0.0);
        v_.emplace_back(p.shape(), 0.0);
    }
}

void AdamW::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const auto& entries = params_->entries();
    for (std::size_t k = 0; k < entries.size(); ++k) {
        Var p = entries[k].second;
        const Tensor& g = p.grad();
        Tensor& w = p.mutable_value();
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (std::size_t i = 0; i < w.numel(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mh = m[i] / bc1, vh = v[i] / bc2;
            w[i] -= lr * (mh / (std::sqrt(vh) + cfg_.eps) + cfg_.weight_decay * w[i]);
        }
    }
}

double OneCycle::lr(std::size_t step) const {
    const std::size_t peak = peak_step();
    const double lo = lr_max / div_start;
    if (step < peak) return lo + (lr_max - lo) * static_cast<double>(step) / static_cast<double>(peak);
    const std::size_t span = total_steps > peak + 1 ? total_steps - 1 - peak : 1;
    const double frac = std::min(1.0, static_cast<double>(step - peak) / static_cast<double>(span));
    const double lr_min = lr_max * final_frac;
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

std::size_t OneCycle::peak_step() const {
    return static_cast<std::size_t>(std::llround(warmup_frac * static_cast<double>(total_steps)));
}

std::size_t clip_gradients(ParamStore& params, double limit) {
    std::size_t clipped = 0;
    for (const auto& [name, p] : params.entries()) {
        Var v = p;
        if (!v.node()->grad.numel()) continue;
        for (auto& g : v.node()->grad.vec()) {
            if (g > limit) g = limit, ++clipped;
            else if (g < -limit) g = -limit, ++clipped;
        }
    }
    return clipped;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

namespace {

std::filesystem::path write_dump(const TrainConfig& cfg, const ParamStore& params, const TrainRecord& at,
                                 const std::vector<TrainRecord>& history, const std::string& reason) {
    nlohmann::json j;
    j["reason"] = reason;
    j["step"] = at.step;
    j["sample"] = at.sample;
    j["lr"] = at.lr;
    nlohmann::json recent = nlohmann::json::array();
    const std::size_t from = history.size() > 10 ? history.size() - 10 : 0;
    for (std::size_t i = from; i < history.size(); ++i)
        recent.push_back({{"step", history[i].step}, {"loss", history[i].loss}});
    j["recent"] = recent;
    nlohmann::json ps = nlohmann::json::array();
    for (const auto& [name, p] : params.entries()) {
        const Tensor& g = p.node()->grad;
        ps.push_back({{"name", name},
                      {"max_abs", p.value().max_abs()},
                      {"finite", p.value().all_finite()},
                      {"grad_finite", g.numel() == 0 || g.all_finite()}});
    }
    j["params"] = ps;
    std::filesystem::create_directories(cfg.dump_dir);
    const auto path = cfg.dump_dir / "divergence.json";
    std::ofstream(path) << j.dump(2) << '\n';
    return path;
}

}  // namespace

std::vector<TrainRecord> train(SpikeStereoNet& net, const std::vector<Sample>& data, const TrainConfig& cfg,
                               const TrainObserver& observer) {
    if (data.empty()) throw std::invalid_argument("train needs at least one sample");
    if (cfg.steps == 0) throw std::invalid_argument("train needs steps >= 1");
    if (cfg.batch_size == 0) throw std::invalid_argument("train needs batch_size >= 1");
    cfg.loss.validate();
    if (cfg.hflip)
        for (const auto& s : data)
            if (!s.gt_right) throw std::invalid_argument("hflip enabled but sample '" + s.name + "' lacks gt_right");

    ParamStore& params = net.params();
    AdamW opt(params, cfg.adam);
    const OneCycle sched{cfg.lr_max, cfg.steps, cfg.warmup_frac};
    std::mt19937_64 rng(cfg.seed);

    std::vector<TrainRecord> history;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        TrainRecord rec{step, "", sched.lr(step), 0, 0, 0, 0, 0};
        params.zero_grad();
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            if (cursor == order.size()) {
                order = shuffled_indices(data.size(), rng);
                cursor = 0;
            }
            const Sample* sample = &data[order[cursor++]];
            // Both coins are drawn every time so the stream of draws does not
            // depend on which augmentations are enabled.
            const bool do_h = (rng() >> 63) != 0;
            const bool do_v = (rng() >> 63) != 0;
            Sample aug;
            if ((cfg.hflip && do_h) || (cfg.vflip && do_v)) {
                aug = *sample;
                if (cfg.hflip && do_h) aug = hflip(aug);
                if (cfg.vflip && do_v) aug = vflip(aug);
                sample = &aug;
            }
            rec.sample += (b ? ";" : "") + sample->name;
            try {
                const Rollout r = net.iterate(sample->left, sample->right, cfg.iterations);
                const LossTerms terms = composite_loss(r, sample->gt, cfg.loss);
                rec.loss += inv_batch * terms.total.value().item();
                rec.stereo += inv_batch * terms.stereo;
                rec.rate += inv_batch * terms.rate;
                rec.voltage += inv_batch * terms.voltage;
                backward(cfg.batch_size == 1 ? terms.total : scale(terms.total, inv_batch));
                for (const auto& [name, p] : params.entries())
                    if (p.node()->grad.numel() && !p.node()->grad.all_finite())
                        throw NumericError("non-finite gradient in " + name);
            } catch (const NumericError& e) {
                const auto dump = write_dump(cfg, params, rec, history, e.what());
                throw DivergenceError("training diverged at step " + std::to_string(step) + ": " + e.what() +
                                          " (dump: " + dump.string() + ")",
                                      dump);
            }
        }
        rec.clipped = clip_gradients(params, cfg.clip);
        opt.step(rec.lr);
        history.push_back(rec);
        if (observer) observer(rec);
    }
    return history;
}

}  // namespace ssn
