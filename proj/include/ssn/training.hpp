#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <random>

#include "ssn/objective.hpp"

namespace ssn {

/// One rectified training pair with disparity ground truth.
struct Sample {
    std::string name;
    SpikeStream left, right;
    Tensor gt;                       // [H,W], left view
    std::optional<Tensor> gt_right;  // [H,W], right view; needed for horizontal flips
};

/// Horizontal flip of a rectified pair: mirror both views and swap them, so
/// the mirrored right view becomes the new reference. Needs gt_right.
Sample hflip(const Sample& s);
Sample vflip(const Sample& s);

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-5;
};

class AdamW {
public:
    AdamW(ParamStore& params, AdamWConfig cfg = {});
    /// Applies one update with the gradients currently stored in params.
    void step(double lr);
    std::size_t steps_taken() const { return t_; }

private:
    ParamStore* params_;
    AdamWConfig cfg_;
    std::vector<Tensor> m_, v_;
    std::size_t t_ = 0;
};

/// Linear warmup from lr_max/div_start to lr_max over warmup_frac of the
/// run, then cosine decay to lr_max*final_frac.
struct OneCycle {
    double lr_max = 2e-4;
    std::size_t total_steps = 1;
    double warmup_frac = 0.05;
    double div_start = 25.0;
    double final_frac = 1e-4;

    double lr(std::size_t step) const;
    std::size_t peak_step() const;
};

/// Clamps every gradient element to [-limit, limit]; returns how many were clipped.
std::size_t clip_gradients(ParamStore& params, double limit);

struct TrainConfig {
    std::size_t steps = 500;
    std::size_t batch_size = 1;  // samples whose gradients are averaged per update
    std::size_t iterations = 16;
    double lr_max = 2e-4;
    double warmup_frac = 0.05;
    double clip = 1.0;
    AdamWConfig adam{};
    LossConfig loss{};
    bool hflip = false;
    bool vflip = false;
    std::uint64_t seed = 0;
    std::filesystem::path dump_dir = ".";
};

struct TrainRecord {
    std::size_t step;
    std::string sample;
    double lr, loss, stereo, rate, voltage;
    std::size_t clipped;
};

/// Raised when the loss or an intermediate becomes non-finite. A diagnostic
/// dump has been written to dump_path.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::filesystem::path dump)
        : std::runtime_error(what), dump_path(std::move(dump)) {}
    std::filesystem::path dump_path;
};

using TrainObserver = std::function<void(const TrainRecord&)>;

/// Samples are visited in a per-epoch shuffled order that depends only on
/// cfg.seed. One record per optimizer step; losses are batch means.
std::vector<TrainRecord> train(SpikeStereoNet& net, const std::vector<Sample>& data, const TrainConfig& cfg,
                               const TrainObserver& observer = {});

/// Seeded Fisher-Yates permutation of 0..n-1 (portable across standard libraries).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng);

}  // namespace ssn
