#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "reference.hpp"
#include "ssn/objective.hpp"

using namespace ssn;

namespace {

Var field(std::size_t h, std::size_t w, double v) { return Var(Tensor({1, h, w}, v)); }

}  // namespace

TEST(IterationWeights, ClosedFormTable) {
    const auto w = iteration_weights(16, 0.9);
    ASSERT_EQ(w.size(), 16u);
    for (std::size_t t = 1; t <= 16; ++t) EXPECT_DOUBLE_EQ(w[t - 1], std::pow(0.9, 16.0 - t));
    EXPECT_EQ(w.back(), 1.0);
}

TEST(IterationWeights, StrictlyIncreasingForEtaBelowOne) {
    for (double eta : {0.1, 0.5, 0.9, 0.99})
        for (std::size_t T : {2u, 5u, 16u}) {
            const auto w = iteration_weights(T, eta);
            for (std::size_t t = 1; t < T; ++t) EXPECT_LT(w[t - 1], w[t]);
        }
}

TEST(StereoLoss, SingleIterationConstantError) {
    Tensor gt({3, 4}, 5.0);
    EXPECT_DOUBLE_EQ(stereo_loss({field(3, 4, 3.0)}, gt, 0.9).value().item(), 2.0);
}

TEST(StereoLoss, TwoIterationHandExample) {
    Tensor gt({2, 2}, 4.0);
    EXPECT_EQ(stereo_loss({field(2, 2, 3.0), field(2, 2, 5.0)}, gt, 0.9).value().item(), 1.9);
}

TEST(StereoLoss, PerfectPredictionIsZero) {
    std::mt19937_64 rng(1);
    Tensor gt = ref::random_tensor({4, 5}, rng, 1, 10);
    Var p(gt.reshaped({1, 4, 5}));
    EXPECT_EQ(stereo_loss({p, p, p}, gt, 0.9).value().item(), 0.0);
}

TEST(StereoLoss, ZeroIffAllIterationsMatch) {
    Tensor gt({2, 2}, 4.0);
    gt[3] = 0.0;  // invalid pixel: its prediction is ignored
    Tensor exact({1, 2, 2}, 4.0);
    exact[3] = 100.0;
    EXPECT_EQ(stereo_loss({Var(exact), Var(exact)}, gt, 0.5).value().item(), 0.0);
    Tensor off = exact;
    off[0] = 4.001;
    EXPECT_GT(stereo_loss({Var(exact), Var(off)}, gt, 0.5).value().item(), 0.0);
    EXPECT_GT(stereo_loss({Var(off), Var(exact)}, gt, 0.5).value().item(), 0.0);
}

TEST(StereoLoss, MasksInvalidPixels) {
    Tensor gt({1, 4}, std::vector<double>{2.0, 0.0, -1.0, std::numeric_limits<double>::quiet_NaN()});
    // Only pixel 0 is valid: |2 - 5| = 3.
    EXPECT_DOUBLE_EQ(stereo_loss({field(1, 4, 5.0)}, gt, 0.9).value().item(), 3.0);
}

TEST(StereoLoss, NoValidPixelsThrows) {
    EXPECT_THROW(stereo_loss({field(2, 2, 1.0)}, Tensor({2, 2}, 0.0), 0.9), std::invalid_argument);
}

TEST(StereoLoss, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(2);
    Tensor gt = ref::random_tensor({3, 4}, rng, 1, 5);
    gt[5] = 0.0;
    Var a(ref::random_tensor({1, 3, 4}, rng, 0, 6), true), b(ref::random_tensor({1, 3, 4}, rng, 0, 6), true);
    auto f = [&] { return stereo_loss({a, b}, gt, 0.8); };
    for (Var* v : {&a, &b}) {
        v->zero_grad();
        backward(f());
        const Tensor g = v->grad();
        const Tensor n = ref::numeric_gradient([&] { return f().value().item(); }, v->mutable_value(), 1e-6);
        EXPECT_LT(ref::rel_error(g, n), 1e-6);
    }
}

TEST(RateReg, AtTargetIsMinimum) {
    Var r(Tensor({5}, 0.1), true);
    Var loss = rate_reg(r, 0.1);
    backward(loss);
    EXPECT_EQ(loss.value().item(), 0.0);
    EXPECT_EQ(r.grad().max_abs(), 0.0);
}

TEST(RateReg, WorkedExample) {
    EXPECT_NEAR(rate_reg(Var(Tensor({2}, std::vector<double>{0.0, 0.2})), 0.1).value().item(), 0.02, 1e-17);
}

TEST(VoltageReg, ZeroAndSum) {
    EXPECT_EQ(voltage_reg({Var(Tensor({3}, 0.0)), Var(Tensor({3}, 0.0))}).value().item(), 0.0);
    EXPECT_EQ(voltage_reg({Var(Tensor({2}, std::vector<double>{1, 2})), Var(Tensor({1}, 3.0))}).value().item(), 14.0);
}

TEST(Metrics, WorkedExample) {
    Tensor gt({1, 4}, 10.0);
    Tensor pred({1, 4}, std::vector<double>{10.5, 8.5, 12.5, 6.5});
    Metrics m = metrics(pred, gt);
    EXPECT_EQ(m.bad1, 75.0);
    EXPECT_EQ(m.bad2, 50.0);
    EXPECT_EQ(m.bad3, 25.0);
    EXPECT_EQ(m.avg_err, 2.0);
    EXPECT_EQ(m.valid, 4u);
}

TEST(Metrics, PerfectPrediction) {
    Tensor gt({3, 3}, 7.0);
    Metrics m = metrics(gt, gt);
    EXPECT_EQ(m.bad1 + m.bad2 + m.bad3 + m.avg_err, 0.0);
}

TEST(Metrics, ThresholdIsStrict) {
    Tensor gt({1, 1}, 5.0);
    EXPECT_EQ(metrics(Tensor({1, 1}, 7.0), gt).bad2, 0.0);
    EXPECT_EQ(metrics(Tensor({1, 1}, 7.0), gt).bad1, 100.0);
}

TEST(Metrics, NoValidPixelsThrows) {
    EXPECT_THROW(metrics(Tensor({2, 2}, 1.0), Tensor({2, 2}, -1.0)), std::invalid_argument);
}

TEST(Metrics, MatchesBruteForceAndOrdering) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor gt = ref::random_tensor({8, 9}, rng, -2, 30);
        Tensor pred = gt;
        for (auto& v : pred.vec()) v += (u(rng) - 0.5) * 10.0;
        // Exact-threshold errors on a few pixels.
        pred[0] = gt[0] + 1.0;
        pred[1] = gt[1] - 3.0;
        gt[2] = std::numeric_limits<double>::infinity();
        Metrics a = metrics(pred, gt), b = ref::metrics(pred, gt);
        EXPECT_EQ(a.bad1, b.bad1);
        EXPECT_EQ(a.bad2, b.bad2);
        EXPECT_EQ(a.bad3, b.bad3);
        EXPECT_EQ(a.avg_err, b.avg_err);
        EXPECT_EQ(a.valid, b.valid);
        EXPECT_GE(a.bad1, a.bad2);
        EXPECT_GE(a.bad2, a.bad3);
        EXPECT_LE(a.bad1, 100.0);
        EXPECT_GE(a.bad3, 0.0);
    }
}

TEST(LossConfig, Validation) {
    LossConfig c;
    EXPECT_NO_THROW(c.validate());
    c.eta = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.lambda_v = -1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.r0 = 1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}
