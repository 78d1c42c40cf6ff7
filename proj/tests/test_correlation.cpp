#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "reference.hpp"
#include "ssn/correlation.hpp"

using namespace ssn;

namespace {

std::vector<Tensor> values(const CorrPyramid& p) {
    std::vector<Tensor> out;
    for (const auto& l : p.levels) out.push_back(l.value());
    return out;
}

}  // namespace

TEST(BuildVolume, OrthonormalFeatures) {
    // Pixel j of both views carries basis vector e_j.
    const std::size_t c = 4;
    Tensor f({c, 1, c});
    for (std::size_t j = 0; j < c; ++j) f.at(j, 0, j) = 1.0;
    Tensor v = build_volume(Var(f), Var(f)).values.value();
    for (std::size_t j = 0; j < c; ++j)
        for (std::size_t k = 0; k < c; ++k) EXPECT_DOUBLE_EQ(v.at(0, j, k), j == k ? 0.5 : 0.0);
}

TEST(BuildVolume, OnesGiveOnes) {
    Tensor f({1, 3, 5}, 1.0);
    const CorrVolume vol = build_volume(Var(f), Var(f));
    for (double v : vol.values.value().vec()) EXPECT_EQ(v, 1.0);
}

TEST(BuildVolume, MatchesTripleLoop) {
    std::mt19937_64 rng(31);
    Tensor l = ref::random_tensor({4, 3, 5}, rng), r = ref::random_tensor({4, 3, 5}, rng);
    EXPECT_LT(ref::max_abs_diff(build_volume(Var(l), Var(r)).values.value(), ref::correlation_volume(l, r)), 1e-12);
}

TEST(BuildVolume, SwapTransposes) {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor f = ref::random_tensor({3, 4, 6}, rng), g = ref::random_tensor({3, 4, 6}, rng);
        Tensor a = build_volume(Var(f), Var(g)).values.value();
        Tensor b = build_volume(Var(g), Var(f)).values.value();
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 6; ++j)
                for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(a.at(i, j, k), b.at(i, k, j), 1e-14);
    }
}

TEST(BuildVolume, ShapeMismatchThrows) {
    EXPECT_THROW(build_volume(Var(Tensor({2, 3, 4})), Var(Tensor({2, 3, 5}))), ShapeError);
}

TEST(BuildVolume, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(33);
    Var l(ref::random_tensor({3, 2, 4}, rng, -2, 2), true), r(ref::random_tensor({3, 2, 4}, rng, -2, 2), true);
    Var probe(ref::random_tensor({2, 4, 4}, rng));
    auto f = [&] { return sum(mul(build_volume(l, r).values, probe)); };
    for (Var* v : {&l, &r}) {
        v->zero_grad();
        backward(f());
        const Tensor g = v->grad();
        const Tensor n = ref::numeric_gradient([&] { return f().value().item(); }, v->mutable_value(), 1e-5);
        EXPECT_LT(ref::rel_error(g, n), 1e-6);
    }
}

TEST(BuildPyramid, PoolsLastAxis) {
    Tensor v({1, 1, 8}, std::vector<double>{1, 3, 5, 7, 9, 11, 13, 15});
    CorrPyramid p = build_pyramid({Var(v)});
    EXPECT_EQ(p.levels[1].value().vec(), (std::vector<double>{2, 6, 10, 14}));
}

TEST(BuildPyramid, LevelWidths) {
    CorrPyramid p = build_pyramid({Var(Tensor({2, 16, 16}))});
    ASSERT_EQ(p.levels.size(), 4u);
    for (std::size_t l = 0; l < 4; ++l) EXPECT_EQ(p.levels[l].shape()[2], 16u >> l);
}

TEST(BuildPyramid, NarrowVolumeThrows) {
    EXPECT_THROW(build_pyramid({Var(Tensor({2, 4, 4}))}), ShapeError);
}

TEST(BuildPyramid, MatchesRepeatedPoolingAndPreservesMean) {
    std::mt19937_64 rng(34);
    Tensor v = ref::random_tensor({3, 16, 16}, rng);
    CorrPyramid p = build_pyramid({Var(v)});
    const auto expect = ref::pyramid(v, 4);
    for (std::size_t l = 0; l < 4; ++l) {
        EXPECT_LT(ref::max_abs_diff(p.levels[l].value(), expect[l]), 1e-12);
        EXPECT_NEAR(p.levels[l].value().sum() / p.levels[l].numel(), v.sum() / v.numel(), 1e-12);
    }
}

TEST(Lookup, ZeroDisparityCenterIsDiagonal) {
    std::mt19937_64 rng(35);
    Tensor v = ref::random_tensor({2, 8, 8}, rng);
    Tensor out = lookup(build_pyramid({Var(v)}, 1), Tensor({2, 8}, 0.0), 1).value();
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(out.at(1, i, j), v.at(i, j, j));
}

TEST(Lookup, DeltaPeaksInCenterChannel) {
    const std::size_t w = 16, d = 3, r = 4;
    Tensor v({1, w, w});
    for (std::size_t j = d; j < w; ++j) v.at(0, j, j - d) = 1.0;
    Tensor out = lookup(build_pyramid({Var(v)}, 1), Tensor({1, w}, static_cast<double>(d)), r).value();
    for (std::size_t j = d; j < w; ++j) {
        EXPECT_EQ(out.at(r, 0, j), 1.0);
        // Closer to the left edge, clamped taps re-read column 0.
        if (j < d + r) continue;
        for (std::size_t t = 0; t < 2 * r + 1; ++t)
            if (t != r) EXPECT_EQ(out.at(t, 0, j), 0.0);
    }
}

TEST(Lookup, FractionalDisparityOnRamp) {
    const std::size_t w = 8;
    Tensor v({1, w, w});
    for (std::size_t j = 0; j < w; ++j)
        for (std::size_t k = 0; k < w; ++k) v.at(0, j, k) = 10.0 * k;
    Tensor out = lookup(build_pyramid({Var(v)}, 1), Tensor({1, w}, 1.5), 1).value();
    EXPECT_DOUBLE_EQ(out.at(1, 0, 5), 0.5 * (30.0 + 40.0));
}

TEST(Lookup, ClampsOutOfRange) {
    Tensor v({1, 8, 8});
    for (std::size_t k = 0; k < 8; ++k) v.at(0, 2, k) = k + 1.0;
    Tensor out = lookup(build_pyramid({Var(v)}, 1), Tensor({1, 8}, 6.0), 2).value();
    // Centre (2 - 6) = -4 lies left of column 0: every tap reads the edge.
    for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(out.at(t, 0, 2), 1.0);
}

TEST(Lookup, MatchesOracleOnRandomFixtures) {
    std::mt19937_64 rng(36);
    std::uniform_real_distribution<double> disp(-3.0, 20.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t h = 1 + rng() % 4, w = 8 + rng() % 17, r = 1 + rng() % 4;
        Tensor v = ref::random_tensor({h, w, w}, rng);
        Tensor d({h, w});
        for (auto& x : d.vec()) x = disp(rng);
        CorrPyramid p = build_pyramid({Var(v)}, 4);
        EXPECT_LT(ref::max_abs_diff(lookup(p, d, r).value(), ref::lookup(ref::pyramid(v, 4), d, r)), 1e-12);
    }
}

TEST(Lookup, LipschitzInDisparity) {
    std::mt19937_64 rng(37);
    Tensor v = ref::random_tensor({1, 16, 16}, rng);
    CorrPyramid p = build_pyramid({Var(v)}, 4);
    const auto levels = values(p);
    double slope = 0.0;  // largest |dv/dk| over every level
    for (const auto& l : levels)
        for (std::size_t j = 0; j < l.dim(1); ++j)
            for (std::size_t k = 0; k + 1 < l.dim(2); ++k) slope = std::max(slope, std::fabs(l.at(0, j, k + 1) - l.at(0, j, k)));
    std::uniform_real_distribution<double> u(0.0, 12.0), du(-0.5, 0.5);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor d1({1, 16}), d2({1, 16});
        for (std::size_t j = 0; j < 16; ++j) {
            d1[j] = u(rng);
            d2[j] = d1[j] + du(rng);
        }
        Tensor a = lookup(p, d1, 2).value(), b = lookup(p, d2, 2).value();
        for (std::size_t c = 0; c < a.dim(0); ++c)
            for (std::size_t j = 0; j < 16; ++j)
                EXPECT_LE(std::fabs(a.at(c, 0, j) - b.at(c, 0, j)), slope * std::fabs(d1[j] - d2[j]) + 1e-12);
    }
}

TEST(Lookup, GradientFlowsIntoVolume) {
    std::mt19937_64 rng(38);
    Var v(ref::random_tensor({2, 8, 8}, rng), true);
    Tensor d = ref::random_tensor({2, 8}, rng, 0.1, 5.0);
    Var probe(ref::random_tensor({3 * 4, 2, 8}, rng));
    auto f = [&] { return sum(mul(lookup(build_pyramid({v}, 4), d, 1), probe)); };
    v.zero_grad();
    backward(f());
    const Tensor g = v.grad();
    const Tensor n = ref::numeric_gradient([&] { return f().value().item(); }, v.mutable_value(), 1e-5);
    EXPECT_LT(ref::rel_error(g, n), 1e-6);
}

TEST(Lookup, RadiusZeroThrows) {
    EXPECT_THROW(lookup(build_pyramid({Var(Tensor({1, 8, 8}))}, 1), Tensor({1, 8}), 0), std::invalid_argument);
}
