#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "reference.hpp"
#include "ssn/dynamics.hpp"

using namespace ssn;

namespace {

Eigen::VectorXd to_vec(const Tensor& t) {
    return Eigen::Map<const Eigen::VectorXd>(t.vec().data(), static_cast<Eigen::Index>(t.numel()));
}

Tensor to_tensor(const Eigen::VectorXd& v, Shape shape) {
    return Tensor(std::move(shape), std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (auto& x : v) x = nd(rng);
    return v;
}

double dense_sigma(const Eigen::MatrixXd& m) {
    return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()[0];
}

TheoryParams zero_kernel(double alpha, std::size_t c) {
    TheoryParams p;
    p.alpha = alpha;
    p.w_rec = Tensor({c, c, 3, 3}, 0.0);
    return p;
}

}  // namespace

TEST(LipschitzBound, WorkedExample) {
    EXPECT_DOUBLE_EQ(lipschitz_bound(0.5, 0.5, 0.5, 1.0, 1.0), 0.625);
}

TEST(LipschitzBound, SilentGateLeavesLeak) {
    for (double a : {0.1, 0.5, 0.9}) EXPECT_EQ(lipschitz_bound(a, 0.7, 0.0, 1.3, 5.0), a);
}

TEST(LipschitzBound, MonotoneInKernelNorm) {
    double prev = 0.0;
    for (double w = 0.0; w < 4.0; w += 0.25) {
        const double l = lipschitz_bound(0.3, 0.6, 0.4, 1.2, w);
        EXPECT_GE(l, prev);
        prev = l;
    }
}

TEST(ConvOperator, MatchesReferenceConvolutionAndAdjoint) {
    std::mt19937_64 rng(1);
    const Tensor k = ref::random_tensor({3, 2, 3, 3}, rng);
    const LinearOperator op = conv_operator(k, 4, 5);
    ASSERT_EQ(op.rows, 60u);
    ASSERT_EQ(op.cols, 40u);
    const Tensor x = ref::random_tensor({2, 4, 5}, rng);
    Eigen::VectorXd y;
    op.apply(to_vec(x), y);
    EXPECT_LT(ref::max_abs_diff(to_tensor(y, {3, 4, 5}), ref::conv2d(x, k, nullptr, 1, 1)), 1e-12);

    const Eigen::MatrixXd a = op.dense();
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::VectorXd u = random_vec(40, rng), v = random_vec(60, rng);
        Eigen::VectorXd au, atv;
        op.apply(u, au);
        op.apply_transpose(v, atv);
        EXPECT_NEAR(au.dot(v), u.dot(atv), 1e-10);
        EXPECT_LT((atv - a.transpose() * v).norm(), 1e-12);
    }
}

TEST(ConvOperator, RejectsEvenKernel) {
    EXPECT_THROW(conv_operator(Tensor({1, 1, 2, 2}), 4, 4), ShapeError);
}

TEST(SpectralNorm, MatchesDenseSvd) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        const LinearOperator op = conv_operator(ref::random_tensor({3, 3, 3, 3}, rng), 5, 4);
        const SpectralNorm s = spectral_norm(op, 2000, 1e-13);
        const double exact = dense_sigma(op.dense());
        // Power iteration approaches from below.
        EXPECT_LE(s.sigma, exact * (1 + 1e-12));
        EXPECT_NEAR(s.sigma / exact, 1.0, 1e-6);
    }
}

TEST(TheoryMap, ZeroKernelContractsByLeak) {
    TheoryMap map(zero_kernel(0.37, 2), 3, 3);
    EXPECT_DOUBLE_EQ(map.lipschitz(), 0.37);
    const ContractionReport r = contraction_test(map, 50, 3);
    for (double q : r.ratios) EXPECT_NEAR(q, 0.37, 1e-12);
    const Spectrum s = eigen_spectrum(map.jacobian(Eigen::VectorXd::Ones(18)));
    ASSERT_EQ(s.eigenvalues.size(), 18u);
    for (const auto& e : s.eigenvalues) EXPECT_NEAR(std::abs(e - 0.37), 0.0, 1e-12);
}

TEST(TheoryMap, JacobianMatchesFiniteDifferences) {
    TheoryParams p = random_theory_params(4, 2, 3, 3, 0.9);
    TheoryMap map(p, 3, 3);
    std::mt19937_64 rng(5);
    const double v_th = p.beta * p.v_peak;
    Eigen::VectorXd v = random_vec(map.dims(), rng, 2.0);
    for (auto& x : v)
        if (std::fabs(x - v_th) < 1e-3) x += 0.01;  // stay off the relu kink
    const Eigen::MatrixXd j = map.jacobian(v);
    const double h = 1e-6;
    for (Eigen::Index c = 0; c < v.size(); ++c) {
        Eigen::VectorXd a = v, b = v;
        a[c] += h;
        b[c] -= h;
        EXPECT_LT(((map.apply(a) - map.apply(b)) / (2 * h) - j.col(c)).norm(), 1e-7);
    }
}

TEST(TheoryMap, RejectsBadGates) {
    TheoryParams p = zero_kernel(1.0, 1);
    EXPECT_THROW(TheoryMap(p, 2, 2), std::invalid_argument);
}

TEST(Contraction, RatiosNeverExceedCertifiedConstant) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        TheoryMap map(random_theory_params(seed, 2, 4, 4, 0.9), 4, 4);
        EXPECT_NEAR(map.lipschitz(), 0.9, 1e-6);
        const ContractionReport r = contraction_test(map, 500, seed, 3.0);
        EXPECT_TRUE(r.bound_applies);
        // The power-iteration norm is a lower bound; compare with the exact one.
        const double exact = lipschitz_bound(map.params().alpha, map.params().beta, map.params().gamma,
                                             map.params().v_peak, dense_sigma(conv_operator(map.params().w_rec, 4, 4).dense()));
        EXPECT_LE(r.max_ratio, exact + 1e-12);
    }
}

TEST(Contraction, HeavisideCarriesNoGuarantee) {
    TheoryParams p = random_theory_params(7, 2, 3, 3, 0.8);
    p.relaxation = SpikeRelaxation::Heaviside;
    TheoryMap map(p, 3, 3);
    EXPECT_FALSE(contraction_test(map, 10, 1).bound_applies);
    EXPECT_THROW(banach_convergence(map, Eigen::VectorXd::Zero(18), 5), ContractionError);
}

TEST(Banach, ErrorsRespectAPrioriBound) {
    TheoryMap map(random_theory_params(8, 2, 4, 4, 0.85), 4, 4);
    std::mt19937_64 rng(9);
    const BanachReport r = banach_convergence(map, random_vec(map.dims(), rng, 3.0), 60);
    ASSERT_EQ(r.errors.size(), 61u);
    for (std::size_t k = 0; k <= 60; ++k) EXPECT_LE(r.errors[k], r.bounds[k] + 1e-12);
    for (std::size_t k = 1; k <= 60; ++k) EXPECT_LE(r.errors[k], r.errors[k - 1] + 1e-12);
    EXPECT_LT((map.apply(r.fixed_point) - r.fixed_point).norm(), 1e-12);
    EXPECT_LE(r.steps_to_tol, r.predicted_steps);
}

TEST(Banach, StartingAtFixedPointStaysThere) {
    TheoryMap map(random_theory_params(10, 2, 3, 3, 0.7), 3, 3);
    const Eigen::VectorXd star = banach_convergence(map, Eigen::VectorXd::Zero(18), 5).fixed_point;
    const BanachReport r = banach_convergence(map, star, 10);
    EXPECT_LT(r.first_step, 1e-13);
    for (double e : r.errors) EXPECT_LT(e, 1e-13);
    EXPECT_EQ(r.steps_to_tol, 0u);
}

TEST(Banach, UncertifiedMapThrows) {
    TheoryParams p = random_theory_params(11, 2, 3, 3, 0.8);
    for (auto& v : p.w_rec.vec()) v *= 10.0;
    TheoryMap map(p, 3, 3);
    ASSERT_GE(map.lipschitz(), 1.0);
    EXPECT_THROW(banach_convergence(map, Eigen::VectorXd::Zero(18), 5), ContractionError);
}

TEST(EigenSpectrum, KnownMatrixAndLimits) {
    Eigen::MatrixXd m(2, 2);
    m << 0.0, -0.5, 0.5, 0.0;  // rotation scaled by 0.5: eigenvalues +-0.5i
    const Spectrum s = eigen_spectrum(m);
    EXPECT_NEAR(s.max_modulus, 0.5, 1e-14);
    for (const auto& e : s.eigenvalues) EXPECT_NEAR(std::abs(e.real()), 0.0, 1e-14);
    EXPECT_THROW(eigen_spectrum(Eigen::MatrixXd::Zero(2001, 2001)), std::invalid_argument);
    EXPECT_THROW(eigen_spectrum(Eigen::MatrixXd::Zero(2, 3)), ShapeError);
}

TEST(JointState, FlattensInOrder) {
    DynamicsSnapshot s{Tensor({1, 1, 2}, 1.0), Tensor({1, 1, 2}, 2.0), Tensor({1, 1, 2}, 3.0), Tensor({1, 1, 2}, 4.0),
                       {}, {}, {}};
    const JointState js = JointState::from_snapshot(s);
    EXPECT_EQ(js.neurons, 2u);
    EXPECT_EQ(js.u, (Eigen::VectorXd(8) << 1, 1, 2, 2, 3, 3, 4, 4).finished());
    EXPECT_EQ(state_differences({s, s, s}), (std::vector<double>{0.0, 0.0}));
}

TEST(TrainedJacobian, MatchesWindowedLinearization) {
    NetConfig cfg;
    cfg.input_bins = 5;
    cfg.stem_channels = 4;
    cfg.feat_c4 = cfg.feat_c8 = cfg.feat_c16 = 8;
    cfg.res_blocks = 1;
    cfg.hidden = 8;
    cfg.gate_groups = 2;
    cfg.motion_channels = cfg.head_channels = 8;
    SpikeStereoNet net(cfg, 1);
    std::mt19937_64 rng(12);
    const Rollout r = net.iterate(ref::random_stream(20, 32, 32, 0.3, rng), ref::random_stream(20, 32, 32, 0.3, rng), 2, true);
    const DynamicsSnapshot& snap = r.snapshots[1];
    const AlifLayerParams& layer = net.update_block().rsnn.layers[0];
    const Surrogate sg{};
    const WindowedJacobian wj = trained_jacobian(layer, snap, sg, 200);
    ASSERT_EQ(wj.size, 5u);  // floor(sqrt(200 / 8))
    EXPECT_EQ(wj.y0, 1u);
    EXPECT_EQ(wj.x0, 1u);

    // J e = alpha e + (1 - alpha) conv(gamma v_th sg'(h - v_th) e) on the window.
    const std::size_t c = 8, side = 5;
    Tensor a({c, side, side}), d({c, side, side});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < side; ++y)
            for (std::size_t x = 0; x < side; ++x) {
                const std::size_t gy = y + 1, gx = x + 1;
                a.at(ch, y, x) = snap.alpha.at(ch, gy, gx);
                const double vth = snap.v_th.at(ch, gy, gx);
                d.at(ch, y, x) = snap.gamma.at(ch, gy, gx) * vth * sg.derivative(snap.h.at(ch, gy, gx) - vth);
            }
    for (int trial = 0; trial < 3; ++trial) {
        const Tensor e = ref::random_tensor({c, side, side}, rng);
        Tensor ed = e;
        for (std::size_t i = 0; i < ed.numel(); ++i) ed[i] *= d[i];
        const Tensor conv = ref::conv2d(ed, layer.w_rec.value(), nullptr, 1, 1);
        Tensor expect({c, side, side});
        for (std::size_t i = 0; i < expect.numel(); ++i) expect[i] = a[i] * e[i] + (1 - a[i]) * conv[i];
        EXPECT_LT(ref::max_abs_diff(to_tensor(wj.matrix * to_vec(e), {c, side, side}), expect), 1e-12);
    }
    EXPECT_THROW(trained_jacobian(layer, snap, sg, 7), std::invalid_argument);
}

TEST(Pca, RecoversDominantAxis) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::Vector3d axis(1.0, 2.0, -2.0);
    axis.normalize();
    Eigen::MatrixXd x(200, 3);
    for (Eigen::Index i = 0; i < 200; ++i) x.row(i) = (5.0 * nd(rng)) * axis.transpose() + 0.01 * Eigen::RowVector3d(nd(rng), nd(rng), nd(rng));
    const Pca p = fit_pca(x, 2);
    EXPECT_NEAR(std::fabs(p.components.col(0).dot(axis)), 1.0, 1e-4);
    EXPECT_NEAR(p.components.col(0).norm(), 1.0, 1e-12);
    EXPECT_GT(p.variances[0], 1000 * p.variances[1]);
}

TEST(HiddenStatePca, IdenticalInputsAreDegenerate) {
    std::mt19937_64 rng(14);
    std::vector<Tensor> trace{ref::random_tensor({2, 3, 3}, rng), ref::random_tensor({2, 3, 3}, rng)};
    const HiddenStatePca h = hidden_state_pca({trace, trace, trace});
    EXPECT_TRUE(h.degenerate);
    for (double d : h.dispersion) EXPECT_EQ(d, 0.0);
}

TEST(HiddenStatePca, SeparatesDistinctInputs) {
    std::mt19937_64 rng(15);
    std::vector<std::vector<Tensor>> traces;
    for (int i = 0; i < 4; ++i) traces.push_back({ref::random_tensor({5}, rng), ref::random_tensor({5}, rng)});
    const HiddenStatePca h = hidden_state_pca(traces);
    EXPECT_FALSE(h.degenerate);
    ASSERT_EQ(h.projections.size(), 2u);
    ASSERT_EQ(h.projections[0].size(), 4u);
    for (double d : h.dispersion) EXPECT_GT(d, 0.0);
}

TEST(HiddenStatePca, RejectsTooFewOrRaggedInputs) {
    std::vector<Tensor> a{Tensor({2}, 1.0)}, b{Tensor({2}, 1.0), Tensor({2}, 1.0)};
    EXPECT_THROW(hidden_state_pca({a, a}), std::invalid_argument);
    EXPECT_THROW(hidden_state_pca({a, a, b}), ShapeError);
}
