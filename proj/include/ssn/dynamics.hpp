#pragma once

// Stability analysis of the spiking update.
//
// Theory mode fixes scalar gates and studies the membrane map
//
//   F(v) = alpha v + (1 - alpha) (W (gamma v_th rho(v - v_th)) + b),   v_th = beta v_peak
//
// where W is a zero-padded convolution and rho is relu (1-Lipschitz) or the
// Heaviside step. With relu, Lip(F) <= alpha + (1 - alpha) gamma beta v_peak ||W||.

#include <complex>
#include <functional>

#include <Eigen/Dense>

#include "ssn/model.hpp"

namespace ssn {

class ContractionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// alpha + (1 - alpha) * gamma * beta * v_peak * w_norm
double lipschitz_bound(double alpha, double beta, double gamma, double v_peak, double w_norm);

/// Matrix-free linear map with its transpose.
struct LinearOperator {
    std::size_t rows = 0, cols = 0;
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> apply, apply_transpose;

    Eigen::MatrixXd dense() const;
};

/// Same-size zero-padded stride-1 convolution of a [Ci,H,W] map by kernel [Co,Ci,k,k] (k odd).
LinearOperator conv_operator(const Tensor& kernel, std::size_t h, std::size_t w);

struct SpectralNorm {
    double sigma = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Power iteration on A^T A; stops after max_iter or when sigma changes by
/// less than rel_tol relative.
SpectralNorm spectral_norm(const LinearOperator& op, std::size_t max_iter = 200, double rel_tol = 1e-10,
                           std::uint64_t seed = 0);

struct TheoryParams {
    double alpha = 0.5, beta = 0.5, gamma = 0.5, v_peak = 1.0;
    Tensor w_rec;  // [C,C,k,k]
    Tensor drive;  // [C,H,W], constant input b
    SpikeRelaxation relaxation = SpikeRelaxation::Relu;
};

/// Random gates in (0,1), v_peak in [0.5,2], and a random kernel rescaled so
/// that the certified constant equals target_l.
TheoryParams random_theory_params(std::uint64_t seed, std::size_t channels, std::size_t h, std::size_t w,
                                  double target_l);

class TheoryMap {
public:
    TheoryMap(TheoryParams p, std::size_t h, std::size_t w);

    std::size_t dims() const { return n_; }
    double w_norm() const { return w_norm_.sigma; }
    double lipschitz() const;
    bool certified() const { return lipschitz() < 1.0; }
    const TheoryParams& params() const { return p_; }

    Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
    /// dF/dv at v. The relu derivative at exactly 0 is taken as 0.
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& v) const;

private:
    TheoryParams p_;
    std::size_t h_, w_, n_;
    LinearOperator op_;
    SpectralNorm w_norm_;
};

struct ContractionReport {
    std::vector<double> ratios;  // ||F(u)-F(u')|| / ||u-u'||
    double max_ratio = 0.0;
    double lipschitz = 0.0;
    /// True when the bound applies (relu relaxation and L < 1); the Heaviside
    /// map is measured but carries no guarantee.
    bool bound_applies = false;
};

/// Random state pairs with entries ~ N(0, state_scale^2).
ContractionReport contraction_test(const TheoryMap& map, std::size_t pairs, std::uint64_t seed,
                                   double state_scale = 1.0);

struct BanachReport {
    std::vector<double> errors;  // ||u_k - u*||, k = 0..k_max
    std::vector<double> bounds;  // L^k / (1-L) * ||u_1 - u_0||
    Eigen::VectorXd fixed_point;
    double first_step = 0.0;     // ||u_1 - u_0||
    std::size_t steps_to_tol = 0;  // first k with ||u_k - u*|| <= tol
    std::size_t predicted_steps = 0;  // ceil(log(tol (1-L) / ||u_1-u_0||) / log L)
    double lipschitz = 0.0;
};

/// Iterates from u0. Throws ContractionError when L >= 1 or the relaxation is not relu.
BanachReport banach_convergence(const TheoryMap& map, const Eigen::VectorXd& u0, std::size_t k_max,
                                double tol = 1e-12);

struct Spectrum {
    std::vector<std::complex<double>> eigenvalues;
    double max_modulus = 0.0;
};

inline constexpr std::size_t kMaxDenseDims = 2000;

/// Dense eigen-decomposition. Throws for matrices above max_dims.
Spectrum eigen_spectrum(const Eigen::MatrixXd& m, std::size_t max_dims = kMaxDenseDims);

/// Joint layer state u = (h, v, s, v_th) flattened.
struct JointState {
    Eigen::VectorXd u;
    std::size_t neurons = 0;

    static JointState from_snapshot(const DynamicsSnapshot& snap);
};

/// ||u_t - u_{t-1}|| over consecutive snapshots (T-1 values).
std::vector<double> state_differences(const std::vector<DynamicsSnapshot>& snaps);

struct WindowedJacobian {
    Eigen::MatrixXd matrix;
    std::size_t y0 = 0, x0 = 0, size = 0;
};

/// Linearization of a trained layer's membrane map at one snapshot, restricted
/// to a centered square window so the state has at most max_dims entries:
///   J = diag(alpha) + diag(1-alpha) W diag(gamma v_th sg'(h - v_th))
/// with per-neuron gates from the snapshot and the surrogate derivative.
WindowedJacobian trained_jacobian(const AlifLayerParams& layer, const DynamicsSnapshot& snap, const Surrogate& sg,
                                  std::size_t max_dims = kMaxDenseDims);

struct Pca {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;  // [dims, k], unit columns
    Eigen::VectorXd variances;   // explained variance per component
};

/// Principal axes of the rows of x.
Pca fit_pca(const Eigen::MatrixXd& x, std::size_t k);

struct HiddenStatePca {
    /// projections[t][i]: input i at iteration t in the top-2 PC plane
    std::vector<std::vector<std::array<double, 2>>> projections;
    std::vector<double> dispersion;  // mean pairwise distance per iteration
    Pca pca;
    bool degenerate = false;  // all inputs produced the same trajectory
};

/// traces[i][t] is the final-layer membrane potential for input i at iteration t.
/// Needs at least 3 inputs with equal iteration counts.
HiddenStatePca hidden_state_pca(const std::vector<std::vector<Tensor>>& traces);

}  // namespace ssn
