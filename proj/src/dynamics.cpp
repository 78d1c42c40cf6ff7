#include "ssn/dynamics.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "ssn/kernels.hpp"

namespace ssn {

double lipschitz_bound(double alpha, double beta, double gamma, double v_peak, double w_norm) {
    return alpha + (1.0 - alpha) * gamma * beta * v_peak * w_norm;
}

Eigen::MatrixXd LinearOperator::dense() const {
    Eigen::MatrixXd m(rows, cols);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cols)), col;
    for (std::size_t j = 0; j < cols; ++j) {
        e[static_cast<Eigen::Index>(j)] = 1.0;
        apply(e, col);
        m.col(static_cast<Eigen::Index>(j)) = col;
        e[static_cast<Eigen::Index>(j)] = 0.0;
    }
    return m;
}

LinearOperator conv_operator(const Tensor& kernel, std::size_t h, std::size_t w) {
    if (kernel.rank() != 4 || kernel.dim(2) != kernel.dim(3) || kernel.dim(2) % 2 == 0)
        throw ShapeError("conv_operator needs an odd square kernel [Co,Ci,k,k], got " + shape_str(kernel.shape()));
    const std::size_t co = kernel.dim(0), ci = kernel.dim(1), k = kernel.dim(2), pad = k / 2;
    // Transpose of a same-padded stride-1 convolution: swap channels and flip taps.
    Tensor flipped({ci, co, k, k});
    for (std::size_t o = 0; o < co; ++o)
        for (std::size_t i = 0; i < ci; ++i)
            for (std::size_t a = 0; a < k; ++a)
                for (std::size_t b = 0; b < k; ++b)
                    flipped[((i * co + o) * k + (k - 1 - a)) * k + (k - 1 - b)] = kernel[((o * ci + i) * k + a) * k + b];
    auto run = [h, w, pad](const Tensor& kern, std::size_t c_in, const Eigen::VectorXd& x, Eigen::VectorXd& y) {
        Tensor in({c_in, h, w}, std::vector<double>(x.data(), x.data() + x.size()));
        Tensor out = kernels::conv2d(in, kern, nullptr, 1, pad);
        y = Eigen::Map<const Eigen::VectorXd>(out.vec().data(), static_cast<Eigen::Index>(out.numel()));
    };
    LinearOperator op;
    op.rows = co * h * w;
    op.cols = ci * h * w;
    op.apply = [kernel, ci, run](const Eigen::VectorXd& x, Eigen::VectorXd& y) { run(kernel, ci, x, y); };
    op.apply_transpose = [flipped, co, run](const Eigen::VectorXd& x, Eigen::VectorXd& y) { run(flipped, co, x, y); };
    return op;
}

SpectralNorm spectral_norm(const LinearOperator& op, std::size_t max_iter, double rel_tol, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd x(static_cast<Eigen::Index>(op.cols)), y, z;
    for (auto& v : x) v = nd(rng);
    x.normalize();
    SpectralNorm r;
    double prev = 0.0;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        op.apply(x, y);
        op.apply_transpose(y, z);
        const double lambda = x.dot(z);  // Rayleigh quotient of A^T A
        r.sigma = std::sqrt(std::max(lambda, 0.0));
        r.iterations = it;
        const double n = z.norm();
        if (n == 0.0) {
            r.sigma = 0.0;
            r.converged = true;
            break;
        }
        x = z / n;
        if (it > 1 && std::abs(r.sigma - prev) <= rel_tol * std::max(r.sigma, 1e-300)) {
            r.converged = true;
            break;
        }
        prev = r.sigma;
    }
    return r;
}

TheoryParams random_theory_params(std::uint64_t seed, std::size_t channels, std::size_t h, std::size_t w,
                                  double target_l) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> gate(0.05, 0.95), peak(0.5, 2.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    TheoryParams p;
    p.alpha = gate(rng);
    p.beta = gate(rng);
    p.gamma = gate(rng);
    p.v_peak = peak(rng);
    if (!(target_l > p.alpha && target_l < 1.0)) target_l = p.alpha + 0.5 * (1.0 - p.alpha);
    p.w_rec = Tensor({channels, channels, 3, 3});
    for (auto& v : p.w_rec.vec()) v = nd(rng);
    p.drive = Tensor({channels, h, w});
    for (auto& v : p.drive.vec()) v = nd(rng);
    const double sigma = spectral_norm(conv_operator(p.w_rec, h, w)).sigma;
    // Solve alpha + (1-alpha) gamma beta v_peak s ||W|| = target_l for the kernel scale s.
    const double s = (target_l - p.alpha) / ((1.0 - p.alpha) * p.gamma * p.beta * p.v_peak * sigma);
    for (auto& v : p.w_rec.vec()) v *= s;
    return p;
}

TheoryMap::TheoryMap(TheoryParams p, std::size_t h, std::size_t w) : p_(std::move(p)), h_(h), w_(w) {
    for (double g : {p_.alpha, p_.beta, p_.gamma})
        if (!(g > 0.0 && g < 1.0)) throw std::invalid_argument("theory-mode gates must lie in (0,1)");
    if (!(p_.v_peak > 0.0)) throw std::invalid_argument("v_peak must be positive");
    if (p_.w_rec.rank() != 4 || p_.w_rec.dim(0) != p_.w_rec.dim(1))
        throw ShapeError("theory-mode W_rec must be [C,C,k,k], got " + shape_str(p_.w_rec.shape()));
    const std::size_t c = p_.w_rec.dim(0);
    n_ = c * h * w;
    if (p_.drive.empty()) p_.drive = Tensor({c, h, w}, 0.0);
    if (p_.drive.shape() != Shape{c, h, w})
        throw ShapeError("theory-mode drive must be " + shape_str({c, h, w}) + ", got " + shape_str(p_.drive.shape()));
    op_ = conv_operator(p_.w_rec, h, w);
    w_norm_ = spectral_norm(op_);
}

double TheoryMap::lipschitz() const {
    return lipschitz_bound(p_.alpha, p_.beta, p_.gamma, p_.v_peak, w_norm_.sigma);
}

Eigen::VectorXd TheoryMap::apply(const Eigen::VectorXd& v) const {
    const double v_th = p_.beta * p_.v_peak;
    const bool relu = p_.relaxation == SpikeRelaxation::Relu;
    Eigen::VectorXd s(v.size()), syn;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double x = v[i] - v_th;
        s[i] = p_.gamma * v_th * (relu ? std::max(x, 0.0) : (x >= 0.0 ? 1.0 : 0.0));
    }
    op_.apply(s, syn);
    const Eigen::Map<const Eigen::VectorXd> b(p_.drive.vec().data(), static_cast<Eigen::Index>(n_));
    return p_.alpha * v + (1.0 - p_.alpha) * (syn + b);
}

Eigen::MatrixXd TheoryMap::jacobian(const Eigen::VectorXd& v) const {
    if (n_ > kMaxDenseDims)
        throw std::invalid_argument("dense Jacobian of " + std::to_string(n_) + " states exceeds " +
                                    std::to_string(kMaxDenseDims) + "; use power iteration for the top modes");
    const double v_th = p_.beta * p_.v_peak;
    Eigen::VectorXd d(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        // relu' (0 at the kink); the Heaviside map is flat almost everywhere.
        const bool active = p_.relaxation == SpikeRelaxation::Relu && v[i] - v_th > 0.0;
        d[i] = active ? p_.gamma * v_th : 0.0;
    }
    Eigen::MatrixXd j = (1.0 - p_.alpha) * op_.dense() * d.asDiagonal();
    j.diagonal().array() += p_.alpha;
    return j;
}

ContractionReport contraction_test(const TheoryMap& map, std::size_t pairs, std::uint64_t seed, double state_scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, state_scale);
    const auto n = static_cast<Eigen::Index>(map.dims());
    ContractionReport r;
    r.lipschitz = map.lipschitz();
    r.bound_applies = map.params().relaxation == SpikeRelaxation::Relu && r.lipschitz < 1.0;
    // Pairs are drawn up front so the RNG stream is independent of evaluation.
    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> states(pairs);
    for (auto& [a, b] : states) {
        a.resize(n);
        b.resize(n);
        for (auto& v : a) v = nd(rng);
        for (auto& v : b) v = nd(rng);
    }
    r.ratios.resize(pairs);
#pragma omp parallel for schedule(static)
    for (std::size_t k = 0; k < pairs; ++k) {
        const auto& [a, b] = states[k];
        r.ratios[k] = (map.apply(a) - map.apply(b)).norm() / (a - b).norm();
    }
    for (double q : r.ratios) r.max_ratio = std::max(r.max_ratio, q);
    return r;
}

BanachReport banach_convergence(const TheoryMap& map, const Eigen::VectorXd& u0, std::size_t k_max, double tol) {
    const double l = map.lipschitz();
    if (map.params().relaxation != SpikeRelaxation::Relu)
        throw ContractionError("Banach iteration requires the relu relaxation; the Heaviside map has no Lipschitz bound");
    if (!(l < 1.0))
        throw ContractionError("contraction not certified: L = " + std::to_string(l) +
                               " >= 1 (alpha=" + std::to_string(map.params().alpha) +
                               ", ||W_rec||=" + std::to_string(map.w_norm()) + ")");
    if (static_cast<std::size_t>(u0.size()) != map.dims()) throw ShapeError("u0 has the wrong dimension");

    BanachReport r;
    r.lipschitz = l;
    std::vector<Eigen::VectorXd> iterates{u0};
    for (std::size_t k = 1; k <= k_max; ++k) iterates.push_back(map.apply(iterates.back()));
    r.first_step = (iterates.size() > 1 ? (iterates[1] - iterates[0]).norm() : (map.apply(u0) - u0).norm());

    // Fixed point: iterate until the a-posteriori bound L/(1-L)||u_{k+1}-u_k||
    // is far below tol or the step reaches the rounding floor.
    Eigen::VectorXd u = iterates.back();
    for (std::size_t guard = 0; guard < 100000; ++guard) {
        Eigen::VectorXd next = map.apply(u);
        const double step = (next - u).norm();
        u = std::move(next);
        const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, u.norm());
        if (step <= floor || l / (1.0 - l) * step < 1e-3 * tol) break;
    }
    r.fixed_point = u;

    r.steps_to_tol = k_max + 1;
    for (std::size_t k = 0; k <= k_max; ++k) {
        r.errors.push_back((iterates[k] - u).norm());
        r.bounds.push_back(std::pow(l, static_cast<double>(k)) / (1.0 - l) * r.first_step);
        if (r.steps_to_tol > k_max && r.errors.back() <= tol) r.steps_to_tol = k;
    }
    if (r.first_step > 0.0 && tol * (1.0 - l) < r.first_step)
        r.predicted_steps =
            static_cast<std::size_t>(std::ceil(std::log(tol * (1.0 - l) / r.first_step) / std::log(l)));
    return r;
}

Spectrum eigen_spectrum(const Eigen::MatrixXd& m, std::size_t max_dims) {
    if (m.rows() != m.cols()) throw ShapeError("eigen_spectrum needs a square matrix");
    if (static_cast<std::size_t>(m.rows()) > max_dims)
        throw std::invalid_argument("linearization has " + std::to_string(m.rows()) + " state dims, above the dense limit of " +
                                    std::to_string(max_dims) + "; use power iteration for the top-k modes instead");
    Spectrum s;
    if (m.rows() == 0) return s;
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    if (es.info() != Eigen::Success) throw NumericError("eigenvalue solver did not converge");
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        s.eigenvalues.push_back(es.eigenvalues()[i]);
        s.max_modulus = std::max(s.max_modulus, std::abs(es.eigenvalues()[i]));
    }
    return s;
}

JointState JointState::from_snapshot(const DynamicsSnapshot& snap) {
    const std::size_t n = snap.v.numel();
    for (const Tensor* t : {&snap.h, &snap.s, &snap.v_th})
        if (t->numel() != n) throw ShapeError("snapshot tensors differ in size");
    JointState js;
    js.neurons = n;
    js.u.resize(static_cast<Eigen::Index>(4 * n));
    std::size_t o = 0;
    for (const Tensor* t : {&snap.h, &snap.v, &snap.s, &snap.v_th})
        for (double x : t->vec()) js.u[static_cast<Eigen::Index>(o++)] = x;
    return js;
}

std::vector<double> state_differences(const std::vector<DynamicsSnapshot>& snaps) {
    std::vector<double> d;
    for (std::size_t t = 1; t < snaps.size(); ++t)
        d.push_back((JointState::from_snapshot(snaps[t]).u - JointState::from_snapshot(snaps[t - 1]).u).norm());
    return d;
}

WindowedJacobian trained_jacobian(const AlifLayerParams& layer, const DynamicsSnapshot& snap, const Surrogate& sg,
                                  std::size_t max_dims) {
    const std::size_t c = layer.hidden();
    if (snap.v.rank() != 3 || snap.v.dim(0) != c)
        throw ShapeError("snapshot " + shape_str(snap.v.shape()) + " does not match a layer with " + std::to_string(c) +
                         " neurons per pixel");
    const std::size_t h = snap.v.dim(1), w = snap.v.dim(2);
    std::size_t side = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(max_dims) / static_cast<double>(c))));
    side = std::min({side, h, w});
    if (side == 0)
        throw std::invalid_argument("a single pixel already has " + std::to_string(c) + " states, above " +
                                    std::to_string(max_dims) + "; use power iteration for the top-k modes instead");
    WindowedJacobian out;
    out.size = side;
    out.y0 = (h - side) / 2;
    out.x0 = (w - side) / 2;

    const std::size_t n = c * side * side;
    Eigen::VectorXd a(static_cast<Eigen::Index>(n)), d(static_cast<Eigen::Index>(n));
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < side; ++y)
            for (std::size_t x = 0; x < side; ++x) {
                const std::size_t gy = out.y0 + y, gx = out.x0 + x;
                const auto i = static_cast<Eigen::Index>((ch * side + y) * side + x);
                a[i] = snap.alpha.at(ch, gy, gx);
                const double v_th = snap.v_th.at(ch, gy, gx);
                d[i] = snap.gamma.at(ch, gy, gx) * v_th * sg.derivative(snap.h.at(ch, gy, gx) - v_th);
            }
    const Eigen::MatrixXd wmat = conv_operator(layer.w_rec.value(), side, side).dense();
    out.matrix = (Eigen::VectorXd::Ones(a.size()) - a).asDiagonal() * wmat * d.asDiagonal();
    out.matrix.diagonal() += a;
    return out;
}

Pca fit_pca(const Eigen::MatrixXd& x, std::size_t k) {
    if (x.rows() < 2) throw std::invalid_argument("PCA needs at least two samples");
    Pca p;
    p.mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - p.mean.transpose();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const auto kk = static_cast<Eigen::Index>(std::min<std::size_t>(k, static_cast<std::size_t>(svd.singularValues().size())));
    p.components = Eigen::MatrixXd::Zero(x.cols(), static_cast<Eigen::Index>(k));
    p.components.leftCols(kk) = svd.matrixV().leftCols(kk);
    p.variances = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < kk; ++i)
        p.variances[i] = svd.singularValues()[i] * svd.singularValues()[i] / static_cast<double>(x.rows() - 1);
    return p;
}

HiddenStatePca hidden_state_pca(const std::vector<std::vector<Tensor>>& traces) {
    if (traces.size() < 3) throw std::invalid_argument("hidden_state_pca needs at least 3 inputs");
    const std::size_t steps = traces[0].size();
    if (steps == 0) throw std::invalid_argument("hidden_state_pca needs at least one iteration");
    const std::size_t dims = traces[0][0].numel();
    for (const auto& tr : traces) {
        if (tr.size() != steps) throw ShapeError("inputs have different iteration counts");
        for (const auto& t : tr)
            if (t.numel() != dims) throw ShapeError("hidden states differ in size across inputs");
    }
    HiddenStatePca out;
    out.degenerate = true;
    for (std::size_t i = 1; i < traces.size() && out.degenerate; ++i)
        for (std::size_t t = 0; t < steps; ++t)
            if (traces[i][t].vec() != traces[0][t].vec()) {
                out.degenerate = false;
                break;
            }

    Eigen::MatrixXd x(static_cast<Eigen::Index>(traces.size() * steps), static_cast<Eigen::Index>(dims));
    for (std::size_t i = 0; i < traces.size(); ++i)
        for (std::size_t t = 0; t < steps; ++t)
            x.row(static_cast<Eigen::Index>(i * steps + t)) =
                Eigen::Map<const Eigen::RowVectorXd>(traces[i][t].vec().data(), static_cast<Eigen::Index>(dims));
    out.pca = fit_pca(x, 2);

    out.projections.assign(steps, std::vector<std::array<double, 2>>(traces.size()));
    for (std::size_t t = 0; t < steps; ++t) {
        double total = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < traces.size(); ++i) {
            const Eigen::RowVectorXd c =
                (x.row(static_cast<Eigen::Index>(i * steps + t)) - out.pca.mean.transpose()) * out.pca.components;
            out.projections[t][i] = {c[0], c[1]};
        }
        for (std::size_t i = 0; i < traces.size(); ++i)
            for (std::size_t j = i + 1; j < traces.size(); ++j, ++count)
                total += std::hypot(out.projections[t][i][0] - out.projections[t][j][0],
                                    out.projections[t][i][1] - out.projections[t][j][1]);
        out.dispersion.push_back(total / static_cast<double>(count));
    }
    return out;
}

}  // namespace ssn
