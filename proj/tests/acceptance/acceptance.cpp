// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "reference.hpp"
#include "ssn/correlation.hpp"
#include "ssn/dataset.hpp"
#include "ssn/dynamics.hpp"
#include "ssn/io_formats.hpp"

using namespace ssn;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kOracleTol = 1e-12;
constexpr double kGradRelTol = 1e-5;
constexpr double kFdStep = 1e-6;
constexpr double kRatioSlack = 1e-9;
constexpr double kBanachSlack = 1e-12;  // rounding floor on ||u_k - u*||
constexpr double kFixedPointTol = 1e-12;
constexpr double kEigenSlack = 1e-9;
constexpr double kOverfitAvgErr = 0.5;
constexpr double kOverfitBad2 = 5.0;
constexpr double kCodecSeconds = 5, kGradSeconds = 30, kTheorySeconds = 60, kOverfitSeconds = 20 * 60;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ssn_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// ---- 1 ---------------------------------------------------------------------

Outcome codec() {
    Outcome o;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    std::size_t bad = 0;
    for (int i = 0; i < 1000; ++i) {
        const SpikeStream s = ref::random_stream(1 + rng() % 40, 1 + rng() % 20, 1 + rng() % 20,
                                                 static_cast<double>(rng() % 1000) / 1000.0, rng);
        bad += unpack_dat(pack_dat(s)) != s;
    }
    o.require(bad == 0, std::to_string(bad) + " roundtrips differ");

    const SpikeStream e = encode(FrameSequence(50, 4, 4, 0.5), {5.0, 0.0, 0});
    bool exact = true;
    for (std::size_t t = 0; t < 50; ++t)
        for (std::size_t p = 0; p < 16; ++p) exact &= e.bits[t * 16 + p] == ((t + 1) % 10 == 0 ? 1 : 0);
    o.require(exact && e.count() == 5 * 16, "constant 0.5 input must fire at steps 10,20,..,50");
    const double secs = seconds_since(t0);
    o.require(secs < kCodecSeconds, "runtime");
    o.detail << "1000 roundtrips, 5 spikes/pixel, " << secs << " s";
    return o;
}

// ---- 2 ---------------------------------------------------------------------

Outcome oracles() {
    Outcome o;
    std::mt19937_64 rng(2);
    auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); };
    double worst = 0.0;
    auto track = [&](double d) { worst = std::max(worst, d); };
    const int shapes = 50;
    for (int i = 0; i < shapes; ++i) {
        const std::size_t ci = pick(1, 4), co = pick(1, 4), k = 2 * pick(0, 2) + 1, h = pick(k, 9), w = pick(k, 9);
        const std::size_t stride = pick(1, 2), pad = pick(0, k / 2);
        const Tensor x = ref::random_tensor({ci, h, w}, rng), kw = ref::random_tensor({co, ci, k, k}, rng),
                     b = ref::random_tensor({co}, rng);
        track(ref::max_abs_diff(conv2d(Var(x), Var(kw), Var(b), stride, pad).value(), ref::conv2d(x, kw, &b, stride, pad)));
    }
    for (int i = 0; i < shapes; ++i) {
        const std::size_t kk = pick(1, 3), st = pick(1, 3);
        const Tensor x = ref::random_tensor({pick(1, 3), pick(1, 4), pick(kk, 12)}, rng);
        track(ref::max_abs_diff(avg_pool_lastdim(Var(x), kk, st).value(), ref::avg_pool_lastdim(x, kk, st)));
    }
    for (int i = 0; i < shapes; ++i) {
        const std::size_t g = pick(1, 4), c = g * pick(1, 3);
        const Tensor x = ref::random_tensor({c, pick(1, 5), pick(1, 5)}, rng, -3, 3);
        const Tensor gm = ref::random_tensor({c}, rng), bt = ref::random_tensor({c}, rng);
        track(ref::max_abs_diff(group_norm(Var(x), g, 1e-5, Var(gm), Var(bt)).value(),
                                ref::group_norm(x, g, 1e-5, &gm, &bt)));
    }
    for (int i = 0; i < shapes; ++i) {
        const Shape s{pick(1, 6), pick(1, 5), pick(2, 12)};
        const Tensor l = ref::random_tensor(s, rng), r = ref::random_tensor(s, rng);
        track(ref::max_abs_diff(build_volume(Var(l), Var(r)).values.value(), ref::correlation_volume(l, r)));
    }
    std::uniform_real_distribution<double> disp(-4.0, 24.0);
    for (int i = 0; i < shapes; ++i) {
        const std::size_t h = pick(1, 3), w = pick(8, 24), levels = pick(1, 4), r = pick(1, 4);
        const Tensor v = ref::random_tensor({h, w, w}, rng);
        Tensor d({h, w});
        for (auto& x : d.vec()) x = disp(rng);
        track(ref::max_abs_diff(lookup(build_pyramid({Var(v)}, levels), d, r).value(),
                                ref::lookup(ref::pyramid(v, levels), d, r)));
    }
    o.require(worst <= kOracleTol, "max deviation above tolerance");
    o.detail << "5 ops x " << shapes << " shapes, max |diff| " << worst;
    return o;
}

// ---- 3 ---------------------------------------------------------------------

// Two ALIF layers (hidden 2, 1x2 pixels, 1x1 kernels) unrolled for 3 steps
// with a linear disparity readout; loss = stereo + rate + voltage terms.
struct TinyRsnn {
    ParamStore ps;
    AlifLayerParams a, b;
    Conv2d readout;
    ContextScale ctx;
    Var x;
    Tensor gt;
    Surrogate sg{4.0, 1.0, SpikeRelaxation::Relu};
    LossConfig loss{0.9, 0.5, 0.1, 0.1, RegReduction::Sum};

    explicit TinyRsnn(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        auto param = [&](const std::string& n, Shape s, double lo, double hi) {
            return ps.add(n, ref::random_tensor(std::move(s), rng, lo, hi));
        };
        for (auto* l : {&a, &b}) {
            const std::string p = l == &a ? "a." : "b.";
            l->gates.weight = param(p + "gates.weight", {6, 3, 1, 1}, -1.5, 1.5);
            l->gates.bias = param(p + "gates.bias", {6}, -0.5, 0.5);
            l->gn_gamma = param(p + "gn_gamma", {6}, 0.5, 1.5);
            l->gn_beta = param(p + "gn_beta", {6}, -0.5, 0.5);
            l->w_rec = param(p + "w_rec", {2, 2, 1, 1}, -1.5, 1.5);
            l->gate_groups = 1;
            l->v_peak = 1.0;
        }
        b.w_f = param("b.w_f", {2, 2, 1, 1}, -1.5, 1.5);
        readout.weight = param("readout.weight", {1, 2, 1, 1}, -2, 2);
        readout.bias = param("readout.bias", {1}, 1, 2);
        const Tensor zero({2, 1, 2}, 0.0);
        ctx = {Var(), Var(zero), Var(zero), Var(zero), Var(ref::random_tensor({2, 1, 2}, rng, -1.5, 1.5))};
        x = Var(ref::random_tensor({1, 1, 2}, rng, -1, 1));
        gt = ref::random_tensor({1, 2}, rng, 2, 6);
    }

    Var operator()() const {
        AlifLayerState sa = initial_state(ctx), sb = initial_state(ctx);
        std::vector<Var> disp, volts;
        Var d(Tensor({1, 1, 2}, 0.0)), ra, rb;
        const std::size_t steps = 3;
        for (std::size_t t = 0; t < steps; ++t) {
            const AlifStep na = alif_step(sa, Var{}, compute_gates(sa, x, ctx, a, true), a, sg);
            const AlifStep nb = alif_step(sb, na.state.s, compute_gates(sb, x, ctx, b, true), b, sg);
            sa = na.state;
            sb = nb.state;
            d = add(d, readout(sb.v));
            disp.push_back(d);
            volts.push_back(sa.v);
            volts.push_back(sb.v);
            ra = ra.defined() ? add(ra, sa.s) : sa.s;
            rb = rb.defined() ? add(rb, sb.s) : sb.s;
        }
        const Var rates = scale(concat_channels({ra, rb}), 1.0 / steps);
        return add(stereo_loss(disp, gt, loss.eta),
                   add(scale(rate_reg(rates, loss.r0), loss.lambda_f), scale(voltage_reg(volts), loss.lambda_v)));
    }
};

Outcome gradients() {
    Outcome o;
    const auto t0 = Clock::now();
    TinyRsnn net(3);
    o.require(net.ps.scalar_count() <= 200, "fixture has more than 200 parameters");
    net.ps.zero_grad();
    const Var loss = net();
    backward(loss);
    std::vector<double> analytic, numeric;
    for (auto& [name, p] : net.ps.entries()) {
        const Tensor g = p.grad();
        const Tensor n = ref::numeric_gradient([&] { return net().value().item(); }, p.mutable_value(), kFdStep);
        analytic.insert(analytic.end(), g.vec().begin(), g.vec().end());
        numeric.insert(numeric.end(), n.vec().begin(), n.vec().end());
    }
    const Tensor ga({analytic.size()}, analytic), gn({numeric.size()}, numeric);
    const double rel = ref::rel_error(ga, gn);
    o.require(rel < kGradRelTol, "finite differences disagree");
    o.require(ga.max_abs() > 0.0, "gradient vanished");

    // z = H(w2 * H(w1 * x)) with the surrogate derivative on each step.
    const Surrogate sg;
    const double x0 = 0.3, w1v = 0.8, w2v = -0.4;
    Var w1(Tensor({1}, w1v), true), w2(Tensor({1}, w2v), true);
    backward(sum(heaviside(mul(w2, heaviside(mul(w1, Var(Tensor({1}, x0))), sg)), sg)));
    const double s1 = 1.0, db = sg.derivative(w2v * s1);
    const bool chain = w2.grad()[0] == db * s1 && w1.grad()[0] == db * w2v * sg.derivative(w1v * x0) * x0;
    o.require(chain, "surrogate chain differs from hand derivation");
    const double secs = seconds_since(t0);
    o.require(secs < kGradSeconds, "runtime");
    o.detail << net.ps.scalar_count() << " params, loss " << loss.value().item() << ", rel err " << rel
             << ", surrogate chain exact, " << secs << " s";
    return o;
}

// ---- 4 / 5 -----------------------------------------------------------------

double target_l(std::size_t k) { return 0.5 + 0.45 * static_cast<double>(k) / 20.0; }

Outcome contraction() {
    Outcome o;
    const auto t0 = Clock::now();
    double worst_ratio = -1, worst_banach = -1, worst_residual = 0;
    for (std::size_t k = 0; k < 20; ++k) {
        const TheoryMap map(random_theory_params(100 + k, 2, 6, 6, target_l(k)), 6, 6);
        o.require(map.certified(), "set " + std::to_string(k) + " not certified");
        const ContractionReport cr = contraction_test(map, 100, 200 + k, 2.0);
        worst_ratio = std::max(worst_ratio, cr.max_ratio - cr.lipschitz);
        std::mt19937_64 rng(300 + k);
        Eigen::VectorXd u0(static_cast<Eigen::Index>(map.dims()));
        for (auto& v : u0) v = std::normal_distribution<double>(0.0, 3.0)(rng);
        const BanachReport br = banach_convergence(map, u0, 50);
        for (std::size_t i = 0; i <= 50; ++i) worst_banach = std::max(worst_banach, br.errors[i] - br.bounds[i]);
        worst_residual = std::max(worst_residual, (map.apply(br.fixed_point) - br.fixed_point).norm());
    }
    o.require(worst_ratio <= kRatioSlack, "ratio above L");
    o.require(worst_banach <= kBanachSlack, "Banach bound violated");
    o.require(worst_residual <= kFixedPointTol, "fixed point residual");
    const double secs = seconds_since(t0);
    o.require(secs < kTheorySeconds, "runtime");
    o.detail << "20 sets, max(ratio - L) " << worst_ratio << ", max(err - bound) " << worst_banach
             << ", max ||F(u*) - u*|| " << worst_residual << ", " << secs << " s";
    return o;
}

Outcome spectrum() {
    Outcome o;
    const fs::path dir = scratch("spectrum");
    double worst = -1;
    std::size_t rows = 0;
    {
        CsvWriter csv(dir / "eigenvalues.csv", {"set", "re", "im", "modulus", "lipschitz"});
        PlotSeries pts{"eigenvalues", {}, {}};
        for (std::size_t k = 0; k < 20; ++k) {
            const TheoryMap map(random_theory_params(400 + k, 2, 6, 6, target_l(k)), 6, 6);
            const Eigen::VectorXd star = banach_convergence(map, Eigen::VectorXd::Zero(72), 0).fixed_point;
            std::mt19937_64 rng(500 + k);
            std::vector<Eigen::VectorXd> points{star};
            for (int i = 0; i < 3; ++i) {
                Eigen::VectorXd v(72);
                for (auto& x : v) x = std::normal_distribution<double>(0.0, 2.0)(rng);
                points.push_back(v);
            }
            for (const auto& p : points) {
                const Spectrum s = eigen_spectrum(map.jacobian(p));
                worst = std::max(worst, s.max_modulus - map.lipschitz());
                if (&p != &points.front()) continue;
                for (const auto& z : s.eigenvalues) {
                    csv.row(std::vector<double>{static_cast<double>(k), z.real(), z.imag(), std::abs(z), map.lipschitz()});
                    pts.x.push_back(z.real());
                    pts.y.push_back(z.imag());
                    ++rows;
                }
            }
        }
        write_svg(dir / "eigenvalues.svg", {"Linearization eigenvalues", "Re", "Im", true, false, true}, {pts});
    }
    o.require(worst <= kEigenSlack, "eigenvalue modulus above L");
    const CsvTable t = read_csv(dir / "eigenvalues.csv");
    bool parsed = t.rows.size() == rows;
    for (const auto& r : t.rows)
        parsed &= std::stod(r[t.column("modulus")]) <= std::stod(r[t.column("lipschitz")]) + kEigenSlack;
    o.require(parsed, "CSV does not parse back");
    std::ifstream svg(dir / "eigenvalues.svg");
    std::string head;
    svg >> head;
    o.require(head.rfind("<svg", 0) == 0, "SVG not written");
    o.detail << rows << " eigenvalues at fixed points (+60 random states), max(|lambda| - L) " << worst;
    return o;
}

// ---- 6 ---------------------------------------------------------------------

Outcome overfit() {
    Outcome o;
    const auto t0 = Clock::now();
    const fs::path dir = scratch("overfit");
    RunConfig cfg;  // desk preset: 64x64, 4 scenes, N = 50, T = 16, 500 steps
    generate_dataset(dir / "data", cfg, false);
    const auto data = load_dataset(dir / "data");
    SpikeStereoNet net(cfg.net, cfg.seed);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    tc.dump_dir = dir;
    train(net, data, tc);

    double avg = 0, bad2 = 0;
    std::size_t monotone = 0, steps = 0;
    for (const auto& s : data) {
        NoGradGuard guard;
        const Rollout r = net.iterate(s.left, s.right, cfg.infer_iterations);
        const Metrics m = metrics(r.final_disparity().values, s.gt);
        avg += m.avg_err / static_cast<double>(data.size());
        bad2 += m.bad2 / static_cast<double>(data.size());
        double prev = INFINITY;
        for (const auto& d : r.disparities) {
            const double e = metrics(d.value().reshaped(s.gt.shape()), s.gt).avg_err;
            monotone += e <= prev;
            prev = e;
            ++steps;
        }
    }
    const double secs = seconds_since(t0);
    o.require(data.size() == 4 && data[0].left.n == 50 && data[0].gt.shape() == Shape({64, 64}), "fixture shape");
    o.require(avg < kOverfitAvgErr, "AvgErr");
    o.require(bad2 < kOverfitBad2, "bad2.0");
    o.require(secs < kOverfitSeconds, "runtime");
    o.detail << "AvgErr " << avg << " px, bad2.0 " << bad2 << " %, per-iteration non-increasing "
             << 100.0 * static_cast<double>(monotone) / static_cast<double>(steps) << " %, " << secs << " s";
    return o;
}

// ---- 7 ---------------------------------------------------------------------

Outcome metric_oracle() {
    Outcome o;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-6.0, 6.0);
    std::size_t mismatches = 0, order = 0;
    for (int i = 0; i < 100; ++i) {
        Tensor gt = ref::random_tensor({1 + rng() % 12, 1 + rng() % 12}, rng, -3, 40);
        Tensor pred = gt;
        for (auto& v : pred.vec()) v += std::round(u(rng) * 4) / 4;  // many exact-threshold errors
        gt[0] = 5.0;
        const Metrics a = metrics(pred, gt), b = ref::metrics(pred, gt);
        mismatches += a.bad1 != b.bad1 || a.bad2 != b.bad2 || a.bad3 != b.bad3 || a.avg_err != b.avg_err ||
                      a.valid != b.valid;
        order += !(a.bad1 >= a.bad2 && a.bad2 >= a.bad3);
    }
    o.require(mismatches == 0, "oracle mismatch");
    o.require(order == 0, "bad1 >= bad2 >= bad3 violated");
    o.detail << "100 pairs, " << mismatches << " mismatches";
    return o;
}

// ---- 8 ---------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool sh(const std::string& cmd) { return std::system((cmd + " 2>/dev/null").c_str()) == 0; }

Outcome determinism() {
    Outcome o;
    const std::string exe = SSN_CLI_PATH;
    std::vector<std::string> csvs, curves;
    for (const char* tag : {"a", "b"}) {
        const fs::path dir = scratch(std::string("pipeline_") + tag);
        const std::string data = (dir / "data").string(), run = (dir / "run").string();
        bool ok = sh(exe + " gen --out '" + data + "' --seed 7 --keep-frames");
        for (const auto& scene : list_scenes(data))
            ok = ok && sh(exe + " encode --frames '" + (scene / "frames").string() + "' --out '" + scene.string() + "'");
        ok = ok && sh(exe + " train --data '" + data + "' --out '" + run + "' --steps 50 --seed 7");
        ok = ok && sh(exe + " eval --model '" + run + "/model.ssnc' --data '" + data + "' --out '" + run + "/metrics.csv'");
        o.require(ok, std::string("pipeline ") + tag + " failed");
        csvs.push_back(slurp(dir / "run" / "metrics.csv"));
        curves.push_back(slurp(dir / "run" / "loss.csv"));
    }
    o.require(!csvs[0].empty() && csvs[0] == csvs[1], "metric CSVs differ");
    o.require(curves[0] == curves[1], "loss curves differ");
    o.detail << "gen -> encode -> train(50) -> eval twice, metric CSVs byte-identical (" << csvs[0].size() << " bytes)";
    return o;
}

// ---- 9 ---------------------------------------------------------------------

Outcome weighting() {
    Outcome o;
    const auto w = iteration_weights(16, 0.9);
    bool table = w.size() == 16;
    for (std::size_t t = 1; t <= 16 && table; ++t) table = w[t - 1] == std::pow(0.9, static_cast<double>(16 - t));
    o.require(table, "weight table");
    const Tensor gt({2, 2}, 4.0);
    const double l = stereo_loss({Var(Tensor({1, 2, 2}, 3.0)), Var(Tensor({1, 2, 2}, 5.0))}, gt, 0.9).value().item();
    o.require(l == 1.9, "hand example");
    o.detail << "w_1 = " << w[0] << ", w_16 = " << w[15] << ", hand example " << l;
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"codec exactness", codec},
        {"oracle equivalence", oracles},
        {"gradient correctness", gradients},
        {"contraction theory", contraction},
        {"spectrum check", spectrum},
        {"desk-scale overfit", overfit},
        {"metric correctness", metric_oracle},
        {"determinism", determinism},
        {"loss weighting", weighting},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [exception: " << e.what() << "]";
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << o.detail.str()
                  << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
