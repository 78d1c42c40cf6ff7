#include "cli.hpp"

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "ssn/dataset.hpp"
#include "ssn/dynamics.hpp"
#include "ssn/io_formats.hpp"

namespace ssn::cli {

namespace {

namespace fs = std::filesystem;

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
};

RunConfig resolve_config(const Common& c) {
    RunConfig cfg;
    std::string path = c.config_path;
    if (path.empty())
        if (const char* env = std::getenv(kConfigEnvVar)) path = env;
    if (!path.empty()) cfg = RunConfig::load(path);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

void log(const std::string& msg) { std::cerr << msg << std::endl; }

// ---- gen -------------------------------------------------------------------

struct GenArgs {
    std::string out;
    std::size_t scenes = 0, frames = 0, interp = 0;
    std::uint64_t seed = 0;
    bool seed_set = false, keep_frames = false;
};

int cmd_gen(const Common& common, const GenArgs& a) {
    RunConfig cfg = resolve_config(common);
    if (a.scenes) cfg.scenes = a.scenes;
    if (a.frames) cfg.keyframes = a.frames;
    if (a.interp) cfg.interp = a.interp;
    if (a.seed_set) cfg.seed = a.seed;
    cfg.data_dir = a.out;
    cfg.validate();
    generate_dataset(a.out, cfg, a.keep_frames);
    log("wrote " + std::to_string(cfg.scenes) + " scenes to " + a.out);
    return 0;
}

// ---- encode ----------------------------------------------------------------

struct EncodeArgs {
    std::string frames, out;
    double threshold = 0.0;
};

int cmd_encode(const Common& common, const EncodeArgs& a) {
    RunConfig cfg = resolve_config(common);
    if (a.threshold > 0.0) cfg.encoder.threshold = a.threshold;
    cfg.validate();
    const fs::path root(a.frames);
    if (!fs::is_directory(root / "left") || !fs::is_directory(root / "right"))
        throw std::runtime_error("frame directory " + a.frames + " must contain left/ and right/ subdirectories");
    fs::create_directories(a.out);
    for (std::size_t view = 0; view < 2; ++view) {
        const char* name = view == 0 ? "left" : "right";
        const FrameSequence frames = read_frames(root / name);
        const SpikeStream s = encode(frames, view_encoder(cfg, view));
        write_dat(fs::path(a.out) / (std::string(name) + ".dat"), s);
        log(std::string(name) + ": " + std::to_string(s.n) + " steps, " + std::to_string(s.count()) + " spikes");
    }
    cfg.save(fs::path(a.out) / "config.txt");
    return 0;
}

// ---- decode-tfi ------------------------------------------------------------

struct TfiArgs {
    std::string dat, out;
    std::size_t step = 0, window = 0;
};

int cmd_tfi(const Common& common, const TfiArgs& a) {
    RunConfig cfg = resolve_config(common);
    const SpikeStream s = read_dat(a.dat);
    const std::size_t center = a.step ? a.step : (s.n + 1) / 2;
    const std::size_t window = a.window ? a.window : s.n;
    const Tensor img = tfi_reconstruct(s, center, window, cfg.encoder.threshold);
    const fs::path out(a.out);
    if (out.extension() == ".pfm") write_pfm(out, img);
    else write_pgm(out, img);
    return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
    std::string data, out;
    std::size_t steps = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int cmd_train(const Common& common, const TrainArgs& a) {
    RunConfig cfg = resolve_config(common);
    if (a.steps) cfg.train.steps = a.steps;
    if (a.seed_set) cfg.seed = a.seed;
    cfg.data_dir = a.data;
    cfg.out_dir = a.out;
    cfg.validate();
    const fs::path out(a.out);
    fs::create_directories(out);
    cfg.save(out / "config.txt");

    const auto data = load_dataset(a.data);
    SpikeStereoNet net(cfg.net, cfg.seed);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    tc.dump_dir = out;
    CsvWriter curve(out / "loss.csv", {"step", "lr", "loss", "stereo", "rate_reg", "voltage_reg", "clipped"});
    log("training " + std::to_string(net.params().scalar_count()) + " parameters on " + std::to_string(data.size()) +
        " samples for " + std::to_string(tc.steps) + " steps");
    train(net, data, tc, [&](const TrainRecord& r) {
        curve.row(std::vector<std::string>{std::to_string(r.step), format_double(r.lr), format_double(r.loss),
                                           format_double(r.stereo), format_double(r.rate), format_double(r.voltage),
                                           std::to_string(r.clipped)});
        if (r.step % 50 == 0 || r.step + 1 == tc.steps)
            log("step " + std::to_string(r.step) + " loss " + format_double(r.loss));
    });
    net.save(out / "model.ssnc", {{"steps", tc.steps}, {"seed", cfg.seed}, {"iterations", tc.iterations}});
    return 0;
}

// ---- infer / eval ----------------------------------------------------------

DisparityField predict(const SpikeStereoNet& net, const SpikeStream& l, const SpikeStream& r, std::size_t iters) {
    NoGradGuard guard;
    return net.iterate(l, r, iters).final_disparity();
}

void write_prediction(const fs::path& dir, const DisparityField& d, const RigCalibration& rig) {
    fs::create_directories(dir);
    write_pfm(dir / "disparity.pfm", d.values);
    write_pgm(dir / "disparity.pgm", normalize_for_display(d.values));
    write_pfm(dir / "depth.pfm", disparity_to_depth(d, rig).depth_m);
}

struct InferArgs {
    std::string model, left, right, data, out;
    std::size_t iters = 0;  // 0: infer_iterations from the config (16)
};

int cmd_infer(const Common& common, const InferArgs& a) {
    RunConfig cfg = resolve_config(common);
    if (a.iters) cfg.infer_iterations = a.iters;
    cfg.validate();
    const std::size_t iters = cfg.infer_iterations;
    const SpikeStereoNet net = SpikeStereoNet::load(a.model);
    const fs::path out(a.out);
    if (!a.data.empty()) {
        for (const auto& dir : list_scenes(a.data)) {
            const Sample s = load_sample(dir);
            write_prediction(out / dir.filename(), predict(net, s.left, s.right, iters), cfg.rig);
        }
    } else {
        if (a.left.empty() || a.right.empty()) throw std::runtime_error("infer needs --left and --right, or --data");
        write_prediction(out, predict(net, read_dat(a.left), read_dat(a.right), iters), cfg.rig);
    }
    cfg.save(out / "config.txt");
    return 0;
}

struct EvalArgs {
    std::string pred, model, data, out;
    std::size_t iters = 0;
};

int cmd_eval(const Common& common, const EvalArgs& a) {
    RunConfig cfg = resolve_config(common);
    if (a.iters) cfg.infer_iterations = a.iters;
    cfg.validate();
    const std::size_t iters = cfg.infer_iterations;
    if (a.pred.empty() == a.model.empty()) throw std::runtime_error("eval needs exactly one of --pred or --model");
    std::optional<SpikeStereoNet> net;
    if (!a.model.empty()) net.emplace(SpikeStereoNet::load(a.model));

    const fs::path out(a.out);
    CsvWriter csv(out, {"scene", "bad1", "bad2", "bad3", "avg_err", "valid"});
    Metrics sum;
    std::size_t n = 0;
    for (const auto& dir : list_scenes(a.data)) {
        const Tensor gt = read_pfm(dir / "gt.pfm");
        Tensor pred;
        if (net) {
            pred = predict(*net, read_dat(dir / "left.dat"), read_dat(dir / "right.dat"), iters).values;
        } else {
            pred = read_pfm(fs::path(a.pred) / dir.filename() / "disparity.pfm");
        }
        const Metrics m = metrics(pred, gt);
        csv.row(std::vector<std::string>{dir.filename().string(), format_double(m.bad1), format_double(m.bad2),
                                         format_double(m.bad3), format_double(m.avg_err), std::to_string(m.valid)});
        sum.bad1 += m.bad1, sum.bad2 += m.bad2, sum.bad3 += m.bad3, sum.avg_err += m.avg_err, sum.valid += m.valid;
        ++n;
    }
    const double k = static_cast<double>(n);
    csv.row(std::vector<std::string>{"mean", format_double(sum.bad1 / k), format_double(sum.bad2 / k),
                                     format_double(sum.bad3 / k), format_double(sum.avg_err / k),
                                     std::to_string(sum.valid)});
    fs::path cfg_path = out;
    cfg_path.replace_extension(".config.txt");
    cfg.save(cfg_path);
    log("mean avg_err " + format_double(sum.avg_err / k) + " px, bad2 " + format_double(sum.bad2 / k) + "%");
    return 0;
}

// ---- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
    std::string model, data, out;
    std::size_t iters = 0;
    std::size_t theory_sets = 20;
};

int cmd_analyze(const Common& common, const AnalyzeArgs& a) {
    RunConfig cfg = resolve_config(common);
    if (a.iters) cfg.infer_iterations = a.iters;
    cfg.validate();
    const std::size_t iters = cfg.infer_iterations;
    const SpikeStereoNet net = SpikeStereoNet::load(a.model);
    const fs::path out(a.out);
    fs::create_directories(out);
    cfg.save(out / "config.txt");
    const auto scenes = list_scenes(a.data);

    // Trained network: state differences, final-step linearization, PCA.
    CsvWriter diffs(out / "state_differences.csv", {"scene", "iteration", "difference"});
    std::vector<PlotSeries> diff_series;
    std::vector<std::vector<Tensor>> traces;
    std::optional<DynamicsSnapshot> final_snap;
    for (const auto& dir : scenes) {
        const Sample s = load_sample(dir);
        NoGradGuard guard;
        const Rollout r = net.iterate(s.left, s.right, iters, true);
        const auto d = state_differences(r.snapshots);
        PlotSeries ps{s.name, {}, {}};
        for (std::size_t t = 0; t < d.size(); ++t) {
            diffs.row(std::vector<std::string>{s.name, std::to_string(t + 1), format_double(d[t])});
            ps.x.push_back(static_cast<double>(t + 1));
            ps.y.push_back(d[t]);
        }
        diff_series.push_back(std::move(ps));
        std::vector<Tensor> trace;
        for (const auto& snap : r.snapshots) trace.push_back(snap.v);
        traces.push_back(std::move(trace));
        if (!final_snap) final_snap = r.snapshots.back();
    }
    write_svg(out / "state_differences.svg",
              {"Hidden-state differences", "iteration", "||u_t - u_{t-1}||", false, true}, diff_series);

    const auto jac = trained_jacobian(net.update_block().rsnn.layers[kQuarter], *final_snap, net.config().surrogate);
    const Spectrum spec = eigen_spectrum(jac.matrix);
    {
        CsvWriter ev(out / "eigenvalues.csv", {"re", "im", "modulus"});
        PlotSeries ps{"trained (" + std::to_string(jac.size) + "x" + std::to_string(jac.size) + " window)", {}, {}};
        for (const auto& z : spec.eigenvalues) {
            ev.row(std::vector<double>{z.real(), z.imag(), std::abs(z)});
            ps.x.push_back(z.real());
            ps.y.push_back(z.imag());
        }
        write_svg(out / "eigenvalues.svg", {"Linearization eigenvalues", "Re", "Im", true, false, true}, {ps});
    }
    log("trained linearization: " + std::to_string(jac.matrix.rows()) + " dims, max |lambda| " +
        format_double(spec.max_modulus));

    if (traces.size() >= 3) {
        const HiddenStatePca pca = hidden_state_pca(traces);
        if (pca.degenerate) log("warning: all inputs produced identical hidden states; PCA is degenerate");
        CsvWriter proj(out / "pca.csv", {"iteration", "scene", "pc1", "pc2"});
        CsvWriter disp(out / "dispersion.csv", {"iteration", "dispersion"});
        std::vector<PlotSeries> pts;
        PlotSeries dsp{"dispersion", {}, {}};
        for (std::size_t t = 0; t < pca.projections.size(); ++t) {
            PlotSeries ps{"t=" + std::to_string(t + 1), {}, {}};
            for (std::size_t i = 0; i < scenes.size(); ++i) {
                const auto& p = pca.projections[t][i];
                proj.row(std::vector<std::string>{std::to_string(t + 1), scenes[i].filename().string(),
                                                  format_double(p[0]), format_double(p[1])});
                ps.x.push_back(p[0]);
                ps.y.push_back(p[1]);
            }
            disp.row(std::vector<double>{static_cast<double>(t + 1), pca.dispersion[t]});
            dsp.x.push_back(static_cast<double>(t + 1));
            dsp.y.push_back(pca.dispersion[t]);
            pts.push_back(std::move(ps));
        }
        write_svg(out / "pca.svg", {"Hidden states, top-2 principal components", "PC1", "PC2", true}, pts);
        write_svg(out / "dispersion.svg", {"Mean pairwise distance in PC space", "iteration", "dispersion"}, {dsp});
    } else {
        log("skipping PCA: needs at least 3 scenes");
    }

    // Theory mode: random certified parameter sets.
    CsvWriter th(out / "theory_contraction.csv",
                 {"set", "lipschitz", "max_ratio", "max_eigen_modulus", "steps_to_1e-12", "predicted_steps"});
    PlotSeries lvr{"max ratio vs L", {}, {}}, ident{"ratio = L", {0.0, 1.0}, {0.0, 1.0}};
    for (std::size_t k = 0; k < a.theory_sets; ++k) {
        TheoryParams p = random_theory_params(cfg.seed * 7919 + k, 2, 6, 6, 0.5 + 0.45 * static_cast<double>(k) /
                                                                                   static_cast<double>(a.theory_sets));
        const TheoryMap map(p, 6, 6);
        const auto cr = contraction_test(map, 100, cfg.seed + k);
        Eigen::VectorXd u0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(map.dims()));
        const auto br = banach_convergence(map, u0, 50);
        const auto sp = eigen_spectrum(map.jacobian(br.fixed_point));
        th.row(std::vector<double>{static_cast<double>(k), cr.lipschitz, cr.max_ratio, sp.max_modulus,
                                   static_cast<double>(br.steps_to_tol), static_cast<double>(br.predicted_steps)});
        lvr.x.push_back(cr.lipschitz);
        lvr.y.push_back(cr.max_ratio);
    }
    write_svg(out / "theory_contraction.svg", {"Theory mode: measured ratio vs certified L", "L", "max ratio", true},
              {lvr, ident});
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Spiking stereo depth toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_option("--config", common.config_path,
                   std::string("key=value config file (default: $") + kConfigEnvVar + ")");
    app.add_option("--set", common.overrides, "override a config key, key=value (repeatable)");

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "generate a procedural stereo spike dataset");
    g->add_option("--out", gen.out, "dataset directory")->required();
    g->add_option("--scenes", gen.scenes, "number of scenes");
    g->add_option("--frames", gen.frames, "keyframes per scene");
    g->add_option("--interp", gen.interp, "interpolation factor between keyframes");
    g->add_option("--seed", gen.seed, "scene seed")->each([&](const std::string&) { gen.seed_set = true; });
    g->add_flag("--keep-frames", gen.keep_frames, "also write the encoded frames as 16-bit PGMs");

    EncodeArgs enc;
    auto* e = app.add_subcommand("encode", "encode left/ and right/ PGM frame folders into a .dat pair");
    e->add_option("--frames", enc.frames, "directory with left/ and right/ frame folders")->required();
    e->add_option("--out", enc.out, "output directory for left.dat and right.dat")->required();
    e->add_option("--threshold", enc.threshold, "firing threshold");

    TfiArgs tfi;
    auto* t = app.add_subcommand("decode-tfi", "reconstruct intensity from spike intervals");
    t->add_option("--dat", tfi.dat, "spike stream")->required();
    t->add_option("--out", tfi.out, "output image (.pgm or .pfm)")->required();
    t->add_option("--step", tfi.step, "1-indexed center step (default: middle)");
    t->add_option("--window", tfi.window, "max steps searched on each side (default: whole stream)");

    TrainArgs tr;
    auto* r = app.add_subcommand("train", "train on a dataset directory");
    r->add_option("--data", tr.data, "dataset directory")->required();
    r->add_option("--out", tr.out, "run directory (model, loss curve, config)")->required();
    r->add_option("--steps", tr.steps, "optimizer steps");
    r->add_option("--seed", tr.seed, "seed")->each([&](const std::string&) { tr.seed_set = true; });

    InferArgs inf;
    auto* i = app.add_subcommand("infer", "predict disparity and depth");
    i->add_option("--model", inf.model, "checkpoint")->required();
    i->add_option("--left", inf.left, "left .dat");
    i->add_option("--right", inf.right, "right .dat");
    i->add_option("--data", inf.data, "dataset directory (predict every scene)");
    i->add_option("--out", inf.out, "output directory")->required();
    i->add_option("--iters", inf.iters, "refinement iterations (default 16)");

    EvalArgs ev;
    auto* v = app.add_subcommand("eval", "score predictions against ground truth");
    v->add_option("--pred", ev.pred, "prediction directory from infer --data");
    v->add_option("--model", ev.model, "checkpoint (predict on the fly)");
    v->add_option("--data", ev.data, "dataset directory")->required();
    v->add_option("--out", ev.out, "metrics CSV")->required();
    v->add_option("--iters", ev.iters, "refinement iterations with --model (default 16)");

    AnalyzeArgs an;
    auto* z = app.add_subcommand("analyze", "dynamics diagnostics as CSV and SVG");
    z->add_option("--model", an.model, "checkpoint")->required();
    z->add_option("--data", an.data, "dataset directory")->required();
    z->add_option("--out", an.out, "output directory")->required();
    z->add_option("--iters", an.iters, "refinement iterations (default 16)");
    z->add_option("--theory-sets", an.theory_sets, "random theory-mode parameter sets")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err) == 0 ? 0 : 2;
    }

    try {
        if (*g) return cmd_gen(common, gen);
        if (*e) return cmd_encode(common, enc);
        if (*t) return cmd_tfi(common, tfi);
        if (*r) return cmd_train(common, tr);
        if (*i) return cmd_infer(common, inf);
        if (*v) return cmd_eval(common, ev);
        if (*z) return cmd_analyze(common, an);
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << std::endl;
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << std::endl;
        return 1;
    }
    return 1;
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"spikestereo"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace ssn::cli
