#include "ssn/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "ssn/io_formats.hpp"

namespace ssn {

std::filesystem::path scene_dir(const std::filesystem::path& root, std::size_t index) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04zu", index);
    return root / name;
}

EncoderConfig view_encoder(const RunConfig& cfg, std::size_t view) {
    EncoderConfig e = cfg.encoder;
    e.seed = cfg.seed * 2 + view;
    return e;
}

FrameSequence encoded_frames(const FrameSequence& rendered) {
    if (rendered.t < 2) throw std::invalid_argument("need at least two rendered frames");
    FrameSequence out(rendered.t - 1, rendered.h, rendered.w);
    out.dt = rendered.dt;
    std::copy(rendered.data.begin() + static_cast<std::ptrdiff_t>(rendered.h * rendered.w), rendered.data.end(),
              out.data.begin());
    return out;
}

void write_frames(const std::filesystem::path& dir, const FrameSequence& frames) {
    std::filesystem::create_directories(dir);
    for (std::size_t n = 0; n < frames.t; ++n) {
        char name[32];
        std::snprintf(name, sizeof name, "%04zu.pgm", n + 1);
        const auto f = frames.frame(n);
        write_pgm(dir / name, Tensor({frames.h, frames.w}, std::vector<double>(f.begin(), f.end())), 65535);
    }
}

FrameSequence read_frames(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw std::runtime_error("frame directory " + dir.string() + " not found");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
    if (files.empty()) throw std::runtime_error("no .pgm frames in " + dir.string());
    std::sort(files.begin(), files.end());
    const Tensor first = read_pgm(files.front());
    FrameSequence seq(files.size(), first.dim(0), first.dim(1));
    for (std::size_t n = 0; n < files.size(); ++n) {
        const Tensor img = n == 0 ? first : read_pgm(files[n]);
        if (img.shape() != first.shape())
            throw ShapeError(files[n].string() + " has size " + shape_str(img.shape()) + ", expected " +
                             shape_str(first.shape()));
        std::copy(img.vec().begin(), img.vec().end(), seq.data.begin() + static_cast<std::ptrdiff_t>(n * img.numel()));
    }
    return seq;
}

nlohmann::json scene_to_json(const SceneSpec& spec) {
    auto bound = [](double v) -> nlohmann::json {
        if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
        return v;
    };
    nlohmann::json planes = nlohmann::json::array();
    for (const auto& p : spec.planes)
        planes.push_back({{"depth_m", p.depth_m},
                          {"slope_x", p.slope_x},
                          {"slope_y", p.slope_y},
                          {"x0", bound(p.x0)},
                          {"x1", bound(p.x1)},
                          {"y0", bound(p.y0)},
                          {"y1", bound(p.y1)},
                          {"velocity", p.velocity},
                          {"texture_seed", p.texture_seed},
                          {"texture_scale", p.texture_scale},
                          {"brightness", p.brightness},
                          {"contrast", p.contrast}});
    return {{"height", spec.height},
            {"width", spec.width},
            {"rig",
             {{"baseline_m", spec.rig.baseline_m},
              {"focal_px", spec.rig.focal_px},
              {"principal_offset_px", spec.rig.principal_offset_px}}},
            {"planes", planes}};
}

void generate_dataset(const std::filesystem::path& root, const RunConfig& cfg, bool keep_frames) {
    cfg.validate();
    std::filesystem::create_directories(root);
    cfg.save(root / "config.txt");
    const EncoderConfig enc_l = view_encoder(cfg, 0), enc_r = view_encoder(cfg, 1);
    for (std::size_t i = 0; i < cfg.scenes; ++i) {
        const SceneSpec spec = random_scene(cfg.seed * 1000003ULL + i, cfg.height, cfg.width, cfg.rig, cfg.min_disp,
                                            cfg.max_disp, cfg.max_objects, cfg.max_velocity);
        const SceneRender r = gen_scene(spec, cfg.keyframes, cfg.interp);
        const FrameSequence fl = encoded_frames(r.left), fr = encoded_frames(r.right);
        const auto dir = scene_dir(root, i);
        std::filesystem::create_directories(dir);
        write_dat(dir / "left.dat", encode(fl, enc_l));
        write_dat(dir / "right.dat", encode(fr, enc_r));
        write_pfm(dir / "gt.pfm", r.gt.values);
        write_pfm(dir / "gt_right.pfm", r.gt_right.values);
        if (keep_frames) {
            write_frames(dir / "frames" / "left", fl);
            write_frames(dir / "frames" / "right", fr);
        }
        nlohmann::json meta = {{"scene", scene_to_json(spec)},
                               {"keyframes", cfg.keyframes},
                               {"interp", cfg.interp},
                               {"steps", fl.t},
                               {"encoder",
                                {{"threshold", cfg.encoder.threshold},
                                 {"noise_std", cfg.encoder.noise_std},
                                 {"seed_left", enc_l.seed},
                                 {"seed_right", enc_r.seed}}}};
        std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
    }
}

Sample load_sample(const std::filesystem::path& dir) {
    Sample s;
    s.name = dir.filename().string();
    s.left = read_dat(dir / "left.dat");
    s.right = read_dat(dir / "right.dat");
    s.gt = read_pfm(dir / "gt.pfm");
    if (std::filesystem::exists(dir / "gt_right.pfm")) s.gt_right = read_pfm(dir / "gt_right.pfm");
    if (s.left.h != s.gt.dim(0) || s.left.w != s.gt.dim(1))
        throw ShapeError(dir.string() + ": gt " + shape_str(s.gt.shape()) + " does not match stream size " +
                         std::to_string(s.left.h) + "x" + std::to_string(s.left.w));
    return s;
}

std::vector<std::filesystem::path> list_scenes(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root)) throw std::runtime_error("dataset directory " + root.string() + " not found");
    std::vector<std::filesystem::path> dirs;
    for (const auto& e : std::filesystem::directory_iterator(root))
        if (e.is_directory() && e.path().filename().string().rfind("scene_", 0) == 0) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw std::runtime_error("no scene_* directories in " + root.string());
    return dirs;
}

std::vector<Sample> load_dataset(const std::filesystem::path& root) {
    std::vector<Sample> out;
    for (const auto& d : list_scenes(root)) out.push_back(load_sample(d));
    return out;
}

}  // namespace ssn
