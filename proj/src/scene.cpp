#include "ssn/scene.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>

namespace ssn {

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double lattice(std::uint64_t seed, long i, long j) {
    const std::uint64_t h = mix(seed ^ mix(static_cast<std::uint64_t>(i) * 0x632be59bd9b4e019ULL ^
                                           mix(static_cast<std::uint64_t>(j))));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double value_noise(std::uint64_t seed, double u, double v, double scale) {
    const double fu = u / scale, fv = v / scale;
    const double iu = std::floor(fu), iv = std::floor(fv);
    auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
    const double a = smooth(fu - iu), b = smooth(fv - iv);
    const long i = static_cast<long>(iu), j = static_cast<long>(iv);
    const double n00 = lattice(seed, i, j), n10 = lattice(seed, i + 1, j);
    const double n01 = lattice(seed, i, j + 1), n11 = lattice(seed, i + 1, j + 1);
    return (1 - b) * ((1 - a) * n00 + a * n10) + b * ((1 - a) * n01 + a * n11);
}

double texture(const ScenePlane& p, double u, double y) {
    const double n = 0.65 * value_noise(p.texture_seed, u, y, p.texture_scale) +
                     0.35 * value_noise(p.texture_seed ^ 0xa5a5a5a5ULL, u, y, 0.5 * p.texture_scale);
    return std::clamp(p.brightness + p.contrast * (2.0 * n - 1.0), 0.0, 1.0);
}

double quantize16(double v) { return std::round(v * 65535.0) / 65535.0; }

double reference_disparity(const ScenePlane& p, const RigCalibration& rig) {
    return rig.baseline_m * rig.focal_px / p.depth_m - rig.principal_offset_px;
}

bool covers(const ScenePlane& p, double u, double y) { return u >= p.x0 && u < p.x1 && y >= p.y0 && y < p.y1; }

struct Hit {
    double intensity = 0.0;
    double disparity = 0.0;
    bool any = false;
};

// Painter's algorithm over planes ordered back to front. Also checks that a
// later plane is strictly nearer wherever it overlaps an earlier one.
Hit composite(const SceneSpec& spec, double x, double y, double t, bool right_view) {
    Hit hit;
    for (std::size_t k = 0; k < spec.planes.size(); ++k) {
        const ScenePlane& p = spec.planes[k];
        const double dref = reference_disparity(p, spec.rig);
        double u;
        if (right_view) {
            // xr = (u + v t) - (dref + sx u + sy y)
            u = (x - p.velocity * t + dref + p.slope_y * y) / (1.0 - p.slope_x);
        } else {
            u = x - p.velocity * t;
        }
        if (!covers(p, u, y)) continue;
        const double d = dref + p.slope_x * u + p.slope_y * y;
        if (d < 0.0)
            throw std::invalid_argument("plane " + std::to_string(k) + " has negative disparity " + std::to_string(d) +
                                        " at (" + std::to_string(x) + "," + std::to_string(y) + ")");
        if (hit.any && !(d > hit.disparity)) {
            if (d == hit.disparity)
                throw std::invalid_argument("planes overlap at equal depth near pixel (" + std::to_string(x) + "," +
                                            std::to_string(y) + ")");
            throw std::invalid_argument("plane " + std::to_string(k) +
                                        " is behind an earlier plane; planes must be ordered back to front");
        }
        hit = {texture(p, u, y), d, true};
    }
    return hit;
}

}  // namespace

void SceneSpec::validate() const {
    if (height == 0 || width == 0) throw std::invalid_argument("scene size must be positive");
    rig.validate();
    if (planes.empty()) throw std::invalid_argument("scene needs at least one plane");
    for (std::size_t k = 0; k < planes.size(); ++k) {
        const auto& p = planes[k];
        const std::string tag = "plane " + std::to_string(k) + ": ";
        if (!(p.depth_m > 0.0)) throw std::invalid_argument(tag + "depth must be positive");
        if (!(std::abs(p.slope_x) < 0.5) || !(std::abs(p.slope_y) < 0.5))
            throw std::invalid_argument(tag + "disparity slopes must lie in (-0.5, 0.5)");
        if (!(p.x1 > p.x0) || !(p.y1 > p.y0)) throw std::invalid_argument(tag + "empty extent");
        if (!(p.texture_scale > 0.0)) throw std::invalid_argument(tag + "texture scale must be positive");
    }
    for (std::size_t a = 0; a < planes.size(); ++a)
        for (std::size_t b = a + 1; b < planes.size(); ++b) {
            const auto &p = planes[a], &q = planes[b];
            const bool overlap = p.x0 < q.x1 && q.x0 < p.x1 && p.y0 < q.y1 && q.y0 < p.y1;
            const bool flat = p.slope_x == 0 && p.slope_y == 0 && q.slope_x == 0 && q.slope_y == 0;
            if (overlap && flat && p.velocity == q.velocity && p.depth_m == q.depth_m)
                throw std::invalid_argument("planes " + std::to_string(a) + " and " + std::to_string(b) +
                                            " overlap at equal depth");
        }
}

double plane_disparity(const ScenePlane& p, const RigCalibration& rig, double x, double y, double t) {
    const double u = x - p.velocity * t;
    return reference_disparity(p, rig) + p.slope_x * u + p.slope_y * y;
}

SceneRender gen_scene(const SceneSpec& spec, std::size_t keyframes, std::size_t interp_factor) {
    spec.validate();
    if (keyframes == 0 || interp_factor == 0) throw std::invalid_argument("keyframes and interp_factor must be >= 1");
    const std::size_t h = spec.height, w = spec.width, hw = h * w;

    std::vector<std::vector<double>> keys_l(keyframes, std::vector<double>(hw));
    std::vector<std::vector<double>> keys_r(keyframes, std::vector<double>(hw));
    for (std::size_t k = 0; k < keyframes; ++k) {
        const double t = static_cast<double>(k);
        // Exceptions must not escape the parallel region; keep the first and rethrow.
        std::exception_ptr err;
#pragma omp parallel for schedule(static)
        for (std::size_t y = 0; y < h; ++y) {
            try {
                for (std::size_t x = 0; x < w; ++x) {
                    keys_l[k][y * w + x] = quantize16(composite(spec, static_cast<double>(x), static_cast<double>(y), t, false).intensity);
                    keys_r[k][y * w + x] = quantize16(composite(spec, static_cast<double>(x), static_cast<double>(y), t, true).intensity);
                }
            } catch (...) {
#pragma omp critical(ssn_scene_error)
                if (!err) err = std::current_exception();
            }
        }
        if (err) std::rethrow_exception(err);
    }

    const std::size_t frames = (keyframes - 1) * interp_factor + 1;
    SceneRender out{FrameSequence(frames, h, w), FrameSequence(frames, h, w), {Tensor({h, w}), FieldScale::Full},
                    {Tensor({h, w}), FieldScale::Full}};
    for (std::size_t f = 0; f < frames; ++f) {
        const std::size_t k = std::min(f / interp_factor, keyframes - 1);
        const double a = static_cast<double>(f - k * interp_factor) / static_cast<double>(interp_factor);
        const std::size_t k1 = std::min(k + 1, keyframes - 1);
        for (std::size_t i = 0; i < hw; ++i) {
            out.left.data[f * hw + i] = quantize16((1.0 - a) * keys_l[k][i] + a * keys_l[k1][i]);
            out.right.data[f * hw + i] = quantize16((1.0 - a) * keys_r[k][i] + a * keys_r[k1][i]);
        }
    }

    const double t_mid = 0.5 * static_cast<double>(keyframes - 1);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const Hit l = composite(spec, static_cast<double>(x), static_cast<double>(y), t_mid, false);
            const Hit r = composite(spec, static_cast<double>(x), static_cast<double>(y), t_mid, true);
            out.gt.values[y * w + x] = l.any ? l.disparity : 0.0;
            out.gt_right.values[y * w + x] = r.any ? r.disparity : 0.0;
        }
    return out;
}

SceneSpec random_scene(std::uint64_t seed, std::size_t height, std::size_t width, const RigCalibration& rig,
                       double min_disp, double max_disp, std::size_t max_objects, double max_velocity) {
    if (!(max_disp > min_disp && min_disp >= 0.0)) throw std::invalid_argument("need 0 <= min_disp < max_disp");
    std::mt19937_64 rng(seed);
    auto uni = [&](double a, double b) { return a + (b - a) * (static_cast<double>(rng() >> 11) * 0x1.0p-53); };
    const double bf = rig.baseline_m * rig.focal_px;
    const double W = static_cast<double>(width), H = static_cast<double>(height);

    SceneSpec spec;
    spec.height = height;
    spec.width = width;
    spec.rig = rig;

    // Backdrop: gently slanted, filling the lower part of the range.
    const double span = max_disp - min_disp;
    ScenePlane back;
    back.slope_x = uni(-0.02, 0.02);
    back.slope_y = uni(-0.02, 0.02);
    const double back_center = uni(min_disp + 0.1 * span, min_disp + 0.3 * span);
    const double back_ref = back_center - back.slope_x * W / 2 - back.slope_y * H / 2;
    back.depth_m = bf / (back_ref + rig.principal_offset_px);
    back.texture_seed = rng();
    back.texture_scale = uni(2.5, 4.0);
    back.brightness = uni(0.4, 0.6);
    back.contrast = uni(0.3, 0.4);
    back.velocity = uni(-max_velocity, max_velocity);
    spec.planes.push_back(back);

    const std::size_t objects = 1 + static_cast<std::size_t>(rng() % std::max<std::size_t>(max_objects, 1));
    double floor_disp = back_center + std::abs(back.slope_x) * W + std::abs(back.slope_y) * H;
    for (std::size_t k = 0; k < objects; ++k) {
        ScenePlane p;
        const double lo = floor_disp + 1.0;
        if (lo >= max_disp) break;
        const double d = uni(lo, std::min(max_disp, lo + span / static_cast<double>(objects)));
        p.depth_m = bf / (d + rig.principal_offset_px);
        const double ow = uni(0.25, 0.5) * W, oh = uni(0.25, 0.5) * H;
        p.x0 = std::floor(uni(0.0, W - ow));
        p.x1 = p.x0 + std::round(ow);
        p.y0 = std::floor(uni(0.0, H - oh));
        p.y1 = p.y0 + std::round(oh);
        p.texture_seed = rng();
        p.texture_scale = uni(2.0, 3.5);
        p.brightness = uni(0.35, 0.65);
        p.contrast = uni(0.3, 0.4);
        p.velocity = uni(-max_velocity, max_velocity);
        spec.planes.push_back(p);
        floor_disp = d;
    }
    return spec;
}

}  // namespace ssn
