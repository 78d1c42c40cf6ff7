#pragma once

// Procedural stereo scenes: textured planes seen by a rectified rig. Every
// plane has an affine disparity field in its own coordinates, so ground
// truth is exact at every pixel and the right view is the left view shifted
// per plane, composited back to front.

#include <limits>

#include "ssn/refinement.hpp"
#include "ssn/spike_codec.hpp"

namespace ssn {

struct ScenePlane {
    /// Depth at the plane's reference point (u = 0, y = 0 in plane coordinates).
    double depth_m = 1.0;
    /// Disparity change per pixel along x and y; zero for fronto-parallel planes.
    double slope_x = 0.0, slope_y = 0.0;
    /// Extent in left-image pixels at t = 0. Infinite bounds make a backdrop.
    double x0 = -std::numeric_limits<double>::infinity(), x1 = std::numeric_limits<double>::infinity();
    double y0 = -std::numeric_limits<double>::infinity(), y1 = std::numeric_limits<double>::infinity();
    /// Horizontal motion in px per keyframe.
    double velocity = 0.0;
    std::uint64_t texture_seed = 0;
    double texture_scale = 3.0;  // lattice spacing in px
    double brightness = 0.5, contrast = 0.4;
};

struct SceneSpec {
    std::size_t height = 64, width = 64;
    RigCalibration rig{};
    std::vector<ScenePlane> planes;  // back to front

    /// Throws on unordered or equal-depth overlapping planes and on negative disparity.
    void validate() const;
};

/// Disparity of a plane at left-image pixel (x, y) and keyframe time t.
double plane_disparity(const ScenePlane& p, const RigCalibration& rig, double x, double y, double t);

struct SceneRender {
    FrameSequence left, right;
    DisparityField gt;        // left view at the middle of the sequence
    DisparityField gt_right;  // right view, same time
};

/// Renders `keyframes` keyframes and linearly interpolates interp_factor - 1
/// frames between each pair: (keyframes - 1) * interp_factor + 1 frames.
/// Intensities are quantized to 16 bits so frames survive a PGM round trip.
SceneRender gen_scene(const SceneSpec& spec, std::size_t keyframes, std::size_t interp_factor);

/// Random backdrop plus 1..max_objects nearer rectangles, disparities in
/// [min_disp, max_disp].
SceneSpec random_scene(std::uint64_t seed, std::size_t height, std::size_t width, const RigCalibration& rig,
                       double min_disp = 4.0, double max_disp = 20.0, std::size_t max_objects = 3,
                       double max_velocity = 0.0);

}  // namespace ssn
