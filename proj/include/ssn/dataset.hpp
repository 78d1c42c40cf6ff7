#pragma once

// On-disk dataset layout:
//
//   <root>/scene_0000/left.dat      spike stream, left view
//   <root>/scene_0000/right.dat     spike stream, right view
//   <root>/scene_0000/gt.pfm        left-view disparity (px) at the middle of the stream
//   <root>/scene_0000/gt_right.pfm  right-view disparity
//   <root>/scene_0000/meta.json     scene spec, rig and encoder settings
//   <root>/scene_0000/frames/{left,right}/NNNN.pgm   (optional) encoded frames
//   <root>/config.txt               resolved run config

#include "ssn/config.hpp"

namespace ssn {

std::filesystem::path scene_dir(const std::filesystem::path& root, std::size_t index);

/// Per-view encoder settings derived from the run seed.
EncoderConfig view_encoder(const RunConfig& cfg, std::size_t view);

/// The frames that get encoded: everything after the first rendered frame,
/// so 2 keyframes at interp 50 give N = 50.
FrameSequence encoded_frames(const FrameSequence& rendered);

/// Writes frames as 16-bit PGMs named 0001.pgm, 0002.pgm, ...
void write_frames(const std::filesystem::path& dir, const FrameSequence& frames);
/// Reads every *.pgm in lexicographic order.
FrameSequence read_frames(const std::filesystem::path& dir);

nlohmann::json scene_to_json(const SceneSpec& spec);

/// Renders, encodes and writes cfg.scenes scenes plus the resolved config.
void generate_dataset(const std::filesystem::path& root, const RunConfig& cfg, bool keep_frames);

Sample load_sample(const std::filesystem::path& dir);
/// All scene_* directories under root, in name order.
std::vector<Sample> load_dataset(const std::filesystem::path& root);
std::vector<std::filesystem::path> list_scenes(const std::filesystem::path& root);

}  // namespace ssn
