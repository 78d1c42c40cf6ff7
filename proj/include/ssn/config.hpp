#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ssn/scene.hpp"
#include "ssn/training.hpp"

namespace ssn {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Environment variable naming a config file used when --config is absent.
inline constexpr const char* kConfigEnvVar = "SPIKESTEREO_CONFIG";

/// Every tunable of a run in one place. Serialized as `key = value` lines;
/// '#' starts a comment. Unknown keys are rejected.
struct RunConfig {
    RunConfig() { apply_preset("desk"); }

    std::string preset = "desk";
    std::uint64_t seed = 0;

    // scenes
    std::size_t height = 64, width = 64;
    std::size_t scenes = 4;
    std::size_t keyframes = 2;
    std::size_t interp = 50;
    double min_disp = 4.0, max_disp = 20.0;
    std::size_t max_objects = 3;
    double max_velocity = 0.0;
    RigCalibration rig{};

    EncoderConfig encoder{};
    NetConfig net = NetConfig::desk();
    TrainConfig train{};
    /// Refinement iterations at inference.
    std::size_t infer_iterations = 16;

    std::string data_dir, out_dir;

    /// Applies a named preset ("desk" or "full") to net and training fields.
    void apply_preset(const std::string& name);

    static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
    static RunConfig load(const std::filesystem::path& path);
    std::string to_text() const;
    void save(const std::filesystem::path& path) const;

    /// Overrides one key; throws ConfigError on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    static std::vector<std::string> keys();

    void validate() const;
};

}  // namespace ssn
