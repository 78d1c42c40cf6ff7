#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssn/autograd.hpp"

namespace ssn {

/// Named trainable leaves, in registration order.
class ParamStore {
public:
    Var add(const std::string& name, Tensor init);
    const Var& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
    std::size_t scalar_count() const;
    void zero_grad();

    /// Replace values by name. Missing names or shape mismatches throw.
    void assign(const std::map<std::string, Tensor>& values);

private:
    std::vector<std::pair<std::string, Var>> entries_;
    std::map<std::string, std::size_t> index_;
};

/// Seeded weight initializer.
class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    /// Uniform in +-gain*sqrt(3/fan_in) (variance gain^2/fan_in).
    Tensor uniform_fan_in(Shape shape, std::size_t fan_in, double gain = 1.0);
    Tensor normal(Shape shape, double stddev);

    std::mt19937_64& rng() { return rng_; }

private:
    std::mt19937_64 rng_;
};

// Checkpoint: "SSNC" | u32 version | u64 manifest bytes | manifest JSON | float32 LE payload.
// Manifest: {"tensors":[{"name","shape","offset"}], "meta":{...}}; offsets in bytes from payload start.
void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const nlohmann::json& meta);

struct Checkpoint {
    nlohmann::json meta;
    std::map<std::string, Tensor> tensors;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ssn
