#pragma once

// Integrate-and-fire spike camera model: frames -> binary spike stream,
// the bit-packed .dat container, and interval-based (TFI) reconstruction.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "ssn/tensor.hpp"

namespace ssn {

class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// T x H x W intensities in [0,1], one frame per readout interval.
struct FrameSequence {
    std::size_t t = 0, h = 0, w = 0;
    std::vector<double> data;
    double dt = 1.0;

    FrameSequence() = default;
    FrameSequence(std::size_t t_, std::size_t h_, std::size_t w_, double fill = 0.0)
        : t(t_), h(h_), w(w_), data(t_ * h_ * w_, fill) {}

    double& at(std::size_t n, std::size_t y, std::size_t x) { return data[(n * h + y) * w + x]; }
    double at(std::size_t n, std::size_t y, std::size_t x) const { return data[(n * h + y) * w + x]; }
    std::span<const double> frame(std::size_t n) const { return {data.data() + n * h * w, h * w}; }

    /// Throws std::invalid_argument if any intensity leaves [0,1].
    void validate() const;
};

/// N x H x W binary firing flags, one byte per flag in memory.
struct SpikeStream {
    std::size_t n = 0, h = 0, w = 0;
    std::vector<std::uint8_t> bits;

    SpikeStream() = default;
    SpikeStream(std::size_t n_, std::size_t h_, std::size_t w_) : n(n_), h(h_), w(w_), bits(n_ * h_ * w_, 0) {}

    std::uint8_t& at(std::size_t t, std::size_t y, std::size_t x) { return bits[(t * h + y) * w + x]; }
    std::uint8_t at(std::size_t t, std::size_t y, std::size_t x) const { return bits[(t * h + y) * w + x]; }

    std::size_t count() const;
    bool operator==(const SpikeStream&) const = default;
};

struct EncoderConfig {
    double threshold = 5.0;
    double noise_std = 0.0;  // dark-current intensity, zero-mean Gaussian per step
    std::uint64_t seed = 0;
};

/// Per-pixel integrator. potential stays in [0, threshold) as long as no
/// single-step input exceeds the threshold.
struct AccumulatorState {
    std::size_t h = 0, w = 0;
    std::vector<double> potential;
    std::vector<long> last_fire;  // 1-indexed step of last spike, 0 if none

    AccumulatorState(std::size_t h_, std::size_t w_) : h(h_), w(w_), potential(h_ * w_, 0.0), last_fire(h_ * w_, 0) {}
};

/// Streaming encoder; `step` integrates one frame and emits one spike frame.
class SpikeEncoder {
public:
    SpikeEncoder(std::size_t h, std::size_t w, EncoderConfig cfg);

    void step(std::span<const double> frame, std::span<std::uint8_t> spikes_out);
    const AccumulatorState& state() const { return state_; }
    std::size_t steps_done() const { return step_; }

private:
    EncoderConfig cfg_;
    AccumulatorState state_;
    std::size_t step_ = 0;
};

SpikeStream encode(const FrameSequence& frames, const EncoderConfig& cfg);

/// Dark-current sample for (seed, step, pixel); counter-based so pixels can be
/// processed in any order.
double dark_noise(std::uint64_t seed, std::size_t step, std::size_t pixel, double stddev);

// .dat layout: "SPK1" | u32 version | u32 N | u32 H | u32 W | payload
// payload: flags in (t,row,col) order, 8 per byte, LSB first, last byte zero padded.
inline constexpr std::array<char, 4> kDatMagic{'S', 'P', 'K', '1'};
inline constexpr std::uint32_t kDatVersion = 1;
inline constexpr std::size_t kDatHeaderBytes = 20;

std::vector<std::uint8_t> pack_dat(const SpikeStream& stream);
SpikeStream unpack_dat(std::span<const std::uint8_t> bytes);

void write_dat(const std::filesystem::path& path, const SpikeStream& stream);
SpikeStream read_dat(const std::filesystem::path& path);

/// Texture-from-interval: threshold_units / (next spike after center - last
/// spike at or before center), both within +-max_window steps of center_step
/// (1-indexed). Pixels without a bracketing pair read 0.
Tensor tfi_reconstruct(const SpikeStream& stream, std::size_t center_step, std::size_t max_window,
                       double threshold_units = 1.0);

struct SubstreamSplit {
    std::array<SpikeStream, 3> parts;      // equal length, zero padded at the end
    std::array<std::size_t, 3> real_steps;  // unpadded steps in each part
    std::size_t padded_steps = 0;
};

/// Three contiguous non-overlapping substreams; the middle one carries the
/// estimation timestamp.
SubstreamSplit split_substreams(const SpikeStream& stream);

/// Sums consecutive spike frames into `bins` channels -> Tensor[bins,H,W].
Tensor bin_stream(const SpikeStream& stream, std::size_t bins);

}  // namespace ssn
