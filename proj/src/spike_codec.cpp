#include "ssn/spike_codec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace ssn {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double to_unit(std::uint64_t x) { return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53; }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
    return v;
}

}  // namespace

void FrameSequence::validate() const {
    if (data.size() != t * h * w) throw std::invalid_argument("frame sequence size does not match T*H*W");
    for (std::size_t i = 0; i < data.size(); ++i)
        if (!(data[i] >= 0.0 && data[i] <= 1.0))
            throw std::invalid_argument("frame intensity outside [0,1] at flat index " + std::to_string(i));
}

std::size_t SpikeStream::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

double dark_noise(std::uint64_t seed, std::size_t step, std::size_t pixel, double stddev) {
    if (stddev <= 0.0) return 0.0;
    const std::uint64_t key = splitmix64(seed ^ splitmix64(step * 0x100000001B3ULL + pixel));
    const double u1 = to_unit(key);
    const double u2 = to_unit(splitmix64(key));
    return stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SpikeEncoder::SpikeEncoder(std::size_t h, std::size_t w, EncoderConfig cfg) : cfg_(cfg), state_(h, w) {
    if (!(cfg_.threshold > 0.0)) throw std::invalid_argument("encoder threshold must be positive");
    if (cfg_.noise_std < 0.0) throw std::invalid_argument("encoder noise_std must be non-negative");
}

void SpikeEncoder::step(std::span<const double> frame, std::span<std::uint8_t> spikes_out) {
    const std::size_t npix = state_.h * state_.w;
    if (frame.size() != npix || spikes_out.size() != npix)
        throw ShapeError("encoder frame size mismatch");
    const std::size_t t = step_++;
    const double theta = cfg_.threshold;
#pragma omp parallel for schedule(static)
    for (std::size_t p = 0; p < npix; ++p) {
        const double input = std::max(0.0, frame[p] + dark_noise(cfg_.seed, t, p, cfg_.noise_std));
        double& v = state_.potential[p];
        v += input;
        if (v >= theta) {
            v -= theta;
            spikes_out[p] = 1;
            state_.last_fire[p] = static_cast<long>(t + 1);
        } else {
            spikes_out[p] = 0;
        }
    }
}

SpikeStream encode(const FrameSequence& frames, const EncoderConfig& cfg) {
    SpikeStream out(frames.t, frames.h, frames.w);
    SpikeEncoder enc(frames.h, frames.w, cfg);
    const std::size_t npix = frames.h * frames.w;
    for (std::size_t n = 0; n < frames.t; ++n)
        enc.step(frames.frame(n), std::span<std::uint8_t>(out.bits.data() + n * npix, npix));
    return out;
}

std::vector<std::uint8_t> pack_dat(const SpikeStream& s) {
    std::vector<std::uint8_t> out;
    const std::size_t total = s.n * s.h * s.w;
    out.reserve(kDatHeaderBytes + (total + 7) / 8);
    out.insert(out.end(), kDatMagic.begin(), kDatMagic.end());
    put_u32(out, kDatVersion);
    put_u32(out, static_cast<std::uint32_t>(s.n));
    put_u32(out, static_cast<std::uint32_t>(s.h));
    put_u32(out, static_cast<std::uint32_t>(s.w));
    const std::size_t base = out.size();
    out.resize(base + (total + 7) / 8, 0);
    for (std::size_t i = 0; i < total; ++i)
        if (s.bits[i]) out[base + i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    return out;
}

SpikeStream unpack_dat(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kDatHeaderBytes)
        throw FormatError("truncated .dat header: expected " + std::to_string(kDatHeaderBytes) + " bytes, got " +
                              std::to_string(bytes.size()),
                          bytes.size());
    if (!std::equal(kDatMagic.begin(), kDatMagic.end(), bytes.begin())) throw FormatError("bad .dat magic", 0);
    const std::uint32_t version = get_u32(bytes, 4);
    if (version != kDatVersion)
        throw FormatError("unsupported .dat version " + std::to_string(version), 4);
    SpikeStream s(get_u32(bytes, 8), get_u32(bytes, 12), get_u32(bytes, 16));
    const std::size_t total = s.n * s.h * s.w;
    const std::size_t expected = (total + 7) / 8;
    const std::size_t actual = bytes.size() - kDatHeaderBytes;
    if (actual != expected)
        throw FormatError(".dat payload length mismatch: expected " + std::to_string(expected) + " bytes, got " +
                              std::to_string(actual),
                          kDatHeaderBytes + std::min(actual, expected));
    const std::uint8_t* payload = bytes.data() + kDatHeaderBytes;
    for (std::size_t i = 0; i < total; ++i) s.bits[i] = (payload[i / 8] >> (i % 8)) & 1u;
    return s;
}

void write_dat(const std::filesystem::path& path, const SpikeStream& stream) {
    const auto bytes = pack_dat(stream);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

SpikeStream read_dat(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return unpack_dat(bytes);
}

Tensor tfi_reconstruct(const SpikeStream& s, std::size_t center_step, std::size_t max_window,
                       double threshold_units) {
    if (center_step < 1 || center_step > s.n)
        throw std::out_of_range("tfi center_step " + std::to_string(center_step) + " outside [1," +
                                std::to_string(s.n) + "]");
    Tensor out({s.h, s.w});
    const long c = static_cast<long>(center_step);
    const long lo = std::max(1L, c - static_cast<long>(max_window));
    const long hi = std::min(static_cast<long>(s.n), c + static_cast<long>(max_window));
    const std::size_t npix = s.h * s.w;
#pragma omp parallel for schedule(static)
    for (std::size_t p = 0; p < npix; ++p) {
        long prev = 0, next = 0;
        for (long t = c; t >= lo; --t)
            if (s.bits[static_cast<std::size_t>(t - 1) * npix + p]) {
                prev = t;
                break;
            }
        for (long t = c + 1; t <= hi; ++t)
            if (s.bits[static_cast<std::size_t>(t - 1) * npix + p]) {
                next = t;
                break;
            }
        out[p] = (prev && next) ? threshold_units / static_cast<double>(next - prev) : 0.0;
    }
    return out;
}

SubstreamSplit split_substreams(const SpikeStream& s) {
    if (s.n < 3) throw std::invalid_argument("split_substreams needs at least 3 steps, got " + std::to_string(s.n));
    const std::size_t len = (s.n + 2) / 3;
    const std::size_t npix = s.h * s.w;
    SubstreamSplit out;
    out.padded_steps = 3 * len - s.n;
    for (std::size_t k = 0; k < 3; ++k) {
        SpikeStream part(len, s.h, s.w);
        const std::size_t begin = k * len;
        const std::size_t end = std::min(s.n, begin + len);
        out.real_steps[k] = end > begin ? end - begin : 0;
        std::copy(s.bits.begin() + static_cast<long>(begin * npix), s.bits.begin() + static_cast<long>(end * npix),
                  part.bits.begin());
        out.parts[k] = std::move(part);
    }
    return out;
}

Tensor bin_stream(const SpikeStream& s, std::size_t bins) {
    if (bins == 0 || bins > s.n)
        throw std::invalid_argument("bin count " + std::to_string(bins) + " invalid for " + std::to_string(s.n) +
                                    " steps");
    Tensor out({bins, s.h, s.w});
    const std::size_t npix = s.h * s.w;
    for (std::size_t t = 0; t < s.n; ++t) {
        const std::size_t b = t * bins / s.n;
        for (std::size_t p = 0; p < npix; ++p) out[b * npix + p] += s.bits[t * npix + p];
    }
    return out;
}

}  // namespace ssn
