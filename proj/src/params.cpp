#include "ssn/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "ssn/spike_codec.hpp"

namespace ssn {

Var ParamStore::add(const std::string& name, Tensor init) {
    if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
    Var v(std::move(init), true);
    index_[name] = entries_.size();
    entries_.emplace_back(name, v);
    return v;
}

const Var& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
    return entries_[it->second].second;
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : entries_) n += v.numel();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& [_, v] : entries_) v.zero_grad();
}

void ParamStore::assign(const std::map<std::string, Tensor>& values) {
    for (auto& [name, v] : entries_) {
        auto it = values.find(name);
        if (it == values.end()) throw std::invalid_argument("checkpoint lacks parameter " + name);
        if (it->second.shape() != v.shape())
            throw ShapeError("checkpoint parameter " + name + " has shape " + shape_str(it->second.shape()) +
                             ", network expects " + shape_str(v.shape()));
        v.mutable_value() = it->second;
    }
}

Tensor Initializer::uniform_fan_in(Shape shape, std::size_t fan_in, double gain) {
    const double bound = gain * std::sqrt(3.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(std::move(shape));
    for (auto& x : t.vec()) x = dist(rng_);
    return t;
}

Tensor Initializer::normal(Shape shape, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor t(std::move(shape));
    for (auto& x : t.vec()) x = dist(rng_);
    return t;
}

namespace {
constexpr char kMagic[4] = {'S', 'S', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(std::ostream& os, T v) {
    unsigned char b[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(static_cast<std::uint64_t>(v) >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(const std::vector<std::uint8_t>& buf, std::size_t off) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[off + i]) << (8 * i);
    return static_cast<T>(v);
}
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const nlohmann::json& meta) {
    nlohmann::json manifest;
    manifest["tensors"] = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& [name, v] : params.entries()) {
        manifest["tensors"].push_back({{"name", name}, {"shape", v.shape()}, {"offset", offset}});
        offset += v.numel() * 4;
    }
    manifest["meta"] = meta;
    const std::string text = manifest.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f.write(kMagic, 4);
    put_le<std::uint32_t>(f, kVersion);
    put_le<std::uint64_t>(f, text.size());
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [_, v] : params.entries())
        for (double x : v.value().vec()) {
            const float fx = static_cast<float>(x);
            std::uint32_t bits;
            std::memcpy(&bits, &fx, 4);
            put_le<std::uint32_t>(f, bits);
        }
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 4) != 0) throw FormatError("bad checkpoint magic", 0);
    if (get_le<std::uint32_t>(buf, 4) != kVersion) throw FormatError("unsupported checkpoint version", 4);
    const auto mlen = get_le<std::uint64_t>(buf, 8);
    if (16 + mlen > buf.size()) throw FormatError("truncated checkpoint manifest", buf.size());
    const auto manifest =
        nlohmann::json::parse(std::string(reinterpret_cast<const char*>(buf.data()) + 16, mlen));
    const std::size_t payload = 16 + mlen;

    Checkpoint ck;
    ck.meta = manifest.value("meta", nlohmann::json::object());
    for (const auto& entry : manifest.at("tensors")) {
        Shape shape = entry.at("shape").get<Shape>();
        const std::size_t off = payload + entry.at("offset").get<std::size_t>();
        Tensor t(shape);
        if (off + 4 * t.numel() > buf.size())
            throw FormatError("checkpoint tensor " + entry.at("name").get<std::string>() + " runs past end", off);
        for (std::size_t i = 0; i < t.numel(); ++i) {
            const auto bits = get_le<std::uint32_t>(buf, off + 4 * i);
            float fx;
            std::memcpy(&fx, &bits, 4);
            t[i] = fx;
        }
        ck.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
    }
    return ck;
}

}  // namespace ssn
