#include "ssn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ssn/io_formats.hpp"

namespace ssn {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const char* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

struct Entry {
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

// Accessors are built from a projection returning a reference to the field.
template <class T, class Proj>
Entry make_entry(const std::string& key, Proj proj) {
    Entry e;
    e.get = [proj](const RunConfig& c) {
        const T& v = proj(const_cast<RunConfig&>(c));
        if constexpr (std::is_same_v<T, bool>) return std::string(v ? "true" : "false");
        else if constexpr (std::is_same_v<T, std::string>) return v;
        else if constexpr (std::is_floating_point_v<T>) return format_double(v);
        else return std::to_string(v);
    };
    e.set = [proj, key](RunConfig& c, const std::string& v) {
        T& dst = proj(c);
        if constexpr (std::is_same_v<T, bool>) dst = parse_bool(key, v);
        else if constexpr (std::is_same_v<T, std::string>) dst = v;
        else dst = parse_number<T>(key, v);
    };
    return e;
}

using Registry = std::vector<std::pair<std::string, Entry>>;

const Registry& registry() {
    static const Registry r = [] {
        Registry r;
        auto add = [&r]<class T>(const std::string& key, T& (*proj)(RunConfig&)) {
            r.emplace_back(key, make_entry<T>(key, proj));
        };
#define SSN_KEY(name, expr) add(name, +[](RunConfig& c) -> auto& { return expr; })
        SSN_KEY("seed", c.seed);
        SSN_KEY("height", c.height);
        SSN_KEY("width", c.width);
        SSN_KEY("scenes", c.scenes);
        SSN_KEY("keyframes", c.keyframes);
        SSN_KEY("interp", c.interp);
        SSN_KEY("min_disp", c.min_disp);
        SSN_KEY("max_disp", c.max_disp);
        SSN_KEY("max_objects", c.max_objects);
        SSN_KEY("max_velocity", c.max_velocity);
        SSN_KEY("baseline_m", c.rig.baseline_m);
        SSN_KEY("focal_px", c.rig.focal_px);
        SSN_KEY("principal_offset_px", c.rig.principal_offset_px);
        SSN_KEY("threshold", c.encoder.threshold);
        SSN_KEY("noise_std", c.encoder.noise_std);
        SSN_KEY("input_bins", c.net.input_bins);
        SSN_KEY("stem_channels", c.net.stem_channels);
        SSN_KEY("feat_c4", c.net.feat_c4);
        SSN_KEY("feat_c8", c.net.feat_c8);
        SSN_KEY("feat_c16", c.net.feat_c16);
        SSN_KEY("res_blocks", c.net.res_blocks);
        SSN_KEY("hidden", c.net.hidden);
        SSN_KEY("motion_channels", c.net.motion_channels);
        SSN_KEY("head_channels", c.net.head_channels);
        SSN_KEY("corr_levels", c.net.corr_levels);
        SSN_KEY("corr_radius", c.net.corr_radius);
        SSN_KEY("gate_groups", c.net.gate_groups);
        SSN_KEY("use_group_norm", c.net.use_group_norm);
        SSN_KEY("v_peak", c.net.v_peak);
        SSN_KEY("surrogate_slope", c.net.surrogate.slope);
        SSN_KEY("surrogate_gain", c.net.surrogate.gain);
        SSN_KEY("eta", c.train.loss.eta);
        SSN_KEY("lambda_f", c.train.loss.lambda_f);
        SSN_KEY("lambda_v", c.train.loss.lambda_v);
        SSN_KEY("r0", c.train.loss.r0);
        SSN_KEY("steps", c.train.steps);
        SSN_KEY("batch_size", c.train.batch_size);
        SSN_KEY("iterations", c.train.iterations);
        SSN_KEY("infer_iterations", c.infer_iterations);
        SSN_KEY("lr", c.train.lr_max);
        SSN_KEY("warmup_frac", c.train.warmup_frac);
        SSN_KEY("clip", c.train.clip);
        SSN_KEY("weight_decay", c.train.adam.weight_decay);
        SSN_KEY("hflip", c.train.hflip);
        SSN_KEY("vflip", c.train.vflip);
        SSN_KEY("data_dir", c.data_dir);
        SSN_KEY("out_dir", c.out_dir);
#undef SSN_KEY
        return r;
    }();
    return r;
}

const Entry* find_entry(const std::string& key) {
    for (const auto& [k, e] : registry())
        if (k == key) return &e;
    return nullptr;
}

}  // namespace

void RunConfig::apply_preset(const std::string& name) {
    if (name == "desk") {
        net = NetConfig::desk();
        train.steps = 500;
        train.batch_size = 1;
        train.lr_max = 1e-3;
        height = width = 64;
    } else if (name == "full") {
        net = NetConfig::full();
        train.steps = 300000;
        train.batch_size = 8;
        train.lr_max = 2e-4;
        train.hflip = train.vflip = true;
        height = 250;
        width = 400;
    } else {
        throw ConfigError("unknown preset '" + name + "' (expected desk or full)");
    }
    preset = name;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "preset") {
        apply_preset(value);
        return;
    }
    const Entry* e = find_entry(key);
    if (!e) throw ConfigError("unknown config key '" + key + "'");
    e->set(*this, value);
}

std::string RunConfig::get(const std::string& key) const {
    if (key == "preset") return preset;
    const Entry* e = find_entry(key);
    if (!e) throw ConfigError("unknown config key '" + key + "'");
    return e->get(*this);
}

std::vector<std::string> RunConfig::keys() {
    std::vector<std::string> k{"preset"};
    for (const auto& [name, _] : registry()) k.push_back(name);
    return k;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::pair<std::string, std::string>> items;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = origin + ":" + std::to_string(lineno);
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key != "preset" && !find_entry(key)) throw ConfigError(where + ": unknown config key '" + key + "'");
        if (seen.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
        seen[key] = lineno;
        items.emplace_back(key, value);
    }
    RunConfig cfg;
    // The preset goes first so explicit keys override it.
    for (const auto& [k, v] : items)
        if (k == "preset") cfg.apply_preset(v);
    for (const auto& [k, v] : items) {
        if (k == "preset") continue;
        try {
            cfg.set(k, v);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(seen[k]) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::string RunConfig::to_text() const {
    std::ostringstream o;
    o << "preset = " << preset << '\n';
    for (const auto& [k, e] : registry()) o << k << " = " << e.get(*this) << '\n';
    return o.str();
}

void RunConfig::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_text();
}

void RunConfig::validate() const {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError("invalid config: " + msg);
    };
    need(height >= 32 && width >= 32, "height and width must be >= 32");
    need(scenes >= 1, "scenes must be >= 1");
    need(keyframes >= 1 && interp >= 1, "keyframes and interp must be >= 1");
    need((keyframes - 1) * interp >= 3, "sequence must yield at least 3 encoded frames");
    need(max_disp > min_disp && min_disp >= 0.0, "need 0 <= min_disp < max_disp");
    need(rig.baseline_m > 0 && rig.focal_px > 0, "rig baseline and focal length must be positive");
    need(encoder.threshold > 0.0, "threshold must be positive");
    need(encoder.noise_std >= 0.0, "noise_std must be non-negative");
    need(net.hidden % net.gate_groups == 0, "hidden must be divisible by gate_groups");
    need(net.motion_channels >= 4, "motion_channels must be >= 4");
    need(net.input_bins >= 1, "input_bins must be >= 1");
    need(net.corr_levels >= 1 && net.corr_radius >= 1, "corr_levels and corr_radius must be >= 1");
    need(train.iterations >= 1 && infer_iterations >= 1, "iteration counts must be >= 1");
    need(train.steps >= 1 && train.batch_size >= 1, "steps and batch_size must be >= 1");
    need(train.lr_max > 0.0, "lr must be positive");
    need(train.warmup_frac >= 0.0 && train.warmup_frac < 1.0, "warmup_frac must lie in [0,1)");
    need(train.clip > 0.0, "clip must be positive");
    try {
        train.loss.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
}

}  // namespace ssn
