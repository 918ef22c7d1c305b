// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/io/config.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

namespace splatcp::io {

namespace {

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
T parse_uint(const std::string &v, T lo, T hi) {
    std::uint64_t x = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected a non-negative integer, got '" + v + "'");
    if (x < static_cast<std::uint64_t>(lo) || x > static_cast<std::uint64_t>(hi)) {
        throw ConfigError("value " + v + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return static_cast<T>(x);
}

double parse_real(const std::string &v, double lo, double hi) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception &) {
        throw ConfigError("expected a number, got '" + v + "'");
    }
    if (used != v.size() || !std::isfinite(x)) throw ConfigError("expected a finite number, got '" + v + "'");
    if (x < lo || x > hi) throw ConfigError("value " + v + " outside [" + fmt_double(lo) + ", " + fmt_double(hi) + "]");
    return x;
}

using Setter = std::function<void(RunConfig &, const std::string &)>;
using Getter = std::function<std::string(const RunConfig &)>;

struct Key {
    std::string section;
    std::string name;
    Setter set;
    Getter get;
};

constexpr double kPi = 3.14159265358979323846;

const std::vector<Key> &keys() {
    static const std::vector<Key> table = [] {
        std::vector<Key> k;
        auto add_size = [&k](std::string sec, std::string name, std::function<std::size_t &(RunConfig &)> ref,
                             std::size_t lo, std::size_t hi) {
            k.push_back({sec, name,
                         [ref, lo, hi](RunConfig &c, const std::string &v) { ref(c) = parse_uint<std::size_t>(v, lo, hi); },
                         [ref](const RunConfig &c) { return std::to_string(ref(const_cast<RunConfig &>(c))); }});
        };
        auto add_real = [&k](std::string sec, std::string name, std::function<double &(RunConfig &)> ref, double lo,
                             double hi) {
            k.push_back({sec, name, [ref, lo, hi](RunConfig &c, const std::string &v) { ref(c) = parse_real(v, lo, hi); },
                         [ref](const RunConfig &c) { return fmt_double(ref(const_cast<RunConfig &>(c))); }});
        };

        k.push_back({"run", "seed",
                     [](RunConfig &c, const std::string &v) {
                         c.seed = parse_uint<std::uint64_t>(v, 0, std::numeric_limits<std::uint64_t>::max());
                     },
                     [](const RunConfig &c) { return std::to_string(c.seed); }});
        k.push_back({"run", "mode",
                     [](RunConfig &c, const std::string &v) {
                         if (v == "full") {
                             c.train.mode = MaskMode::Full;
                             c.train.mode_identity = 0;
                         } else if (v.rfind("per_identity:", 0) == 0) {
                             c.train.mode = MaskMode::PerIdentity;
                             c.train.mode_identity = parse_uint<std::size_t>(v.substr(13), 0, 1u << 20);
                         } else {
                             throw ConfigError("mode must be 'full' or 'per_identity:<i>', got '" + v + "'");
                         }
                     },
                     [](const RunConfig &c) { return mode_to_string(c.train.mode, c.train.mode_identity); }});
        add_size("run", "log_every", [](RunConfig &c) -> std::size_t & { return c.log_every; }, 1, 100'000'000);

        add_size("data", "identities", [](RunConfig &c) -> std::size_t & { return c.data.identities; }, 1, 1024);
        add_size("data", "gaussians", [](RunConfig &c) -> std::size_t & { return c.data.gaussians; }, 1, 1'000'000);
        add_size("data", "bones", [](RunConfig &c) -> std::size_t & { return c.data.bones; }, 1, 9);
        k.push_back({"data", "image_size",
                     [](RunConfig &c, const std::string &v) { c.data.image_size = parse_uint<int>(v, 4, 4096); },
                     [](const RunConfig &c) { return std::to_string(c.data.image_size); }});
        add_size("data", "train_poses", [](RunConfig &c) -> std::size_t & { return c.data.train_poses; }, 1, 100'000);
        add_size("data", "heldout_poses", [](RunConfig &c) -> std::size_t & { return c.data.heldout_poses; }, 0, 100'000);
        add_real("data", "train_angle_max", [](RunConfig &c) -> double & { return c.data.train_angle_max; }, 0.0, kPi);
        add_real("data", "heldout_angle_min", [](RunConfig &c) -> double & { return c.data.heldout_angle_min; }, 0.0, kPi);
        add_real("data", "heldout_angle_max", [](RunConfig &c) -> double & { return c.data.heldout_angle_max; }, 0.0, kPi);

        add_size("model", "rank", [](RunConfig &c) -> std::size_t & { return c.rank; }, 1, 4096);
        add_real("model", "init_jitter", [](RunConfig &c) -> double & { return c.init_jitter; }, 0.0, 1.0);
        add_real("model", "init_scale", [](RunConfig &c) -> double & { return c.init_scale; }, 1e-6, 10.0);

        add_size("train", "iterations", [](RunConfig &c) -> std::size_t & { return c.train.iterations; }, 0, 100'000'000);
        add_size("train", "warmup", [](RunConfig &c) -> std::size_t & { return c.train.warmup; }, 0, 100'000'000);
        add_real("train", "lr_position_init", [](RunConfig &c) -> double & { return c.train.rates.position.initial; }, 0.0, 10.0);
        add_real("train", "lr_position_final", [](RunConfig &c) -> double & { return c.train.rates.position.final; }, 0.0, 10.0);
        add_real("train", "lr_factor_init", [](RunConfig &c) -> double & { return c.train.rates.factors.initial; }, 0.0, 10.0);
        add_real("train", "lr_factor_final", [](RunConfig &c) -> double & { return c.train.rates.factors.final; }, 0.0, 10.0);
        add_real("train", "lr_scale", [](RunConfig &c) -> double & { return c.train.rates.scale; }, 0.0, 10.0);
        add_real("train", "lr_rotation", [](RunConfig &c) -> double & { return c.train.rates.rotation; }, 0.0, 10.0);
        add_real("train", "lr_appearance", [](RunConfig &c) -> double & { return c.train.rates.appearance; }, 0.0, 10.0);
        add_real("train", "lr_opacity", [](RunConfig &c) -> double & { return c.train.rates.opacity; }, 0.0, 10.0);

        add_real("loss", "l1", [](RunConfig &c) -> double & { return c.train.weights.l1; }, 0.0, 1e6);
        add_real("loss", "mask", [](RunConfig &c) -> double & { return c.train.weights.mask; }, 0.0, 1e6);
        add_real("loss", "isopos", [](RunConfig &c) -> double & { return c.train.weights.isopos; }, 0.0, 1e6);
        add_real("loss", "isocov", [](RunConfig &c) -> double & { return c.train.weights.isocov; }, 0.0, 1e6);
        return k;
    }();
    return table;
}

} // namespace

std::string mode_to_string(MaskMode mode, std::size_t identity) {
    if (mode == MaskMode::PerIdentity) return "per_identity:" + std::to_string(identity);
    return "full";
}

RunConfig parse_config(const std::string &text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + "malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "run" && section != "data" && section != "model" && section != "train" && section != "loss") {
                throw ConfigError(where + "unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        const std::string name = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) throw ConfigError(where + "key '" + name + "' appears before any section");
        const Key *key = nullptr;
        for (const Key &k : keys())
            if (k.section == section && k.name == name) key = &k;
        if (!key) throw ConfigError(where + "unknown key '" + name + "' in [" + section + "]");
        const std::string full = section + "." + name;
        if (seen.count(full)) throw ConfigError(where + "duplicate key '" + full + "'");
        seen[full] = lineno;
        try {
            key->set(cfg, value);
        } catch (const ConfigError &e) {
            throw ConfigError(where + full + ": " + e.what());
        }
    }
    try {
        cfg.data.validate();
        cfg.train.rates.validate();
        cfg.train.weights.validate();
    } catch (const std::invalid_argument &e) {
        throw ConfigError(e.what());
    }
    if (cfg.train.mode == MaskMode::PerIdentity && cfg.train.mode_identity >= cfg.data.identities) {
        throw ConfigError("mode per_identity: identity index out of range");
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string to_text(const RunConfig &cfg) {
    std::string out;
    std::string section;
    for (const Key &k : keys()) {
        if (k.section != section) {
            if (!section.empty()) out += "\n";
            section = k.section;
            out += "[" + section + "]\n";
        }
        out += k.name + " = " + k.get(cfg) + "\n";
    }
    return out;
}

} // namespace splatcp::io
