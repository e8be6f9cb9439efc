#pragma once

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nldiff/domain.hpp"
#include "nldiff/error.hpp"
#include "nldiff/evolution.hpp"
#include "nldiff/grid.hpp"
#include "nldiff/kernel.hpp"

namespace nldiff {

struct ExperimentConfig {
    struct Kernel {
        double radius = 1.0;
        int exponent = 3;
        bool operator==(const Kernel&) const = default;
    } kernel;

    struct GridSpec {
        double half_width = 64.0;
        int n = 1024;
        bool operator==(const GridSpec&) const = default;
    } grid;

    HoleShape hole{};
    InitialData initial{};

    struct Evolution {
        Scheme scheme = Scheme::exponential;
        double dt = 0.05;
        double t_end = 640.0;
        bool operator==(const Evolution&) const = default;
    } evolution;

    struct Observations {
        double t0 = 3.0;
        double ratio = 1.25;
        std::vector<double> extra{64.0, 160.0, 640.0};
        bool operator==(const Observations&) const = default;
    } observations;

    struct Stationary {
        double tol = 1e-8;
        std::vector<double> ladder;  // empty: half_width * {1/4, 1/2, 5/8, 3/4}
        double r0 = 0.2;
        int verify_iterations = 500;
        bool operator==(const Stationary&) const = default;
    } stationary;

    struct Tolerances {
        double drift_cap = 1e-3;
        double edge_mass_cap = 1e-6;
        double trend_t_lo = 64.0;
        double trend_t_hi = 640.0;
        double outer_delta = 0.5;
        double inner_a_fraction = 0.5;  // a = fraction * q
        double probe_ratio_lo = 0.35;
        double probe_ratio_hi = 0.65;
        bool operator==(const Tolerances&) const = default;
    } tolerances;

    struct Output {
        std::string dir = "out";
        std::string cache_dir;  // empty: <dir>/cache
        std::vector<double> checkpoints{160.0, 640.0};
        bool operator==(const Output&) const = default;
    } output;

    Grid2D make_grid() const { return Grid2D::make(grid.half_width, grid.n); }
    KernelSpec kernel_spec() const { return KernelSpec{kernel.radius, kernel.exponent, make_grid().h()}; }

    /// Geometric times t_end / ratio^k >= t0 merged with the extra times.
    std::vector<double> observation_times() const {
        std::vector<double> t;
        for (double v = evolution.t_end; v >= observations.t0; v /= observations.ratio) t.push_back(v);
        for (double v : observations.extra)
            if (v > 0.0 && v <= evolution.t_end) t.push_back(v);
        std::sort(t.begin(), t.end());
        t.erase(std::unique(t.begin(), t.end(), [](double a, double b) { return std::abs(a - b) <= 1e-9 * b; }),
                t.end());
        return t;
    }

    /// Checks every module constraint; throws InvalidArgument.
    void validate() const {
        const Grid2D g = make_grid();
        kernel_spec().validate();
        hole.validate();
        build_domain(g, hole);
        initial.validate();
        if (!(evolution.dt > 0.0)) throw InvalidArgument("evolution.dt must be positive");
        if (evolution.scheme == Scheme::forward_euler && evolution.dt > 1.0)
            throw InvalidArgument("forward-euler requires dt <= 1");
        if (!(evolution.t_end >= 0.0)) throw InvalidArgument("evolution.t_end must be nonnegative");
        if (!(observations.t0 > std::exp(1.0))) throw InvalidArgument("observations.t0 must exceed e");
        if (!(observations.ratio > 1.0)) throw InvalidArgument("observations.ratio must exceed 1");
        if (!(stationary.tol > 0.0)) throw InvalidArgument("stationary.tol must be positive");
        if (!(stationary.r0 > 0.0 && stationary.r0 < kernel.radius / 4.0))
            throw InvalidArgument("stationary.r0 must satisfy 0 < r0 < d/4");
        if (!(tolerances.inner_a_fraction > 0.0 && tolerances.inner_a_fraction < 1.0))
            throw InvalidArgument("tolerances.inner_a_fraction must lie in (0, 1)");
    }

    bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

inline void require_map(const YAML::Node& n, const std::string& where) {
    if (!n.IsMap()) throw ConfigError(where + " must be a mapping", line_of(n));
}

inline void reject_unknown(const YAML::Node& n, const std::string& where, const std::set<std::string>& allowed) {
    for (auto it = n.begin(); it != n.end(); ++it) {
        const std::string key = it->first.as<std::string>();
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where, line_of(it->first));
    }
}

template <class T>
void read(const YAML::Node& map, const char* key, T& out, const std::string& where) {
    const YAML::Node v = map[key];
    if (!v) return;
    try {
        out = v.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(where + "." + key + " has the wrong type", line_of(v));
    }
}

inline std::vector<double> read_pair(const YAML::Node& v, const std::string& what, std::size_t count) {
    std::vector<double> out;
    try {
        out = v.as<std::vector<double>>();
    } catch (const YAML::Exception&) {
        throw ConfigError(what + " must be a list of numbers", line_of(v));
    }
    if (out.size() != count) throw ConfigError(what + " must have " + std::to_string(count) + " entries", line_of(v));
    return out;
}

inline Disk read_disk(const YAML::Node& n, const std::string& where) {
    require_map(n, where);
    reject_unknown(n, where, {"center", "radius", "type"});
    Disk d{0.0, 0.0, 0.0};
    if (n["center"]) {
        const auto c = read_pair(n["center"], where + ".center", 2);
        d.cx = c[0];
        d.cy = c[1];
    }
    if (!n["radius"]) throw ConfigError(where + ".radius is required", line_of(n));
    read(n, "radius", d.radius, where);
    return d;
}

inline HoleShape read_hole(const YAML::Node& n) {
    require_map(n, "hole");
    std::string type = "disk";
    read(n, "type", type, "hole");
    if (type == "disk") return HoleShape(read_disk(n, "hole"));
    if (type == "disks") {
        reject_unknown(n, "hole", {"type", "disks"});
        if (!n["disks"] || !n["disks"].IsSequence()) throw ConfigError("hole.disks must be a list", line_of(n));
        std::vector<Disk> parts;
        for (const auto& d : n["disks"]) parts.push_back(read_disk(d, "hole.disks[]"));
        return HoleShape::disks(std::move(parts));
    }
    if (type == "rectangle") {
        reject_unknown(n, "hole", {"type", "corners"});
        if (!n["corners"]) throw ConfigError("hole.corners is required", line_of(n));
        const auto c = read_pair(n["corners"], "hole.corners", 4);
        return HoleShape::rectangle(c[0], c[1], c[2], c[3]);
    }
    throw ConfigError("hole.type must be disk, disks or rectangle", line_of(n["type"]));
}

inline Scheme parse_scheme(const std::string& s, int line) {
    if (s == "exponential") return Scheme::exponential;
    if (s == "forward-euler") return Scheme::forward_euler;
    throw ConfigError("evolution.scheme must be exponential or forward-euler", line);
}

inline InitialData::Kind parse_kind(const std::string& s, int line) {
    if (s == "gaussian") return InitialData::Kind::gaussian;
    if (s == "offcenter") return InitialData::Kind::offcenter;
    if (s == "annulus") return InitialData::Kind::annulus;
    throw ConfigError("initial.kind must be gaussian, offcenter or annulus", line);
}

inline const char* kind_name(InitialData::Kind k) {
    switch (k) {
        case InitialData::Kind::gaussian: return "gaussian";
        case InitialData::Kind::offcenter: return "offcenter";
        case InitialData::Kind::annulus: return "annulus";
    }
    return "?";
}

}  // namespace detail

/// Parses and validates YAML text. Absent keys keep their defaults; unknown
/// keys are errors. Constraint violations carry the line of the section.
inline ExperimentConfig parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(e.msg, e.mark.line + 1);
    }
    ExperimentConfig c;
    if (root.IsNull()) {
        c.validate();
        return c;
    }
    using detail::line_of;
    using detail::read;
    detail::require_map(root, "config");
    detail::reject_unknown(root, "config",
                           {"kernel", "grid", "hole", "initial", "evolution", "observations", "stationary",
                            "tolerances", "output"});

    auto section = [&](const char* name, const std::set<std::string>& keys) -> YAML::Node {
        YAML::Node n = root[name];
        if (!n) return n;
        detail::require_map(n, name);
        detail::reject_unknown(n, name, keys);
        return n;
    };

    if (auto n = section("kernel", {"radius", "exponent"})) {
        read(n, "radius", c.kernel.radius, "kernel");
        read(n, "exponent", c.kernel.exponent, "kernel");
    }
    if (auto n = section("grid", {"half_width", "n"})) {
        read(n, "half_width", c.grid.half_width, "grid");
        read(n, "n", c.grid.n, "grid");
    }
    if (root["hole"]) c.hole = detail::read_hole(root["hole"]);
    if (auto n = section("initial", {"kind", "center", "sigma", "ring_radius", "amplitude", "cutoff"})) {
        if (n["kind"]) {
            std::string k;
            read(n, "kind", k, "initial");
            c.initial.kind = detail::parse_kind(k, line_of(n["kind"]));
        }
        if (n["center"]) {
            const auto v = detail::read_pair(n["center"], "initial.center", 2);
            c.initial.cx = v[0];
            c.initial.cy = v[1];
        }
        read(n, "sigma", c.initial.sigma, "initial");
        read(n, "ring_radius", c.initial.ring_radius, "initial");
        read(n, "amplitude", c.initial.amplitude, "initial");
        read(n, "cutoff", c.initial.cutoff, "initial");
    }
    if (auto n = section("evolution", {"scheme", "dt", "t_end"})) {
        if (n["scheme"]) {
            std::string s;
            read(n, "scheme", s, "evolution");
            c.evolution.scheme = detail::parse_scheme(s, line_of(n["scheme"]));
        }
        read(n, "dt", c.evolution.dt, "evolution");
        read(n, "t_end", c.evolution.t_end, "evolution");
    }
    if (auto n = section("observations", {"t0", "ratio", "extra"})) {
        read(n, "t0", c.observations.t0, "observations");
        read(n, "ratio", c.observations.ratio, "observations");
        read(n, "extra", c.observations.extra, "observations");
    }
    if (auto n = section("stationary", {"tol", "ladder", "r0", "verify_iterations"})) {
        read(n, "tol", c.stationary.tol, "stationary");
        read(n, "ladder", c.stationary.ladder, "stationary");
        read(n, "r0", c.stationary.r0, "stationary");
        read(n, "verify_iterations", c.stationary.verify_iterations, "stationary");
    }
    if (auto n = section("tolerances", {"drift_cap", "edge_mass_cap", "trend_t_lo", "trend_t_hi", "outer_delta",
                                        "inner_a_fraction", "probe_ratio_lo", "probe_ratio_hi"})) {
        read(n, "drift_cap", c.tolerances.drift_cap, "tolerances");
        read(n, "edge_mass_cap", c.tolerances.edge_mass_cap, "tolerances");
        read(n, "trend_t_lo", c.tolerances.trend_t_lo, "tolerances");
        read(n, "trend_t_hi", c.tolerances.trend_t_hi, "tolerances");
        read(n, "outer_delta", c.tolerances.outer_delta, "tolerances");
        read(n, "inner_a_fraction", c.tolerances.inner_a_fraction, "tolerances");
        read(n, "probe_ratio_lo", c.tolerances.probe_ratio_lo, "tolerances");
        read(n, "probe_ratio_hi", c.tolerances.probe_ratio_hi, "tolerances");
    }
    if (auto n = section("output", {"dir", "cache_dir", "checkpoints"})) {
        read(n, "dir", c.output.dir, "output");
        read(n, "cache_dir", c.output.cache_dir, "output");
        read(n, "checkpoints", c.output.checkpoints, "output");
    }

    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        // Point at the section most likely responsible.
        const std::string msg = e.what();
        int line = 0;
        for (const char* s : {"hole", "kernel", "grid", "initial", "evolution", "observations", "stationary",
                              "tolerances"})
            if (msg.find(s) != std::string::npos && root[s]) {
                line = line_of(root[s]);
                break;
            }
        throw ConfigError(msg, line);
    }
    return c;
}

inline std::string serialize_config(const ExperimentConfig& c) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;
    out << YAML::Key << "kernel" << YAML::Value << YAML::BeginMap << YAML::Key << "radius" << YAML::Value
        << c.kernel.radius << YAML::Key << "exponent" << YAML::Value << c.kernel.exponent << YAML::EndMap;
    out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap << YAML::Key << "half_width" << YAML::Value
        << c.grid.half_width << YAML::Key << "n" << YAML::Value << c.grid.n << YAML::EndMap;

    out << YAML::Key << "hole" << YAML::Value << YAML::BeginMap;
    std::visit(
        [&out](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Disk>) {
                out << YAML::Key << "type" << YAML::Value << "disk" << YAML::Key << "center" << YAML::Value
                    << YAML::Flow << std::vector<double>{s.cx, s.cy} << YAML::Key << "radius" << YAML::Value
                    << s.radius;
            } else if constexpr (std::is_same_v<T, std::vector<Disk>>) {
                out << YAML::Key << "type" << YAML::Value << "disks" << YAML::Key << "disks" << YAML::Value
                    << YAML::BeginSeq;
                for (const Disk& d : s)
                    out << YAML::BeginMap << YAML::Key << "center" << YAML::Value << YAML::Flow
                        << std::vector<double>{d.cx, d.cy} << YAML::Key << "radius" << YAML::Value << d.radius
                        << YAML::EndMap;
                out << YAML::EndSeq;
            } else {
                out << YAML::Key << "type" << YAML::Value << "rectangle" << YAML::Key << "corners" << YAML::Value
                    << YAML::Flow << std::vector<double>{s.x0, s.y0, s.x1, s.y1};
            }
        },
        c.hole.shape());
    out << YAML::EndMap;

    out << YAML::Key << "initial" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << detail::kind_name(c.initial.kind);
    out << YAML::Key << "center" << YAML::Value << YAML::Flow << std::vector<double>{c.initial.cx, c.initial.cy};
    out << YAML::Key << "sigma" << YAML::Value << c.initial.sigma;
    out << YAML::Key << "ring_radius" << YAML::Value << c.initial.ring_radius;
    out << YAML::Key << "amplitude" << YAML::Value << c.initial.amplitude;
    out << YAML::Key << "cutoff" << YAML::Value << c.initial.cutoff;
    out << YAML::EndMap;

    out << YAML::Key << "evolution" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "scheme" << YAML::Value << scheme_name(c.evolution.scheme);
    out << YAML::Key << "dt" << YAML::Value << c.evolution.dt;
    out << YAML::Key << "t_end" << YAML::Value << c.evolution.t_end;
    out << YAML::EndMap;

    out << YAML::Key << "observations" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "t0" << YAML::Value << c.observations.t0;
    out << YAML::Key << "ratio" << YAML::Value << c.observations.ratio;
    out << YAML::Key << "extra" << YAML::Value << YAML::Flow << c.observations.extra;
    out << YAML::EndMap;

    out << YAML::Key << "stationary" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "tol" << YAML::Value << c.stationary.tol;
    out << YAML::Key << "ladder" << YAML::Value << YAML::Flow << c.stationary.ladder;
    out << YAML::Key << "r0" << YAML::Value << c.stationary.r0;
    out << YAML::Key << "verify_iterations" << YAML::Value << c.stationary.verify_iterations;
    out << YAML::EndMap;

    const auto& t = c.tolerances;
    out << YAML::Key << "tolerances" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "drift_cap" << YAML::Value << t.drift_cap;
    out << YAML::Key << "edge_mass_cap" << YAML::Value << t.edge_mass_cap;
    out << YAML::Key << "trend_t_lo" << YAML::Value << t.trend_t_lo;
    out << YAML::Key << "trend_t_hi" << YAML::Value << t.trend_t_hi;
    out << YAML::Key << "outer_delta" << YAML::Value << t.outer_delta;
    out << YAML::Key << "inner_a_fraction" << YAML::Value << t.inner_a_fraction;
    out << YAML::Key << "probe_ratio_lo" << YAML::Value << t.probe_ratio_lo;
    out << YAML::Key << "probe_ratio_hi" << YAML::Value << t.probe_ratio_hi;
    out << YAML::EndMap;

    out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "dir" << YAML::Value << c.output.dir;
    out << YAML::Key << "cache_dir" << YAML::Value << c.output.cache_dir;
    out << YAML::Key << "checkpoints" << YAML::Value << YAML::Flow << c.output.checkpoints;
    out << YAML::EndMap;

    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

}  // namespace nldiff
