#pragma once

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nldiff/barriers.hpp"
#include "nldiff/config.hpp"
#include "nldiff/diagnostics.hpp"
#include "nldiff/domain.hpp"
#include "nldiff/evolution.hpp"
#include "nldiff/kernel.hpp"
#include "nldiff/snapshot.hpp"
#include "nldiff/stationary.hpp"

namespace nldiff {

struct Assertion {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct RunRequest {
    std::optional<double> until;  // stop early (outputs flagged incomplete)
    std::string resume;           // snapshot to continue from
    std::ostream* echo = nullptr; // log lines are also written here
};

struct ExperimentResult {
    ExperimentConfig config;
    std::string out_dir;
    bool complete = false;
    bool cache_hit = false;
    StationaryProfile stationary;
    double M_star = 0.0;
    Field2D u0;
    Field2D u_final;
    double t_final = 0.0;
    DiagnosticSeries series;
    std::vector<std::pair<int, int>> probe_cells;
    std::vector<double> probe_targets;
    bool invariants_ok = true;
    std::string invariant_detail;
    std::vector<Assertion> assertions;
};

namespace detail {

class RunLog {
public:
    RunLog(const std::string& path, std::ostream* echo, bool append)
        : os_(path, append ? std::ios::app : std::ios::trunc), echo_(echo), start_(std::chrono::steady_clock::now()) {}

    void operator()(const std::string& line) {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::ostringstream os;
        os << "[" << std::fixed << std::setprecision(1) << std::setw(8) << s << "s] " << line;
        os_ << os.str() << '\n';
        os_.flush();
        if (echo_) *echo_ << os.str() << std::endl;
    }

private:
    std::ofstream os_;
    std::ostream* echo_;
    std::chrono::steady_clock::time_point start_;
};

inline nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
inline double num_of(const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline nlohmann::json stationary_json(const StationaryProfile& p) {
    nlohmann::json j;
    j["radius"] = p.radius;
    j["residual"] = num(p.residual);
    j["growth_defect"] = num(p.growth_defect);
    j["tol"] = p.tol;
    j["bounding_radius"] = p.bounding_radius;
    j["kernel_radius"] = p.kernel_radius;
    j["log_deviation"] = num(p.log_deviation);
    j["verify_iterations"] = p.verify_iterations;
    j["monotone_violation"] = num(p.monotone_violation);
    j["overshoot"] = num(p.overshoot);
    j["sub"] = p.sub.describe();
    j["super"] = p.super.describe();
    j["super_gamma"] = p.super.gamma;
    nlohmann::json ladder = nlohmann::json::array();
    for (const auto& r : p.ladder)
        ladder.push_back({{"radius", r.radius},
                          {"iterations", r.iterations},
                          {"residual", num(r.residual)},
                          {"growth_defect", num(r.growth_defect)},
                          {"sandwich_violation", num(r.sandwich_violation)},
                          {"ladder_violation", num(r.ladder_violation)}});
    j["ladder"] = ladder;
    return j;
}

inline void stationary_from_json(const nlohmann::json& j, StationaryProfile& p) {
    p.radius = j.at("radius").get<double>();
    p.residual = num_of(j.at("residual"));
    p.growth_defect = num_of(j.at("growth_defect"));
    p.tol = j.at("tol").get<double>();
    p.bounding_radius = j.at("bounding_radius").get<double>();
    p.kernel_radius = j.at("kernel_radius").get<double>();
    p.log_deviation = num_of(j.at("log_deviation"));
    p.verify_iterations = j.at("verify_iterations").get<int>();
    p.monotone_violation = num_of(j.at("monotone_violation"));
    p.overshoot = num_of(j.at("overshoot"));
    p.ladder.clear();
    for (const auto& r : j.at("ladder")) {
        LadderRung rung;
        rung.radius = r.at("radius").get<double>();
        rung.iterations = r.at("iterations").get<int>();
        rung.residual = num_of(r.at("residual"));
        rung.growth_defect = num_of(r.at("growth_defect"));
        rung.sandwich_violation = num_of(r.at("sandwich_violation"));
        rung.ladder_violation = num_of(r.at("ladder_violation"));
        p.ladder.push_back(rung);
    }
}

/// crc32 of everything the stationary profile depends on.
inline std::string stationary_key(const ExperimentConfig& c) {
    ExperimentConfig k;
    k.kernel = c.kernel;
    k.grid = c.grid;
    k.hole = c.hole;
    k.stationary = c.stationary;
    const std::string text = serialize_config(k);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x",
                  crc_of(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
    return buf;
}

inline std::string time_tag(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", t);
    return buf;
}

inline void write_checkpoint(const std::string& dir, const SimulationState& s, const std::string& config_key) {
    const std::string stem = dir + "/checkpoint_t" + time_tag(s.t);
    snapshot_save(s.u, stem + ".snap", {s.t, s.scheme});
    nlohmann::json j;
    j["time"] = s.t;
    j["steps"] = s.steps;
    j["dt"] = s.dt;
    j["scheme"] = scheme_name(s.scheme);
    j["n"] = s.u.n();
    j["half_width"] = s.u.grid().half_width;
    j["config_key"] = config_key;
    std::ofstream(stem + ".json") << j.dump(2) << '\n';
}

}  // namespace detail

/// The nearest cells to (4, 0) and (0, 8), the fixed pointwise probes.
inline std::vector<std::pair<int, int>> default_probe_cells(const Grid2D& g) {
    auto idx = [&g](double v) { return static_cast<int>(std::floor((v + g.half_width) / g.h())); };
    return {{idx(4.0), idx(0.0)}, {idx(0.0), idx(8.0)}};
}

/// Run-level assertions over a finished series.
inline std::vector<Assertion> evaluate_run_assertions(const ExperimentResult& r) {
    const auto& tol = r.config.tolerances;
    const DiagnosticSeries& s = r.series;
    std::vector<Assertion> out;
    auto fmt = [](double v) {
        char b[32];
        std::snprintf(b, sizeof b, "%.6g", v);
        return std::string(b);
    };

    out.push_back({"invariants: u >= 0, u = 0 on the hole, sup u <= sup u0", r.invariants_ok, r.invariant_detail});

    {
        bool ok = true;
        double worst = 0.0;
        for (std::size_t i = 1; i < s.records.size(); ++i) {
            const double inc = s.records[i].M - s.records[i - 1].M;
            worst = std::max(worst, inc);
            if (inc > 0.0) ok = false;
        }
        out.push_back({"mass nonincreasing", ok, "largest increase " + fmt(worst)});
    }

    {
        double drift = 0.0;
        for (const auto& rec : s.records) drift = std::max(drift, std::abs(rec.M_phi - r.M_star) / r.M_star);
        out.push_back({"criterion 7: M_phi relative drift <= " + fmt(tol.drift_cap), drift <= tol.drift_cap,
                       "max drift " + fmt(drift)});
    }

    const DiagnosticSeries w = s.window(tol.trend_t_lo, tol.trend_t_hi);
    const bool window_full = !w.records.empty() && w.records.front().t <= tol.trend_t_lo * (1 + 1e-12) &&
                             w.records.back().t >= tol.trend_t_hi * (1 - 1e-12);
    {
        const RescaledMassReport m = rescaled_mass_limit(s, r.M_star, tol.trend_t_lo, tol.trend_t_hi);
        const MomentaReport mo = momenta_growth_report(s, tol.trend_t_lo, tol.trend_t_hi);
        const bool ok = window_full && m.log_t_mass_bounded && m.gap_decreasing && mo.sup_bounded && mo.m2_bounded &&
                        mo.m1_bounded;
        std::ostringstream d;
        d << "logt*M bounded=" << m.log_t_mass_bounded << " gap decreasing=" << m.gap_decreasing
          << " t*logt*sup bounded=" << mo.sup_bounded << " M2 bounded=" << mo.m2_bounded
          << " M1 bounded=" << mo.m1_bounded;
        out.push_back({"criterion 8: decay shapes over the trend window", ok, d.str()});
    }

    {
        bool bound = true;
        double worst = -INFINITY;
        for (const auto& rec : s.records) {
            const double lhs = std::abs(rec.M_log - r.M_star), rhs = r.stationary.log_deviation * rec.M;
            worst = std::max(worst, lhs - rhs);
            if (lhs > rhs) bound = false;
        }
        std::vector<double> gap;
        for (const auto& rec : w.records) gap.push_back(std::abs(rec.M_log - r.M_star));
        const bool dec = window_full && strictly_decreasing(gap);
        out.push_back({"criterion 9: |M_log - M*| <= sup|phi - log|x|| M and decreasing", bound && dec,
                       "max(lhs - rhs) " + fmt(worst) + ", decreasing=" + std::to_string(dec)});
    }

    auto at = [&s](double t) -> const DiagnosticRecord* {
        for (const auto& rec : s.records)
            if (std::abs(rec.t - t) <= 1e-9 * t) return &rec;
        return nullptr;
    };
    {
        const auto* a = at(160.0);
        const auto* b = at(tol.trend_t_hi);
        const bool ok = a && b && b->outer_err_d50 < a->outer_err_d50;
        out.push_back({"criterion 10: outer_error(delta) at t_hi < at t = 160", ok,
                       a && b ? fmt(b->outer_err_d50) + " vs " + fmt(a->outer_err_d50) : "times not reached"});
    }

    {
        std::vector<double> inner;
        std::vector<std::vector<double>> dist(r.probe_targets.size());
        const std::size_t n = s.records.size();
        bool ok = window_full && n >= 3;
        if (ok) {
            for (std::size_t i = n - 3; i < n; ++i) {
                inner.push_back(s.records[i].inner_err);
                for (std::size_t p = 0; p < r.probe_targets.size(); ++p)
                    dist[p].push_back(std::abs(s.records[i].pointwise.at(p) - r.probe_targets[p]));
            }
            ok = strictly_decreasing(inner);
            for (const auto& d : dist) ok = ok && strictly_decreasing(d);
        }
        std::ostringstream d;
        d << "inner_err last three:";
        for (double v : inner) d << " " << fmt(v);
        for (std::size_t p = 0; p < dist.size(); ++p) {
            d << "; probe " << p << " distance:";
            for (double v : dist[p]) d << " " << fmt(v);
        }
        out.push_back({"criterion 11: inner error and pointwise probes trend", ok, d.str()});
    }

    {
        const auto* b = at(tol.trend_t_hi);
        double ratio = std::numeric_limits<double>::quiet_NaN();
        if (b) ratio = b->probe_alpha50 / b->probe_alpha0;
        const bool ok = std::isfinite(ratio) && ratio >= tol.probe_ratio_lo && ratio <= tol.probe_ratio_hi;
        out.push_back({"criterion 12: probe(alpha=1/2)/probe(alpha=0) in [" + fmt(tol.probe_ratio_lo) + ", " +
                           fmt(tol.probe_ratio_hi) + "]",
                       ok, "ratio " + fmt(ratio)});
    }
    return out;
}

/// Stationary profile from the cache, or solved and cached.
inline StationaryProfile load_or_solve_stationary(const ExperimentConfig& cfg, const std::string& cache_dir,
                                                  const std::function<void(const std::string&)>& log,
                                                  bool* hit = nullptr) {
    namespace fs = std::filesystem;
    fs::create_directories(cache_dir);
    const std::string key = detail::stationary_key(cfg);
    const std::string stem = cache_dir + "/phi_" + key;
    StationaryProfile prof;
    if (fs::exists(stem + ".snap") && fs::exists(stem + ".json")) {
        try {
            prof.phi = snapshot_load(stem + ".snap");
            std::ifstream js(stem + ".json");
            detail::stationary_from_json(nlohmann::json::parse(js), prof);
            // The barriers are cheap and deterministic; rebuild them rather than store fields.
            const Grid2D grid = cfg.make_grid();
            const DiscreteKernel kernel = build_kernel(cfg.kernel_spec());
            prof.sub = build_subsolution(grid, cfg.hole, kernel);
            prof.super = build_supersolution(grid, cfg.hole, kernel, cfg.stationary.r0, std::nullopt, &prof.sub);
            log("stationary cache hit " + key);
            if (hit) *hit = true;
            return prof;
        } catch (const std::exception& e) {
            log(std::string("stationary cache entry unusable (") + e.what() + "), solving");
        }
    }
    if (hit) *hit = false;
    log("stationary cache miss " + key + ", solving");
    const DiscreteKernel kernel = build_kernel(cfg.kernel_spec());
    StationaryOptions opt;
    opt.tol = cfg.stationary.tol;
    opt.ladder = cfg.stationary.ladder;
    opt.r0 = cfg.stationary.r0;
    opt.verify_iterations = cfg.stationary.verify_iterations;
    prof = solve_stationary(cfg.make_grid(), cfg.hole, kernel, opt);
    snapshot_save(prof.phi, stem + ".snap");
    std::ofstream(stem + ".json") << detail::stationary_json(prof).dump(2) << '\n';
    char res[32];
    std::snprintf(res, sizeof res, "%.3e", prof.residual);
    log(std::string("stationary solved: residual ") + res + ", " + prof.sub.describe());
    log(prof.super.describe());
    return prof;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunRequest& req = {}) {
    namespace fs = std::filesystem;
    cfg.validate();
    ExperimentResult res;
    res.config = cfg;
    res.out_dir = cfg.output.dir;
    fs::create_directories(res.out_dir);
    const bool resuming = !req.resume.empty();
    detail::RunLog log(res.out_dir + "/run.log", req.echo, resuming);
    std::ofstream(res.out_dir + "/config.yaml") << serialize_config(cfg);

    const Grid2D grid = cfg.make_grid();
    const DiscreteKernel kernel = build_kernel(cfg.kernel_spec());
    auto mask = std::make_shared<const DomainMask>(build_domain(grid, cfg.hole));
    log("grid " + std::to_string(grid.n) + "^2, h = " + std::to_string(grid.h()) + ", q = " + std::to_string(kernel.q()));

    const std::string cache_dir = cfg.output.cache_dir.empty() ? res.out_dir + "/cache" : cfg.output.cache_dir;
    res.stationary = load_or_solve_stationary(cfg, cache_dir, [&log](const std::string& s) { log(s); }, &res.cache_hit);
    snapshot_save(res.stationary.phi, res.out_dir + "/phi.snap");
    std::ofstream(res.out_dir + "/stationary.json") << detail::stationary_json(res.stationary).dump(2) << '\n';

    res.u0 = cfg.initial.generate(grid, mask.get());
    res.M_star = phi_momentum(res.u0, &res.stationary.phi);
    const double sup_u0 = sup_abs(res.u0);
    log("M*_phi = " + std::to_string(res.M_star));

    DiagnosticsContext ctx;
    ctx.phi = &res.stationary.phi;
    ctx.mask = mask.get();
    ctx.kernel = &kernel;
    ctx.M_star = res.M_star;
    ctx.a = cfg.tolerances.inner_a_fraction * kernel.q();
    ctx.delta = cfg.tolerances.outer_delta;
    ctx.bounding_radius = mask->bounding_radius();
    ctx.edge_strip = kernel.reach();
    ctx.probe_cells = default_probe_cells(grid);
    res.probe_cells = ctx.probe_cells;
    for (auto [ix, iy] : ctx.probe_cells)
        res.probe_targets.push_back(res.M_star * res.stationary.phi(ix, iy) / (std::numbers::pi * kernel.q()));

    const double t_stop = req.until ? std::min(*req.until, cfg.evolution.t_end) : cfg.evolution.t_end;
    std::vector<double> times;
    for (double t : cfg.observation_times())
        if (t <= t_stop * (1 + 1e-12)) times.push_back(t);

    Field2D start = res.u0;
    double t_start = 0.0;
    if (resuming) {
        SnapshotMeta meta;
        start = snapshot_load(req.resume, &meta);
        if (!(start.grid() == grid)) throw SnapshotIncompatible("resume snapshot grid does not match the config");
        t_start = meta.time;
        std::ifstream old(res.out_dir + "/diagnostics.csv");
        if (old) {
            for (auto& rec : DiagnosticSeries::read_csv(old).records)
                if (rec.t <= t_start * (1 + 1e-12)) res.series.push(rec);
            std::ifstream pw(res.out_dir + "/pointwise.csv");
            std::string line;
            std::getline(pw, line);
            std::size_t i = 0;
            while (std::getline(pw, line) && i < res.series.records.size()) {
                std::stringstream ss(line);
                std::string cell;
                std::getline(ss, cell, ',');
                while (std::getline(ss, cell, ',')) res.series.records[i].pointwise.push_back(std::strtod(cell.c_str(), nullptr));
                ++i;
            }
        }
        log("resumed from " + req.resume + " at t = " + std::to_string(t_start));
    }

    SimulationState state = make_state(start, kernel, mask, cfg.evolution.scheme, cfg.evolution.dt);
    state.t = t_start;

    auto observer = [&](const SimulationState& s) {
        DiagnosticRecord rec = observe(s.u, s.t, ctx);
        const double mn = min_value(s.u);
        double hole_max = 0.0;
        for (std::size_t k = 0; k < s.u.size(); ++k)
            if (mask->in_hole(k)) hole_max = std::max(hole_max, std::abs(s.u[k]));
        if (mn < 0.0 || hole_max != 0.0 || rec.sup_u > sup_u0 * (1.0 + 1e-12)) {
            res.invariants_ok = false;
            std::ostringstream os;
            os << "t=" << s.t << " min u=" << mn << " max |u| on hole=" << hole_max << " sup u=" << rec.sup_u;
            res.invariant_detail = os.str();
        }
        std::ostringstream os;
        os << "t=" << s.t << " M=" << rec.M << " M_phi=" << rec.M_phi << " outer=" << rec.outer_err_d50
           << " inner=" << rec.inner_err;
        log(os.str());
        res.series.push(std::move(rec));
    };

    RunOptions ro;
    ro.edge_mass_cap = cfg.tolerances.edge_mass_cap;
    ro.checkpoint_times = cfg.output.checkpoints;
    const std::string key = detail::stationary_key(cfg);
    ro.on_checkpoint = [&](const SimulationState& s) {
        detail::write_checkpoint(res.out_dir, s, key);
        log("checkpoint at t = " + std::to_string(s.t));
    };
    ro.on_failure = [&](const SimulationState& s, const std::string& why) {
        snapshot_save(s.u, res.out_dir + "/failure.snap", {s.t, s.scheme});
        log("ABORT: " + why + " (state dumped to failure.snap)");
    };

    state = run(std::move(state), t_stop, times, observer, ro);
    res.u_final = state.u;
    res.t_final = state.t;
    res.complete = t_stop >= cfg.evolution.t_end;
    snapshot_save(state.u, res.out_dir + "/final.snap", {state.t, state.scheme});

    {
        std::ofstream csv(res.out_dir + "/diagnostics.csv", std::ios::binary | std::ios::trunc);
        res.series.write_csv(csv);
        std::ofstream pw(res.out_dir + "/pointwise.csv", std::ios::binary | std::ios::trunc);
        pw << "t";
        for (std::size_t p = 0; p < res.probe_cells.size(); ++p) pw << ",probe" << p;
        pw << '\n';
        char buf[64];
        for (const auto& rec : res.series.records) {
            std::snprintf(buf, sizeof buf, "%.17g", rec.t);
            pw << buf;
            for (double v : rec.pointwise) {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                pw << ',' << buf;
            }
            pw << '\n';
        }
    }

    res.assertions = evaluate_run_assertions(res);
    {
        std::ofstream sum(res.out_dir + "/summary.txt", std::ios::trunc);
        if (!res.complete) sum << "INCOMPLETE: stopped at t = " << res.t_final << " before t_end\n";
        sum << "M*_phi " << std::setprecision(17) << res.M_star << '\n';
        for (const auto& a : res.assertions) sum << (a.pass ? "PASS " : "FAIL ") << a.name << " | " << a.detail << '\n';
    }
    log(std::string("run finished") + (res.complete ? "" : " (incomplete)"));
    return res;
}

}  // namespace nldiff
