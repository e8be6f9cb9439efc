// Acceptance run: one PASS/FAIL line per criterion 1-15.
//
// Usage: nldiff_acceptance --work DIR [--only 1,2,...] [--reuse]
// Runs the reference experiment under DIR/reference. --reuse keeps finished
// runs from an earlier invocation instead of starting over.

#include <CLI11.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "nldiff/nldiff.hpp"

using namespace nldiff;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.4g", v);
    return b;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// -L V(x) by direct stencil summation of a closed-form field.
template <class F>
double minus_L(const F& f, const DiscreteKernel& k, double x, double y) {
    const int r = k.reach();
    double acc = 0.0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            const double w = k.weight(dx, dy);
            if (w != 0.0) acc += w * f(x - dx * k.h(), y - dy * k.h());
        }
    return f(x, y) - acc;
}

double sup_diff(const Field2D& a, const Field2D& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

class Context {
public:
    Context(fs::path work, bool reuse) : work_(std::move(work)), reuse_(reuse) { fs::create_directories(work_); }

    const fs::path& work() const { return work_; }

    ExperimentConfig reference(const std::string& name, const std::string& cache) const {
        ExperimentConfig c;  // the defaults are the reference configuration
        c.output.dir = (work_ / name).string();
        c.output.cache_dir = (work_ / cache).string();
        return c;
    }

    // Reference-geometry stationary profile, shared through the cache.
    const StationaryProfile& reference_phi() {
        if (!phi_) {
            const ExperimentConfig c = reference("reference", "cache");
            phi_ = load_or_solve_stationary(c, c.output.cache_dir, [](const std::string& s) { log(s); });
        }
        return *phi_;
    }

    const ExperimentResult& run(const std::string& name, const ExperimentConfig& cfg) {
        auto it = runs_.find(name);
        if (it != runs_.end()) return it->second;
        const fs::path dir = cfg.output.dir;
        if (!reuse_ || !fs::exists(dir / "summary.txt") || slurp(dir / "summary.txt").rfind("INCOMPLETE", 0) == 0) {
            fs::remove_all(dir);
            if (!reuse_ && !cfg.output.cache_dir.empty() && cfg.output.cache_dir != (work_ / "cache").string())
                fs::remove_all(cfg.output.cache_dir);
        }
        log("running " + name + " (" + std::to_string(cfg.grid.n) + "^2, t_end " + fmt(cfg.evolution.t_end) + ")");
        RunRequest req;
        // A finished run on disk is replayed from its final checkpoint, which
        // reloads the series without stepping again.
        if (reuse_ && fs::exists(dir / "checkpoint_t640.snap") && fs::exists(dir / "diagnostics.csv"))
            req.resume = (dir / "checkpoint_t640.snap").string();
        return runs_.emplace(name, run_experiment(cfg, req)).first->second;
    }

    static void log(const std::string& s) { std::cerr << "  . " << s << std::endl; }

private:
    fs::path work_;
    bool reuse_;
    std::optional<StationaryProfile> phi_;
    std::map<std::string, ExperimentResult> runs_;
};

const Assertion* find_assertion(const ExperimentResult& r, const std::string& prefix) {
    for (const auto& a : r.assertions)
        if (a.name.rfind(prefix, 0) == 0) return &a;
    return nullptr;
}

Verdict from_run(const ExperimentResult& r, const std::string& prefix) {
    const Assertion* a = find_assertion(r, prefix);
    if (!a) return {false, "assertion missing from the run summary"};
    return {a->pass && r.complete, a->detail + (r.complete ? "" : " (run incomplete)")};
}

// ---------------------------------------------------------------- criteria

Verdict c1_convolution(Context&) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const DiscreteKernel ker = build_kernel({1.0, 3, 1.0 / 8});
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = trial % 2 == 0 ? 64 : 128;
        const Grid2D g = Grid2D::make(n / 16.0, n);
        Field2D f(g);
        for (auto& v : f.values()) v = U(rng);
        for (Padding p : {Padding::zero, Padding::wrap})
            worst = std::max(worst, relative_sup_error(convolve(f, ker, ConvolutionPlan(g, ker, p)),
                                                       convolve_direct(f, ker, p)));
    }
    return {worst <= 1e-12, "worst relative sup error " + fmt(worst) + " over 20 fields, both paddings"};
}

Verdict c2_semigroup(Context&) {
    const Grid2D g = Grid2D::make(16.0, 256);
    const DiscreteKernel ker = build_kernel({1.0, 3, g.h()});
    const Field2D u0 = InitialData{}.generate(g);
    const Field2D exact = whole_space_exact(u0, ker, 5.0);
    double err[2];
    for (int i = 0; i < 2; ++i) {
        const double dt = i == 0 ? 0.02 : 0.01;
        SimulationState st = make_state(u0, ker, nullptr, Scheme::exponential, dt, Padding::wrap);
        st = run(std::move(st), 5.0, {}, [](const SimulationState&) {});
        err[i] = sup_diff(st.u, exact) / sup_abs(u0);
    }
    const double ratio = err[0] / err[1];
    const bool ok = err[1] <= 1e-4 && ratio >= 1.7 && ratio <= 2.3;
    return {ok, "error/sup u0 at dt=0.01: " + fmt(err[1]) + " (cap 1e-4), halving ratio " + fmt(ratio)};
}

Verdict c3_diffusivity(Context&) {
    using boost::math::quadrature::gauss_kronrod;
    auto w = [](double r) { return std::pow(1.0 - r * r, 3); };
    const double m0 = gauss_kronrod<double, 31>::integrate([&](double r) { return r * w(r); }, 0.0, 1.0, 15, 1e-15);
    const double m2 =
        gauss_kronrod<double, 31>::integrate([&](double r) { return r * r * r * w(r); }, 0.0, 1.0, 15, 1e-15);
    const double oracle = 0.25 * m2 / m0;
    const double q = build_kernel({1.0, 3, 1.0 / 64}).q();
    const double e = std::abs(q - oracle);
    return {e <= 1e-6 && std::abs(oracle - 0.05) <= 1e-13,
            "q = " + fmt(q) + ", quadrature " + fmt(oracle) + ", |diff| " + fmt(e)};
}

Verdict c4_barriers(Context&) {
    const ExperimentConfig cfg;
    const Grid2D g = cfg.make_grid();
    const DiscreteKernel ker = build_kernel(cfg.kernel_spec());
    const DomainMask mask = build_domain(g, cfg.hole);
    std::ostringstream d;
    bool ok = true;

    const Barrier sub = build_subsolution(g, cfg.hole, ker);
    {
        auto V = [&sub](double x, double y) { return sub.value(x, y); };
        double sup = 0.0, worst = -INFINITY, hole_max = -INFINITY;
        for (int iy = 0; iy < g.n; ++iy)
            for (int ix = 0; ix < g.n; ++ix) sup = std::max(sup, std::abs(V(g.coord(ix), g.coord(iy))));
        for (int iy = 0; iy < g.n; ++iy)
            for (int ix = 0; ix < g.n; ++ix) {
                const double x = g.coord(ix), y = g.coord(iy);
                if (mask.in_hole(ix, iy)) hole_max = std::max(hole_max, V(x, y));
                else worst = std::max(worst, minus_L(V, ker, x, y) / sup);
            }
        const bool s = worst <= 1e-12 && hole_max <= 0.0;
        ok = ok && s;
        d << "sub: max -LV/sup|V| " << fmt(worst) << ", max V on hole " << fmt(hole_max);
    }

    const Barrier sup = build_supersolution(g, cfg.hole, ker, cfg.stationary.r0, std::nullopt, &sub);
    {
        bool dec = sup.kappa > 0.0;
        for (std::size_t j = 1; j < sup.a.size(); ++j) dec = dec && sup.a[j] < sup.a[j - 1];
        auto V = [&sup](double x, double y) { return sup.value(x, y); };
        // Direct stencil sums of a field of size |a_{k+1}| carry rounding of
        // that size; allow it relative to the field, as for the sub-solution.
        const double slack = 1e-13 * sup_abs(sup.field);
        double worst = INFINITY;
        for (int iy = 0; iy < g.n; ++iy)
            for (int ix = 0; ix < g.n; ++ix) {
                if (mask.in_hole(ix, iy)) continue;
                const double x = g.coord(ix), y = g.coord(iy), r = std::hypot(x, y);
                worst = std::min(worst, minus_L(V, ker, x, y) - sup.kappa / (r * r * r));
            }
        const bool s = dec && worst >= -slack;
        ok = ok && s;
        d << "; super: a_j decreasing=" << dec << " kappa " << fmt(sup.kappa) << " min(-LV - kappa/r^3) "
          << fmt(worst);
    }

    for (double nu : {0.2, 0.5, 0.8}) {
        const Barrier w = build_log_power_supersolution(g, cfg.hole, ker, nu, std::nullopt, cfg.stationary.r0);
        auto W = [&w](double x, double y) { return w.value(x, y); };
        const double slack = 1e-13 * sup_abs(w.field);
        double worst = INFINITY;
        for (int iy = 0; iy < g.n; ++iy)
            for (int ix = 0; ix < g.n; ++ix) {
                if (mask.in_hole(ix, iy)) continue;
                const double x = g.coord(ix), y = g.coord(iy), r = std::hypot(x, y);
                const double bound = w.kappa / (r * r * std::pow(std::log(r), 2.0 - nu));
                worst = std::min(worst, minus_L(W, ker, x, y) - bound);
            }
        const bool s = w.kappa > 0.0 && worst >= -slack;
        ok = ok && s;
        d << "; nu=" << nu << " min(-LW - bound) " << fmt(worst);
    }
    return {ok, d.str()};
}

Verdict c5_stationary(Context& ctx) {
    const StationaryProfile& p = ctx.reference_phi();
    const ExperimentConfig cfg;
    const double round = 1e-12 * std::max(1.0, sup_abs(p.phi));
    double sandwich = 0.0, ladder = 0.0;
    for (const auto& r : p.ladder) {
        sandwich = std::max(sandwich, r.sandwich_violation);
        ladder = std::max(ladder, r.ladder_violation);
    }
    std::vector<double> defects;
    for (const auto& r : p.ladder)
        if (std::isfinite(r.growth_defect)) defects.push_back(r.growth_defect);
    const bool osc = !defects.empty() && defects.back() <= 0.05 && strictly_decreasing(defects);
    Context::log("uniqueness probe on the reference grid");
    const double uniq =
        uniqueness_probe(cfg.make_grid(), cfg.hole, build_kernel(cfg.kernel_spec()), -1.0, cfg.stationary.tol);
    const bool ok = p.residual <= 1e-8 && p.monotone_violation <= round && ladder <= round && sandwich <= round &&
                    uniq <= 1e-6 && osc;
    std::ostringstream d;
    d << "residual " << fmt(p.residual) << ", iteration decrease " << fmt(p.monotone_violation) << ", ladder decrease "
      << fmt(ladder) << ", sandwich violation " << fmt(sandwich) << " (rounding cap " << fmt(round)
      << "), uniqueness " << fmt(uniq) << ", oscillation per rung";
    for (double v : defects) d << " " << fmt(v);
    return {ok, d.str()};
}

Verdict c6_gradient(Context& ctx) {
    double C[2];
    for (int i = 0; i < 2; ++i) {
        ExperimentConfig c = ctx.reference("gradient", "cache");
        c.grid.half_width = 32.0;
        c.grid.n = i == 0 ? 512 : 1024;
        const StationaryProfile p =
            load_or_solve_stationary(c, c.output.cache_dir, [](const std::string& s) { Context::log(s); });
        C[i] = gradient_bound_report(p, c.hole, build_kernel(c.kernel_spec())).C;
    }
    const double change = std::abs(C[1] / C[0] - 1.0);
    return {std::isfinite(C[0]) && std::isfinite(C[1]) && change <= 0.10,
            "sup |x||grad phi| at h=1/16: " + fmt(C[0]) + ", h=1/32: " + fmt(C[1]) + ", change " +
                fmt(100 * change) + "%"};
}

double phi_drift(const ExperimentResult& r) {
    double drift = 0.0;
    for (const auto& rec : r.series.records) drift = std::max(drift, std::abs(rec.M_phi - r.M_star) / r.M_star);
    return drift;
}

Verdict c7_conservation(Context& ctx) {
    const ExperimentResult& ref = ctx.run("reference", ctx.reference("reference", "cache"));
    ExperimentConfig fine = ctx.reference("reference_2048", "cache");
    fine.grid.n = 2048;
    const ExperimentResult& f = ctx.run("reference_2048", fine);
    const double d0 = phi_drift(ref), d1 = phi_drift(f);
    const bool ok = ref.complete && f.complete && d0 <= 1e-3 && d1 <= d0 / 2.0;
    return {ok, "max relative drift 1024^2: " + fmt(d0) + ", 2048^2: " + fmt(d1) + " (needs <= 1e-3 and a 2x drop)"};
}

const ExperimentResult& reference_run(Context& ctx) { return ctx.run("reference", ctx.reference("reference", "cache")); }

Verdict c8_shapes(Context& ctx) { return from_run(reference_run(ctx), "criterion 8"); }
Verdict c9_log_momentum(Context& ctx) { return from_run(reference_run(ctx), "criterion 9"); }
Verdict c10_outer(Context& ctx) { return from_run(reference_run(ctx), "criterion 10"); }
Verdict c11_inner(Context& ctx) { return from_run(reference_run(ctx), "criterion 11"); }
Verdict c12_intermediate(Context& ctx) { return from_run(reference_run(ctx), "criterion 12"); }

Verdict c13_regular_part(Context&) {
    const ExperimentConfig cfg;
    const Grid2D g = cfg.make_grid();
    const DiscreteKernel ker = build_kernel(cfg.kernel_spec());
    const Field2D u0 = cfg.initial.generate(g);
    const std::vector<double> times{1.0, 10.0, 100.0};
    double mass_err = 0.0, rep_err = 0.0;
    for (double t : times) {
        const RegularPart w = regular_part(ker, t, g);
        CompensatedSum s;
        for (double v : w.lattice.values()) s.add(v);
        mass_err = std::max(mass_err, std::abs(s.value() * g.h() * g.h() - (1.0 - std::exp(-t))));
        const Field2D wu = convolve_regular_part(w, u0);
        const Field2D exact = whole_space_exact(u0, ker, t);
        for (std::size_t k = 0; k < u0.size(); ++k)
            rep_err = std::max(rep_err, std::abs(std::exp(-t) * u0[k] + wu[k] - exact[k]));
    }
    const WEstimateReport rep = w_estimate_report(ker, times, g);
    // "No growth": the per-decade exponent stays below 0.05.
    const double gd = rep.growth_rate([](const WEstimateRow& r) { return r.diff_scaled; });
    const double gt = rep.growth_rate([](const WEstimateRow& r) { return r.tail_scaled; });
    const bool ok = mass_err <= 1e-10 && rep_err <= 1e-10 && gd <= 0.05 && gt <= 0.05;
    std::ostringstream d;
    d << "mass error " << fmt(mass_err) << ", representation error " << fmt(rep_err)
      << ", decade growth of t^1.5 sup|W-G| " << fmt(gd) << " and of sup(1+|x|^4)|W|/t " << fmt(gt);
    return {ok, d.str()};
}

Verdict c14_evolution_barrier(Context& ctx) {
    const ExperimentConfig cfg;
    const Grid2D g = cfg.make_grid();
    const DiscreteKernel ker = build_kernel(cfg.kernel_spec());
    const Barrier& sup = ctx.reference_phi().super;
    const EvolutionCheckReport rep = evolution_supersolution_check(sup, ker, g, ker.q() / 2.0, 2.0);
    return {rep.found && rep.min_ratio >= 1.0,
            rep.found ? "b = " + fmt(rep.b) + ", T = " + fmt(rep.T) + ", min ratio " + fmt(rep.min_ratio)
                      : "no (b, T) found"};
}

Verdict c15_determinism(Context& ctx) {
    const ExperimentResult& a = reference_run(ctx);
    // Separate cache: the stationary profile is solved again from scratch.
    const ExperimentResult& b = ctx.run("reference_repeat", ctx.reference("reference_repeat", "cache_repeat"));
    const std::string x = slurp(fs::path(a.out_dir) / "diagnostics.csv");
    const std::string y = slurp(fs::path(b.out_dir) / "diagnostics.csv");
    const bool ok = a.complete && b.complete && !x.empty() && x == y;
    return {ok, std::to_string(x.size()) + " bytes, identical=" + std::to_string(x == y)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria 1-15 on the reference configuration"};
    std::string work = "acceptance_work";
    std::vector<int> only;
    bool reuse = false;
    app.add_option("--work", work, "scratch directory for runs and caches");
    app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
    app.add_flag("--reuse", reuse, "keep finished runs from an earlier invocation");
    CLI11_PARSE(app, argc, argv);

    using Fn = Verdict (*)(Context&);
    const std::vector<std::pair<std::string, Fn>> criteria{
        {"convolution oracle", c1_convolution},
        {"semigroup oracle", c2_semigroup},
        {"diffusivity", c3_diffusivity},
        {"barriers", c4_barriers},
        {"stationary solution", c5_stationary},
        {"gradient bound", c6_gradient},
        {"conservation law", c7_conservation},
        {"decay shapes", c8_shapes},
        {"logarithmic momentum", c9_log_momentum},
        {"outer limit trend", c10_outer},
        {"inner limit trend", c11_inner},
        {"intermediate scale", c12_intermediate},
        {"regular part estimates", c13_regular_part},
        {"evolutionary super-solution", c14_evolution_barrier},
        {"determinism", c15_determinism},
    };
    const std::set<int> selected(only.begin(), only.end());

    Context ctx(work, reuse);
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second(ctx);
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %d (%s): %s [%.0fs]\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                    v.detail.c_str(), s);
        std::fflush(stdout);
        failed += !v.pass;
    }
    return failed == 0 ? 0 : 1;
}
