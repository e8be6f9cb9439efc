#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "nldiff/nldiff.hpp"

namespace {

using namespace nldiff;

ExperimentConfig load_config(const std::string& path, const std::string& out) {
    ExperimentConfig cfg;
    if (!path.empty()) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open config " + path, 0);
        std::stringstream ss;
        ss << is.rdbuf();
        cfg = parse_config(ss.str());
    }
    if (!out.empty()) cfg.output.dir = out;
    return cfg;
}

int cmd_simulate(const ExperimentConfig& cfg, std::optional<double> until, const std::string& resume) {
    RunRequest req;
    req.until = until;
    req.resume = resume;
    req.echo = &std::cout;
    const ExperimentResult res = run_experiment(cfg, req);
    int failed = 0;
    for (const auto& a : res.assertions) {
        std::cout << (a.pass ? "PASS " : "FAIL ") << a.name << " | " << a.detail << '\n';
        failed += !a.pass;
    }
    if (!res.complete) std::cout << "INCOMPLETE: stopped at t = " << res.t_final << '\n';
    return failed == 0 ? 0 : 1;
}

int cmd_stationary(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.output.dir);
    const std::string cache = cfg.output.cache_dir.empty() ? cfg.output.dir + "/cache" : cfg.output.cache_dir;
    const StationaryProfile p =
        load_or_solve_stationary(cfg, cache, [](const std::string& s) { std::cout << s << '\n'; });
    snapshot_save(p.phi, cfg.output.dir + "/phi.snap");
    std::printf("residual          %.3e (tol %.1e)\n", p.residual, p.tol);
    std::printf("final radius      %g\n", p.radius);
    std::printf("growth defect     %.4g\n", p.growth_defect);
    std::printf("sup|phi - log|x|| %.6g\n", p.log_deviation);
    std::printf("verification      %d iterations, monotone violation %.3e, overshoot %.3e\n", p.verify_iterations,
                p.monotone_violation, p.overshoot);
    std::printf("%8s %10s %12s %14s %12s %12s\n", "radius", "iters", "residual", "growth_defect", "sandwich", "ladder");
    for (const auto& r : p.ladder)
        std::printf("%8g %10d %12.3e %14.6g %12.3e %12.3e\n", r.radius, r.iterations, r.residual, r.growth_defect,
                    r.sandwich_violation, r.ladder_violation);
    return p.residual <= p.tol ? 0 : 1;
}

int cmd_barriers(const ExperimentConfig& cfg, const std::vector<double>& nus) {
    const Grid2D grid = cfg.make_grid();
    const DiscreteKernel kernel = build_kernel(cfg.kernel_spec());
    const Barrier sub = build_subsolution(grid, cfg.hole, kernel);
    std::cout << sub.describe() << '\n';
    const Barrier sup = build_supersolution(grid, cfg.hole, kernel, cfg.stationary.r0, std::nullopt, &sub);
    std::cout << sup.describe() << '\n';
    for (double nu : nus) {
        const Barrier lp = build_log_power_supersolution(grid, cfg.hole, kernel, nu, std::nullopt, cfg.stationary.r0);
        std::cout << lp.describe() << '\n';
    }
    return 0;
}

int cmd_fundamental(const ExperimentConfig& cfg, const std::vector<double>& times) {
    const DiscreteKernel kernel = build_kernel(cfg.kernel_spec());
    const WEstimateReport rep = w_estimate_report(kernel, times, cfg.make_grid());
    std::printf("%8s %20s %12s %14s %14s %12s\n", "t", "mass-(1-e^-t)", "min<clip", "t^1.5 sup|W-G|",
                "(1+|x|^4)W/t", "|W|_1");
    for (const auto& r : rep.rows)
        std::printf("%8g %20.3e %12.3e %14.6g %14.6g %12.6g\n", r.t, r.mass - (1.0 - std::exp(-r.t)),
                    r.min_before_clip, r.diff_scaled, r.tail_scaled, r.l1);
    return 0;
}

int cmd_analyze(const std::string& csv_path, double m_star, double lo, double hi) {
    std::ifstream is(csv_path);
    if (!is) throw InvalidArgument("cannot open " + csv_path);
    const DiagnosticSeries s = DiagnosticSeries::read_csv(is);
    const DiagnosticSeries w = s.window(lo, hi);
    std::printf("%zu rows, window [%g, %g] holds %zu\n", s.records.size(), lo, hi, w.records.size());
    const MomentaReport mo = momenta_growth_report(s, lo, hi);
    std::printf("t log t sup u bounded: %d\nM2 log t / t bounded: %d\nM1 log t / sqrt t bounded: %d\n",
                mo.sup_bounded, mo.m2_bounded, mo.m1_bounded);
    if (std::isfinite(m_star)) {
        const RescaledMassReport m = rescaled_mass_limit(s, m_star, lo, hi);
        std::printf("log t M bounded: %d\n|log t M - 2 M_log| decreasing: %d\n", m.log_t_mass_bounded,
                    m.gap_decreasing);
        std::vector<double> t, v;
        for (const auto& r : s.records)
            if (r.t >= lo) {
                t.push_back(r.t);
                v.push_back(std::log(r.t) * r.M);
            }
        if (t.size() >= 8) {
            const RateFit f = fit_log_rate(t, v, RateModel::const_plus_inv_log);
            std::printf("fit log t M ~ c0 + c1/log t: c0 = %.6g, c1 = %.6g, residual %.3e\n", f.coefficients.at(0),
                        f.coefficients.at(1), f.residual);
        }
    }
    return 0;
}

int cmd_oracle(const ExperimentConfig& cfg, int n) {
    const double L = cfg.grid.half_width * n / cfg.grid.n;
    const Grid2D grid = Grid2D::make(L, n);
    const DiscreteKernel kernel = build_kernel(KernelSpec{cfg.kernel.radius, cfg.kernel.exponent, grid.h()});
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Field2D f(grid);
    for (auto& v : f.values()) v = U(rng);
    for (Padding p : {Padding::zero, Padding::wrap}) {
        const ConvolutionPlan plan(grid, kernel, p);
        const double e = relative_sup_error(convolve(f, kernel, plan), convolve_direct(f, kernel, p));
        std::printf("convolve vs direct (%s): relative sup error %.3e\n", p == Padding::zero ? "zero" : "wrap", e);
    }
    InitialData init;
    init.kind = InitialData::Kind::gaussian;
    const Field2D u0 = init.generate(grid, nullptr);
    const double t = 5.0;
    const Field2D exact = whole_space_exact(u0, kernel, t);
    for (double dt : {0.02, 0.01}) {
        SimulationState st = make_state(u0, kernel, nullptr, Scheme::exponential, dt, Padding::wrap);
        st = run(std::move(st), t, {}, [](const SimulationState&) {});
        double err = 0.0;
        for (std::size_t k = 0; k < u0.size(); ++k) err = std::max(err, std::abs(st.u[k] - exact[k]));
        std::printf("exponential dt = %g vs exact semigroup at t = %g: sup error / sup u0 = %.3e\n", dt, t,
                    err / sup_abs(u0));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonlocal diffusion in an exterior domain: simulation and verification"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    app.add_option("--config", config_path, "YAML config file (defaults when omitted)");
    app.add_option("--out", out_dir, "output directory (overrides output.dir)");

    auto* sim = app.add_subcommand("simulate", "solve phi, evolve, write diagnostics and the summary");
    double until = -1.0;
    std::string resume;
    sim->add_option("--until", until, "stop at this time instead of t_end");
    sim->add_option("--resume", resume, "continue from a checkpoint snapshot")->check(CLI::ExistingFile);

    auto* stat = app.add_subcommand("stationary", "solve the stationary profile and print the ladder report");

    auto* bar = app.add_subcommand("barriers", "build the sub- and super-solutions and print their parameters");
    std::vector<double> nus{0.2, 0.5, 0.8};
    bar->add_option("--nu", nus, "log-power exponents");

    auto* fun = app.add_subcommand("fundamental", "regular part of the fundamental solution: estimate table");
    std::vector<double> times{1.0, 10.0, 100.0};
    fun->add_option("--times", times, "sample times in [1, 1000]");

    auto* ana = app.add_subcommand("analyze", "trend checks on an existing diagnostics CSV");
    std::string csv;
    double m_star = std::numeric_limits<double>::quiet_NaN(), lo = 64.0, hi = 640.0;
    ana->add_option("csv", csv, "diagnostics.csv")->required()->check(CLI::ExistingFile);
    ana->add_option("--mstar", m_star, "conserved phi-momentum M*");
    ana->add_option("--from", lo, "window start");
    ana->add_option("--to", hi, "window end");

    auto* ora = app.add_subcommand("oracle", "convolution and semigroup cross-checks");
    int oracle_n = 128;
    ora->add_option("--n", oracle_n, "oracle grid size (at most 256)");

    for (auto* sc : {sim, stat, bar, fun, ana, ora}) {
        sc->add_option("--config", config_path, "YAML config file");
        sc->add_option("--out", out_dir, "output directory");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        const ExperimentConfig cfg = load_config(config_path, out_dir);
        if (*sim) return cmd_simulate(cfg, until > 0.0 ? std::optional<double>(until) : std::nullopt, resume);
        if (*stat) return cmd_stationary(cfg);
        if (*bar) return cmd_barriers(cfg, nus);
        if (*fun) return cmd_fundamental(cfg, times);
        if (*ana) return cmd_analyze(csv, m_star, lo, hi);
        if (*ora) return cmd_oracle(cfg, oracle_n);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
