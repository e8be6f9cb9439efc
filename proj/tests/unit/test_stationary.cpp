#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nldiff/barriers.hpp"
#include "nldiff/convolution.hpp"
#include "nldiff/stationary.hpp"

using namespace nldiff;

namespace {

// -L f(x) by plain stencil summation of a closed-form function.
template <class F>
double minus_L(const F& f, const DiscreteKernel& k, double x, double y) {
    const int r = k.reach();
    double acc = 0.0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) acc += k.weight(dx, dy) * f(x - dx * k.h(), y - dy * k.h());
    return f(x, y) - acc;
}

struct Small {
    Grid2D grid = Grid2D::make(16.0, 256);
    DiscreteKernel kernel = build_kernel({1.0, 3, grid.h()});
    HoleShape hole = HoleShape::disk(0, 0, 2.5);
    DomainMask mask = build_domain(grid, hole);
};

const StationaryProfile& small_profile() {
    static const StationaryProfile p = [] {
        const Small s;
        StationaryOptions opt;
        opt.r0 = 0.2;
        return solve_stationary(s.grid, s.hole, s.kernel, opt);
    }();
    return p;
}

}  // namespace

TEST_CASE("sub-solution", "[barrier]") {
    const Small s;
    const Barrier sub = build_subsolution(s.grid, s.hole, s.kernel);
    CHECK(sub.kind == BarrierKind::sub);
    CHECK(sub.k0 > 0.0);
    double sup = 0.0;
    for (int iy = 0; iy < s.grid.n; ++iy)
        for (int ix = 0; ix < s.grid.n; ++ix) sup = std::max(sup, std::abs(sub.value(s.grid.coord(ix), s.grid.coord(iy))));
    for (int iy = 0; iy < s.grid.n; ++iy)
        for (int ix = 0; ix < s.grid.n; ++ix) {
            const double x = s.grid.coord(ix), y = s.grid.coord(iy);
            if (s.mask.in_hole(ix, iy)) REQUIRE(sub.value(x, y) <= 0.0);
            else REQUIRE(minus_L([&](double a, double b) { return sub.value(a, b); }, s.kernel, x, y) <= 1e-12 * sup);
        }
    // Larger k0 keeps the inequality.
    for (double f : {2.0, 4.0}) {
        const double k0 = f * sub.k0;
        auto v = [k0](double a, double b) { return std::log(a * a + b * b + k0); };
        double worst = -INFINITY;
        for (int iy = 0; iy < s.grid.n; iy += 3)
            for (int ix = 0; ix < s.grid.n; ix += 3) worst = std::max(worst, minus_L(v, s.kernel, s.grid.coord(ix), s.grid.coord(iy)));
        CHECK(worst <= 1e-12 * sup);
    }
}

TEST_CASE("log super-solution", "[barrier]") {
    const Small s;
    const Barrier sup = build_supersolution(s.grid, s.hole, s.kernel, 0.2);
    REQUIRE(sup.a.size() == static_cast<std::size_t>(sup.k + 1));
    CHECK(sup.a.front() == 0.0);
    for (std::size_t j = 1; j < sup.a.size(); ++j) CHECK(sup.a[j] < sup.a[j - 1]);
    CHECK(sup.kappa > 0.0);
    CHECK(sup.gamma0 == std::abs(sup.a.back()));
    CHECK(sup.D == Catch::Approx(2 * 0.2 + sup.k * 0.5));
    auto V = [&sup](double x, double y) { return sup.value(x, y); };
    for (int iy = 0; iy < s.grid.n; ++iy)
        for (int ix = 0; ix < s.grid.n; ++ix) {
            if (s.mask.in_hole(ix, iy)) continue;
            const double x = s.grid.coord(ix), y = s.grid.coord(iy);
            const double r = std::hypot(x, y);
            REQUIRE(minus_L(V, s.kernel, x, y) >= sup.kappa / (r * r * r) - 1e-13 * sup_abs(sup.field));
            REQUIRE(V(x, y) + sup.gamma >= sup.gamma - sup.gamma0);
            if (r >= sup.D) REQUIRE(V(x, y) == std::log(r - 0.2));
        }
    CHECK_THROWS_AS(build_supersolution(s.grid, s.hole, s.kernel, 0.25), InvalidArgument);
    CHECK_THROWS_AS(build_supersolution(s.grid, s.hole, s.kernel, 0.2, sup.gamma0 / 2), InvalidArgument);
}

TEST_CASE("log-power super-solutions", "[barrier]") {
    const Small s;
    for (double nu : {0.2, 0.5, 0.8}) {
        const Barrier w = build_log_power_supersolution(s.grid, s.hole, s.kernel, nu);
        CHECK(w.kappa > 0.0);
        for (std::size_t j = 1; j < w.a.size(); ++j) CHECK(w.a[j] < w.a[j - 1]);
        auto W = [&w](double x, double y) { return w.value(x, y); };
        // The builder evaluates -L by FFT; allow its rounding, relative to
        // the size of the field.
        const double slack = 1e-13 * sup_abs(w.field);
        for (int iy = 0; iy < s.grid.n; ++iy)
            for (int ix = 0; ix < s.grid.n; ++ix) {
                if (s.mask.in_hole(ix, iy)) continue;
                const double x = s.grid.coord(ix), y = s.grid.coord(iy);
                const double r = std::hypot(x, y);
                const double bound = w.kappa / (r * r * std::pow(std::log(r), 2.0 - nu));
                REQUIRE(minus_L(W, s.kernel, x, y) >= bound - slack);
                if (r >= w.D) REQUIRE(W(x, y) == std::pow(std::log(r), nu) + w.gamma);
            }
    }
    CHECK_THROWS_AS(build_log_power_supersolution(s.grid, s.hole, s.kernel, 1.0), InvalidArgument);
}

TEST_CASE("stationary profile", "[solve]") {
    const Small s;
    const StationaryProfile& p = small_profile();
    CHECK(p.residual <= 1e-8);
    CHECK(p.ladder.size() == 4);
    for (std::size_t k = 0; k < p.phi.size(); ++k)
        if (s.mask.in_hole(k)) REQUIRE(p.phi[k] == 0.0);

    SECTION("sandwich and ladder monotonicity per rung") {
        for (const auto& r : p.ladder) {
            CHECK(r.residual <= 1e-8);
            CHECK(r.sandwich_violation <= 1e-10);
            CHECK(r.ladder_violation <= 1e-10);
        }
        CHECK(p.monotone_violation <= 1e-12 * std::max(1.0, sup_abs(p.phi)));
        CHECK(p.overshoot <= 1e-8);
    }
    SECTION("fixed point of the masked map, checked by direct convolution") {
        const Field2D jphi = convolve_direct(p.phi, s.kernel);
        double worst = 0.0;
        for (int iy = 0; iy < s.grid.n; ++iy)
            for (int ix = 0; ix < s.grid.n; ++ix) {
                if (s.mask.in_hole(ix, iy)) continue;
                if (std::hypot(s.grid.coord(ix), s.grid.coord(iy)) >= p.radius) continue;
                worst = std::max(worst, std::abs(jphi(ix, iy) - p.phi(ix, iy)));
            }
        CHECK(worst <= 1e-8);
    }
    SECTION("phi is nonnegative off the hole and grows like log|x|") {
        CHECK(min_value(p.phi) >= 0.0);
        CHECK(std::isfinite(p.log_deviation));
        const auto& l = p.ladder;
        CHECK(std::isnan(l[0].growth_defect));
        for (std::size_t i = 2; i < l.size(); ++i) CHECK(l[i].growth_defect < l[i - 1].growth_defect);
    }
}

TEST_CASE("uniqueness and bounded frames", "[solve]") {
    const Small s;
    CHECK(uniqueness_probe(s.grid, s.hole, s.kernel, -1.0, 1e-8, 0) == 0.0);
    CHECK(uniqueness_probe(s.grid, s.hole, s.kernel) <= 1e-6);
    const std::vector<double> v = bounded_frame_probe(s.grid, s.hole, s.kernel, {4.0, 8.0, 12.0});
    REQUIRE(v.size() == 3);
    for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] < v[i - 1]);
}

TEST_CASE("gradient report", "[gradient]") {
    const Small s;
    SECTION("log|x| gives |x| |grad log|x|| close to 1") {
        StationaryProfile fake;
        fake.phi = Field2D::sample(s.grid, [](double x, double y) { return 0.5 * std::log(x * x + y * y); });
        s.mask.apply(fake.phi);
        fake.radius = 14.0;
        fake.bounding_radius = 2.5;
        const GradientReport g = gradient_bound_report(fake, s.hole, s.kernel);
        CHECK(g.cells > 0);
        CHECK(g.C == Catch::Approx(1.0).margin(s.grid.h() * s.grid.h() / 25.0));
        CHECK(g.C_prime == Catch::Approx(1.0).margin(0.25));
    }
    SECTION("solved phi has a finite bound") {
        const GradientReport g = gradient_bound_report(small_profile(), s.hole, s.kernel);
        CHECK(std::isfinite(g.C));
        CHECK(g.C > 0.0);
        CHECK(std::isfinite(g.C_prime));
    }
}

TEST_CASE("evolutionary super-solution", "[evolution-barrier]") {
    const Small s;
    const Barrier sup = build_supersolution(s.grid, s.hole, s.kernel, 0.2);
    const double q = s.kernel.q();
    CHECK_THROWS_AS(evolution_supersolution_check(sup, s.kernel, s.grid, q, 2.0), InvalidArgument);
    CHECK_THROWS_AS(evolution_supersolution_check(sup, s.kernel, s.grid, q / 2, 1.0), InvalidArgument);
    const EvolutionCheckReport rep = evolution_supersolution_check(sup, s.kernel, s.grid, q / 2, 2.0);
    // The ratio is a Moebius function of b, so it need not be monotone, but
    // once b dominates V_+ it approaches its limit like 1/b: each doubling
    // of b at least roughly halves the step.
    for (const auto& row : rep.min_ratio_table) {
        const std::size_t m = row.size() - 1;
        REQUIRE(std::isfinite(row[m - 3]));
        for (std::size_t j = m - 1; j <= m; ++j)
            CHECK(std::abs(row[j] - row[j - 1]) <= 0.6 * std::abs(row[j - 1] - row[j - 2]) + 1e-12);
    }
    CHECK(rep.found);
    CHECK(rep.min_ratio >= 1.0);
}
