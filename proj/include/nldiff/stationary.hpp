#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nldiff/barriers.hpp"
#include "nldiff/convolution.hpp"
#include "nldiff/domain.hpp"
#include "nldiff/error.hpp"
#include "nldiff/fundamental.hpp"
#include "nldiff/grid.hpp"
#include "nldiff/kernel.hpp"

namespace nldiff {

struct StationaryOptions {
    double tol = 1e-8;
    std::vector<double> ladder;   // empty: half_width * {1/4, 1/2, 5/8, 3/4}
    double residual_factor = 1e-3;  // solver target = residual_factor * tol
    int max_iterations = 50000;
    int verify_iterations = 500;
    int verify_every = 50;
    double r0 = -1.0;  // super-solution r0; negative: d/5
};

struct LadderRung {
    double radius = 0.0;
    int iterations = 0;
    double residual = 0.0;
    double growth_defect = std::numeric_limits<double>::quiet_NaN();  // NaN: annulus not inside B_n
    double sandwich_violation = 0.0;  // max of V_-/2 - phi and phi - V_+ - gamma on B_n
    double ladder_violation = 0.0;    // max of phi_prev - phi on B_prev (0 for the first rung)
};

struct StationaryProfile {
    Field2D phi;
    double radius = 0.0;  // final ladder radius
    double residual = 0.0;
    double growth_defect = std::numeric_limits<double>::quiet_NaN();
    double tol = 0.0;
    double bounding_radius = 0.0;
    double kernel_radius = 0.0;
    std::vector<LadderRung> ladder;

    // Fixed-point verification from V_-/2 on the final rung.
    int verify_iterations = 0;
    double monotone_violation = 0.0;  // max decrease between checkpoints
    double overshoot = 0.0;           // max of iterate - phi over checkpoints

    Barrier sub;
    Barrier super;

    /// sup over exterior cells of |phi - log|x||.
    double log_deviation = 0.0;
};

namespace detail {

inline double seq_dot(const Field2D& a, const Field2D& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

/// Masked problem on a concentric box covering B_{R+d}: unknowns on
/// B_R minus the hole, frame data fixed outside B_R, zero on the hole.
class MaskedSystem {
public:
    MaskedSystem(const Grid2D& grid, const DomainMask& mask, const DiscreteKernel& kernel, double radius)
        : radius_(radius) {
        const double h = grid.h();
        const int half = static_cast<int>(std::ceil((radius + kernel.radius()) / h)) + 1;
        const int margin = grid.n / 2 - half;
        if (margin < 0) throw InvalidArgument("ladder radius plus kernel radius exceeds the grid");
        margin_ = margin;
        box_ = grid.shrunk(margin);
        plan_ = std::make_unique<ConvolutionPlan>(box_, kernel, Padding::zero);
        unknown_.assign(box_.cells(), 0);
        hole_.assign(box_.cells(), 0);
        for (int iy = 0; iy < box_.n; ++iy)
            for (int ix = 0; ix < box_.n; ++ix) {
                const std::size_t k = static_cast<std::size_t>(iy) * box_.n + ix;
                hole_[k] = mask.in_hole(ix + margin, iy + margin) ? 1 : 0;
                const double r = std::hypot(box_.coord(ix), box_.coord(iy));
                unknown_[k] = (!hole_[k] && r < radius) ? 1 : 0;
            }
    }

    const Grid2D& box() const { return box_; }
    int margin() const { return margin_; }
    double radius() const { return radius_; }
    bool unknown(std::size_t k) const { return unknown_[k] != 0; }
    bool hole(std::size_t k) const { return hole_[k] != 0; }

    /// Frame field: `f` outside B_R, zero on the hole and on the unknowns.
    template <class F>
    Field2D frame(F&& f) const {
        Field2D out(box_);
        for (int iy = 0; iy < box_.n; ++iy)
            for (int ix = 0; ix < box_.n; ++ix) {
                const std::size_t k = out.index(ix, iy);
                if (!unknown_[k] && !hole_[k]) out[k] = f(box_.coord(ix), box_.coord(iy));
            }
        return out;
    }

    void project(Field2D& v) const {
        for (std::size_t k = 0; k < v.size(); ++k)
            if (!unknown_[k]) v[k] = 0.0;
    }

    /// P J v.
    Field2D pj(const Field2D& v) const {
        Field2D out = plan_->convolve(v);
        project(out);
        return out;
    }

    /// (I - P J P) v for v supported on the unknowns.
    Field2D apply(const Field2D& v) const {
        Field2D out = pj(v);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = v[k] - out[k];
        return out;
    }

    double sup_on_unknowns(const Field2D& v) const {
        double m = 0.0;
        for (std::size_t k = 0; k < v.size(); ++k)
            if (unknown_[k]) m = std::max(m, std::abs(v[k]));
        return m;
    }

private:
    double radius_;
    int margin_ = 0;
    Grid2D box_;
    std::unique_ptr<ConvolutionPlan> plan_;
    std::vector<std::uint8_t> unknown_;
    std::vector<std::uint8_t> hole_;
};

struct CgResult {
    Field2D x;
    int iterations = 0;
    double residual = 0.0;  // sup of the true residual on the unknowns
};

/// Conjugate gradients for (I - PJP) x = rhs, stopping on the sup norm of
/// the residual. The recursive residual is re-synchronized with the true
/// one on every restart.
inline CgResult masked_cg(const MaskedSystem& sys, const Field2D& rhs, Field2D x, double target, int max_iterations) {
    CgResult res;
    sys.project(x);
    for (int restart = 0; restart < 8; ++restart) {
        Field2D r = sys.apply(x);
        for (std::size_t k = 0; k < r.size(); ++k) r[k] = rhs[k] - r[k];
        sys.project(r);
        res.residual = sys.sup_on_unknowns(r);
        if (res.residual <= target) break;
        Field2D p = r;
        double rr = seq_dot(r, r);
        while (res.iterations < max_iterations) {
            const Field2D ap = sys.apply(p);
            const double pap = seq_dot(p, ap);
            if (!(pap > 0.0)) break;
            const double alpha = rr / pap;
            for (std::size_t k = 0; k < x.size(); ++k) {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            ++res.iterations;
            if (sys.sup_on_unknowns(r) <= 0.5 * target) break;
            const double rr_new = seq_dot(r, r);
            const double beta = rr_new / rr;
            rr = rr_new;
            for (std::size_t k = 0; k < p.size(); ++k) p[k] = r[k] + beta * p[k];
        }
        if (res.iterations >= max_iterations) break;
    }
    Field2D r = sys.apply(x);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = rhs[k] - r[k];
    res.residual = sys.sup_on_unknowns(r);
    res.x = std::move(x);
    return res;
}

/// Unknown values plus frame: the full box field phi.
inline Field2D assemble(const MaskedSystem& sys, const Field2D& x, const Field2D& frame) {
    Field2D out = frame;
    for (std::size_t k = 0; k < out.size(); ++k)
        if (sys.unknown(k)) out[k] = x[k];
    return out;
}

}  // namespace detail

/// Solves J*phi = phi on B_n minus the hole, phi = V_-/2 outside B_n and
/// phi = 0 on the hole, for each ladder radius n. See the README for the
/// solver and the verification pass.
inline StationaryProfile solve_stationary(const Grid2D& grid, const HoleShape& hole, const DiscreteKernel& kernel,
                                          const StationaryOptions& opt = {}) {
    if (!(opt.tol > 0.0)) throw InvalidArgument("stationary tolerance must be positive");
    const DomainMask mask = build_domain(grid, hole);
    const double L = grid.half_width;
    std::vector<double> ladder = opt.ladder;
    if (ladder.empty()) ladder = {L / 4.0, L / 2.0, 5.0 * L / 8.0, 3.0 * L / 4.0};
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (!(ladder[i] > ladder[i - 1])) throw InvalidArgument("ladder radii must increase");

    StationaryProfile prof;
    prof.tol = opt.tol;
    prof.bounding_radius = mask.bounding_radius();
    prof.kernel_radius = kernel.radius();
    prof.sub = build_subsolution(grid, hole, kernel);
    const double r0 = opt.r0 > 0.0 ? opt.r0 : kernel.radius() / 5.0;
    prof.super = build_supersolution(grid, hole, kernel, r0, std::nullopt, &prof.sub);

    const Barrier& sub = prof.sub;
    const Barrier& sup = prof.super;
    auto half_sub = [&sub](double x, double y) { return 0.5 * sub.value(x, y); };

    Field2D phi_prev;
    double prev_radius = 0.0;
    const double target = opt.residual_factor * opt.tol;

    for (double n : ladder) {
        const detail::MaskedSystem sys(grid, mask, kernel, n);
        const Field2D frame = sys.frame(half_sub);
        const Field2D rhs = sys.pj(frame);
        Field2D x0 = Field2D::sample(sys.box(), half_sub);
        const detail::CgResult cg = detail::masked_cg(sys, rhs, std::move(x0), target, opt.max_iterations);
        if (!(cg.residual <= opt.tol)) {
            std::ostringstream os;
            os << "stationary solve at radius " << n << " stopped with residual " << cg.residual << " > tol "
               << opt.tol;
            throw ConvergenceFailure(os.str());
        }

        // Full-grid field: V_-/2 outside B_n, zero on the hole.
        Field2D phi = Field2D::sample(grid, half_sub);
        mask.apply(phi);
        const int off = sys.margin();
        for (int iy = 0; iy < sys.box().n; ++iy)
            for (int ix = 0; ix < sys.box().n; ++ix) {
                const std::size_t k = static_cast<std::size_t>(iy) * sys.box().n + ix;
                if (sys.unknown(k)) phi(ix + off, iy + off) = cg.x[k];
            }

        LadderRung rung;
        rung.radius = n;
        rung.iterations = cg.iterations;
        rung.residual = cg.residual;
        double gmin = INFINITY, gmax = -INFINITY;
        for (int iy = 0; iy < grid.n; ++iy)
            for (int ix = 0; ix < grid.n; ++ix) {
                if (mask.in_hole(ix, iy)) continue;
                const double x = grid.coord(ix), y = grid.coord(iy);
                const double r = std::hypot(x, y);
                if (r >= n) continue;
                const double v = phi(ix, iy);
                rung.sandwich_violation = std::max(
                    {rung.sandwich_violation, half_sub(x, y) - v, v - sup.value(x, y) - sup.gamma});
                if (r < prev_radius)
                    rung.ladder_violation = std::max(rung.ladder_violation, phi_prev(ix, iy) - v);
                if (r >= L / 3.0 && r <= L / 2.0) {
                    gmin = std::min(gmin, v - std::log(r));
                    gmax = std::max(gmax, v - std::log(r));
                }
            }
        if (n >= L / 2.0 && gmax >= gmin) rung.growth_defect = gmax - gmin;
        prof.ladder.push_back(rung);

        phi_prev = phi;
        prev_radius = n;

        if (n == ladder.back()) {
            // Monotone fixed-point pass from V_-/2 on the final rung.
            Field2D it = Field2D::sample(sys.box(), half_sub);
            sys.project(it);
            Field2D last = it;
            const double allowance = 1e-12 * std::max(1.0, sup_abs(phi));
            double mono = 0.0, over = 0.0;
            for (int m = 1; m <= opt.verify_iterations; ++m) {
                Field2D full = detail::assemble(sys, it, frame);
                it = sys.pj(full);
                if (m % opt.verify_every == 0) {
                    for (std::size_t k = 0; k < it.size(); ++k) {
                        if (!sys.unknown(k)) continue;
                        mono = std::max(mono, last[k] - it[k]);
                        over = std::max(over, it[k] - cg.x[k]);
                    }
                    if (mono > allowance) {
                        std::ostringstream os;
                        os << "fixed-point iteration from V_-/2 decreased by " << mono << " at iteration " << m;
                        throw ConvergenceFailure(os.str());
                    }
                    last = it;
                }
            }
            prof.verify_iterations = opt.verify_iterations;
            prof.monotone_violation = mono;
            prof.overshoot = over;
        }
    }

    prof.phi = std::move(phi_prev);
    prof.radius = ladder.back();
    prof.residual = prof.ladder.back().residual;
    prof.growth_defect = prof.ladder.back().growth_defect;
    double dev = 0.0;
    for (int iy = 0; iy < grid.n; ++iy)
        for (int ix = 0; ix < grid.n; ++ix) {
            if (mask.in_hole(ix, iy)) continue;
            const double r = std::hypot(grid.coord(ix), grid.coord(iy));
            dev = std::max(dev, std::abs(prof.phi(ix, iy) - std::log(r)));
        }
    prof.log_deviation = dev;
    return prof;
}

/// sup-norm of the masked iteration limits with zero frame data, from the
/// zero field and from `random_starts` bounded random fields.
inline double uniqueness_probe(const Grid2D& grid, const HoleShape& hole, const DiscreteKernel& kernel,
                               double radius = -1.0, double tol = 1e-8, int random_starts = 3) {
    const DomainMask mask = build_domain(grid, hole);
    if (radius <= 0.0) radius = 0.75 * grid.half_width;
    const detail::MaskedSystem sys(grid, mask, kernel, radius);
    const Field2D rhs(sys.box());
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int s = 0; s <= random_starts; ++s) {
        Field2D x0(sys.box());
        if (s > 0)
            for (double& v : x0.values()) v = unit(rng);
        const detail::CgResult cg = detail::masked_cg(sys, rhs, std::move(x0), 1e-3 * tol, 50000);
        worst = std::max(worst, sys.sup_on_unknowns(cg.x));
    }
    return worst;
}

/// With frame data 1 on B_{n+d} minus B_n, the solution evaluated on the
/// compact set {|x| <= 2R}; one value per radius.
inline std::vector<double> bounded_frame_probe(const Grid2D& grid, const HoleShape& hole, const DiscreteKernel& kernel,
                                               const std::vector<double>& radii, double tol = 1e-8) {
    const DomainMask mask = build_domain(grid, hole);
    const double compact = 2.0 * mask.bounding_radius();
    std::vector<double> out;
    for (double n : radii) {
        const detail::MaskedSystem sys(grid, mask, kernel, n);
        const Field2D frame = sys.frame([](double, double) { return 1.0; });
        const Field2D rhs = sys.pj(frame);
        const detail::CgResult cg = detail::masked_cg(sys, rhs, Field2D(sys.box()), 1e-3 * tol, 50000);
        double m = 0.0;
        for (int iy = 0; iy < sys.box().n; ++iy)
            for (int ix = 0; ix < sys.box().n; ++ix) {
                const std::size_t k = static_cast<std::size_t>(iy) * sys.box().n + ix;
                if (sys.unknown(k) && std::hypot(sys.box().coord(ix), sys.box().coord(iy)) <= compact)
                    m = std::max(m, std::abs(cg.x[k]));
            }
        out.push_back(m);
    }
    return out;
}

struct GradientReport {
    double C = 0.0;        // sup |x| |grad_h phi|
    double C_prime = 0.0;  // sup |x| |phi(y) - phi(x)| over kernel neighbours
    double r_min = 0.0;
    double r_max = 0.0;
    std::size_t cells = 0;
};

/// Gradient bound over 2R <= |x| <= n - 2d, where n is the final ladder
/// radius (the frame kink sits at |x| = n).
inline GradientReport gradient_bound_report(const StationaryProfile& prof, const HoleShape& hole,
                                            const DiscreteKernel& kernel) {
    const Field2D& phi = prof.phi;
    const Grid2D& grid = phi.grid();
    const DomainMask mask = build_domain(grid, hole);
    const double h = grid.h();
    const int n = grid.n;
    GradientReport rep;
    rep.r_min = 2.0 * prof.bounding_radius;
    rep.r_max = prof.radius - 2.0 * kernel.radius();

    auto derivative = [&](int ix, int iy, int sx, int sy) {
        const bool plus = ix + sx >= 0 && ix + sx < n && iy + sy >= 0 && iy + sy < n && !mask.in_hole(ix + sx, iy + sy);
        const bool minus = ix - sx >= 0 && ix - sx < n && iy - sy >= 0 && iy - sy < n && !mask.in_hole(ix - sx, iy - sy);
        const double f0 = phi(ix, iy);
        if (plus && minus) return (phi(ix + sx, iy + sy) - phi(ix - sx, iy - sy)) / (2.0 * h);
        if (plus) return (-3.0 * f0 + 4.0 * phi(ix + sx, iy + sy) - phi(ix + 2 * sx, iy + 2 * sy)) / (2.0 * h);
        return (3.0 * f0 - 4.0 * phi(ix - sx, iy - sy) + phi(ix - 2 * sx, iy - 2 * sy)) / (2.0 * h);
    };

    const int reach = kernel.reach();
    for (int iy = 2; iy < n - 2; ++iy)
        for (int ix = 2; ix < n - 2; ++ix) {
            if (mask.in_hole(ix, iy)) continue;
            const double x = grid.coord(ix), y = grid.coord(iy);
            const double r = std::hypot(x, y);
            if (r < rep.r_min || r > rep.r_max) continue;
            ++rep.cells;
            const double gx = derivative(ix, iy, 1, 0), gy = derivative(ix, iy, 0, 1);
            rep.C = std::max(rep.C, r * std::hypot(gx, gy));
            const double f0 = phi(ix, iy);
            for (int dy = -reach; dy <= reach; ++dy)
                for (int dx = -reach; dx <= reach; ++dx) {
                    if (kernel.weight(dx, dy) == 0.0) continue;
                    const int jx = ix - dx, jy = iy - dy;
                    if (jx < 0 || jy < 0 || jx >= n || jy >= n) continue;
                    rep.C_prime = std::max(rep.C_prime, r * std::abs(phi(jx, jy) - f0));
                }
        }
    return rep;
}

struct EvolutionCheckOptions {
    double T0 = 16.0;
    double b0 = 1.0;
    int b_doublings = 20;
    double t_max = -1.0;  // negative: (L - 2d)^2 / (2a)
};

struct EvolutionCheckReport {
    bool found = false;
    double a = 0.0;
    double gamma = 0.0;
    double b = 0.0;
    double T = 0.0;
    double min_ratio = -INFINITY;  // over the band at sample times >= T, for the found (b, T)
    double worst_x = 0.0, worst_y = 0.0, worst_t = 0.0;
    std::vector<double> times;
    std::vector<double> b_values;
    /// min_ratio_table[i][m]: band minimum at times[i] with b_values[m].
    std::vector<std::vector<double>> min_ratio_table;
};

/// Checks dV/dt - LV >= (1/10)(q/a - 1) Gamma_a (V_+ + b) / (t log^gamma t) for
/// V = Gamma_a (V_+ + b) / log^gamma t on 4 r0^2 <= |x|^2 <= 2 a t, at sample
/// times T 2^m, searching T and b by doubling.
inline EvolutionCheckReport evolution_supersolution_check(const Barrier& super, const DiscreteKernel& kernel,
                                                          const Grid2D& grid, double a, double gamma,
                                                          const EvolutionCheckOptions& opt = {}) {
    const double q = kernel.q();
    if (!(a > 0.0 && a < q)) throw InvalidArgument("evolutionary super-solution requires 0 < a < q");
    if (!(gamma >= 2.0)) throw InvalidArgument("evolutionary super-solution requires gamma >= 2");
    if (super.kind != BarrierKind::super) throw InvalidArgument("evolutionary check needs the log super-solution");

    EvolutionCheckReport rep;
    rep.a = a;
    rep.gamma = gamma;
    const double L = grid.half_width;
    const double d = kernel.radius();
    const double t_max = opt.t_max > 0.0 ? opt.t_max : (L - 2.0 * d) * (L - 2.0 * d) / (2.0 * a);
    for (double t = opt.T0; t <= t_max; t *= 2.0) rep.times.push_back(t);
    if (rep.times.empty()) throw InvalidArgument("no sample time fits in the grid");
    for (int m = 0; m <= opt.b_doublings; ++m) rep.b_values.push_back(opt.b0 * std::ldexp(1.0, m));

    const int reach = kernel.reach();
    const Grid2D big = grid.grown(reach);
    const Field2D vplus = Field2D::sample(big, [&super](double x, double y) { return super.value(x, y); });
    const double band_lo = 4.0 * super.r0 * super.r0;
    const double factor = 0.1 * (q / a - 1.0);

    struct Worst {
        double x, y;
    };
    std::vector<std::vector<Worst>> worst(rep.times.size(), std::vector<Worst>(rep.b_values.size()));
    rep.min_ratio_table.assign(rep.times.size(), std::vector<double>(rep.b_values.size(), INFINITY));

    for (std::size_t it = 0; it < rep.times.size(); ++it) {
        const double t = rep.times[it];
        const double lt = std::log(t);
        const GaussianProfile G{a};
        const Field2D gam = Field2D::sample(big, [&](double x, double y) { return G(x, y, t); });
        const double band_hi = 2.0 * a * t;
        for (int iy = 0; iy < grid.n; ++iy) {
            const double y = grid.coord(iy);
            for (int ix = 0; ix < grid.n; ++ix) {
                const double x = grid.coord(ix);
                const double r2 = x * x + y * y;
                if (r2 < band_lo || r2 > band_hi) continue;
                const int bx = ix + reach, by = iy + reach;
                double A = 0.0, B = 0.0;
                for (int dy = -reach; dy <= reach; ++dy)
                    for (int dx = -reach; dx <= reach; ++dx) {
                        const double w = kernel.weight(dx, dy);
                        if (w == 0.0) continue;
                        const double g = gam(bx - dx, by - dy);
                        A += w * g * vplus(bx - dx, by - dy);
                        B += w * g;
                    }
                const double g0 = gam(bx, by);
                const double v0 = vplus(bx, by);
                for (std::size_t m = 0; m < rep.b_values.size(); ++m) {
                    const double b = rep.b_values[m];
                    const double P = v0 + b;
                    double ratio;
                    if (!(P > 0.0)) {
                        ratio = -INFINITY;
                    } else {
                        // Both sides multiplied by t log^gamma t.
                        const double lhs = P * g0 * (r2 / (4.0 * a * t) - 1.0 - gamma / lt) - t * (A + b * B - g0 * P);
                        ratio = lhs / (factor * g0 * P);
                    }
                    if (ratio < rep.min_ratio_table[it][m]) {
                        rep.min_ratio_table[it][m] = ratio;
                        worst[it][m] = {x, y};
                    }
                }
            }
        }
    }

    for (std::size_t i0 = 0; i0 < rep.times.size() && !rep.found; ++i0) {
        for (std::size_t m = 0; m < rep.b_values.size(); ++m) {
            double mn = INFINITY;
            std::size_t at = i0;
            for (std::size_t i = i0; i < rep.times.size(); ++i)
                if (rep.min_ratio_table[i][m] < mn) {
                    mn = rep.min_ratio_table[i][m];
                    at = i;
                }
            if (mn >= 1.0) {
                rep.found = true;
                rep.T = rep.times[i0];
                rep.b = rep.b_values[m];
                rep.min_ratio = mn;
                rep.worst_t = rep.times[at];
                rep.worst_x = worst[at][m].x;
                rep.worst_y = worst[at][m].y;
                break;
            }
        }
    }
    if (!rep.found) {
        // Report the best attempt: largest b, all times.
        const std::size_t m = rep.b_values.size() - 1;
        rep.min_ratio = INFINITY;
        for (std::size_t i = 0; i < rep.times.size(); ++i)
            if (rep.min_ratio_table[i][m] < rep.min_ratio) {
                rep.min_ratio = rep.min_ratio_table[i][m];
                rep.worst_t = rep.times[i];
                rep.worst_x = worst[i][m].x;
                rep.worst_y = worst[i][m].y;
            }
        rep.b = rep.b_values[m];
        rep.T = rep.times.front();
    }
    return rep;
}

}  // namespace nldiff
