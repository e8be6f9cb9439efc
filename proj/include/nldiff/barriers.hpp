#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nldiff/convolution.hpp"
#include "nldiff/domain.hpp"
#include "nldiff/error.hpp"
#include "nldiff/grid.hpp"
#include "nldiff/kernel.hpp"

namespace nldiff {

enum class BarrierKind { sub, super, log_power };

inline const char* barrier_kind_name(BarrierKind k) {
    switch (k) {
        case BarrierKind::sub: return "sub";
        case BarrierKind::super: return "super";
        case BarrierKind::log_power: return "log-power";
    }
    return "?";
}

/// Sub-solution log(|x|^2 + k0) - R0, super-solution built from
/// log(|x| - r0), or log-power super-solution built from (log|x|)^nu.
///
/// The two super kinds share one layout: the closed profile g on |x| >= D,
/// constants a[j-1] on the annulus Gamma_j = {D - j w <= |x| < D - (j-1) w}
/// for j = 1..k (w = d/2), and a[k] on B_{2 r0}. The super field excludes
/// the shift gamma; the log-power field includes it.
struct Barrier {
    BarrierKind kind = BarrierKind::sub;
    Field2D field;

    double k0 = 0.0;
    double R0 = 0.0;

    double r0 = 0.0;
    double D = 0.0;
    double width = 0.0;
    int k = 0;
    std::vector<double> a;  // a_1 .. a_{k+1}
    double c0 = 0.0;
    double kappa = 0.0;
    double gamma0 = 0.0;
    double gamma = 0.0;
    double nu = 0.0;

    /// 0: |x| >= D, 1..k: annulus, k+1: inner disk.
    int region(double r) const {
        if (r >= D) return 0;
        if (r < 2.0 * r0) return k + 1;
        const int j = static_cast<int>(std::ceil((D - r) / width - 1e-12));
        return std::clamp(j, 1, k);
    }

    double profile(double r) const {
        if (kind == BarrierKind::super) return std::log(r - r0);
        return std::pow(std::log(r), nu) + gamma;
    }

    double value(double x, double y) const {
        const double r = std::hypot(x, y);
        if (kind == BarrierKind::sub) return std::log(x * x + y * y + k0) - R0;
        const int j = region(r);
        if (j == 0) return profile(r);
        return kind == BarrierKind::log_power ? a[static_cast<std::size_t>(j - 1)] + gamma
                                              : a[static_cast<std::size_t>(j - 1)];
    }

    /// Structured one-line parameter record.
    std::string describe() const {
        std::ostringstream os;
        os.precision(10);
        os << "kind=" << barrier_kind_name(kind);
        if (kind == BarrierKind::sub) {
            os << " k0=" << k0 << " R0=" << R0;
        } else {
            os << " r0=" << r0 << " D=" << D << " k=" << k << " c0=" << c0 << " kappa=" << kappa
               << " gamma0=" << gamma0 << " gamma=" << gamma;
            if (kind == BarrierKind::log_power) os << " nu=" << nu;
            os << " a=[";
            for (std::size_t i = 0; i < a.size(); ++i) os << (i ? "," : "") << a[i];
            os << "]";
        }
        return os.str();
    }
};

/// -L V on `grid` for a closed-form V.
template <class V>
Field2D minus_L_closed_form(V&& v, const Grid2D& grid, const DiscreteKernel& kernel) {
    Field2D lv = apply_L_closed_form(v, grid, kernel);
    for (double& x : lv.values()) x = -x;
    return lv;
}

namespace detail {

inline double sub_scale(const Grid2D& grid, double k0, double R0) {
    double m = 0.0;
    for (int iy = 0; iy < grid.n; ++iy)
        for (int ix = 0; ix < grid.n; ++ix) {
            const double x = grid.coord(ix), y = grid.coord(iy);
            m = std::max(m, std::abs(std::log(x * x + y * y + k0) - R0));
        }
    return m;
}

inline double hole_R0(const Grid2D& grid, const DomainMask& mask, double k0) {
    double R0 = -INFINITY;
    for (int iy = 0; iy < grid.n; ++iy)
        for (int ix = 0; ix < grid.n; ++ix)
            if (mask.in_hole(ix, iy)) {
                const double x = grid.coord(ix), y = grid.coord(iy);
                R0 = std::max(R0, std::log(x * x + y * y + k0));
            }
    return R0;
}

/// max over all cells of -L log(|x|^2 + k0), relative to sup |V_-|.
inline double sub_defect(const Grid2D& grid, const DomainMask& mask, const DiscreteKernel& kernel, double k0) {
    const Field2D m = minus_L_closed_form([k0](double x, double y) { return std::log(x * x + y * y + k0); }, grid,
                                          kernel);
    return max_value(m) / sub_scale(grid, k0, hole_R0(grid, mask, k0));
}

}  // namespace detail

struct SubsolutionOptions {
    double threshold = 1e-13;  // -L V_- <= threshold * sup |V_-|
    double k0_cap = 1e6;
    int refine_steps = 20;
};

inline Barrier build_subsolution(const Grid2D& grid, const HoleShape& hole, const DiscreteKernel& kernel,
                                 const SubsolutionOptions& opt = {}) {
    const DomainMask mask = build_domain(grid, hole);
    const double d = kernel.radius();

    double k0 = d * d / 64.0;
    double failed = 0.0;
    while (detail::sub_defect(grid, mask, kernel, k0) > opt.threshold) {
        failed = k0;
        k0 *= 2.0;
        if (k0 > opt.k0_cap) {
            std::ostringstream os;
            os << "sub-solution search exhausted k0 <= " << opt.k0_cap << " (kernel under-resolved?)";
            throw ConvergenceFailure(os.str());
        }
    }
    if (failed > 0.0) {
        double lo = failed, hi = k0;
        for (int i = 0; i < opt.refine_steps; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (detail::sub_defect(grid, mask, kernel, mid) > opt.threshold) lo = mid;
            else hi = mid;
        }
        k0 = hi;
    }

    Barrier b;
    b.kind = BarrierKind::sub;
    b.k0 = k0;
    b.R0 = detail::hole_R0(grid, mask, k0);
    b.field = Field2D::sample(grid, [&b](double x, double y) { return b.value(x, y); });
    return b;
}

namespace detail {

/// Stencil masses of each region as seen from (x, y), plus the far-field sum
/// of weight * profile over points with |y| >= D.
struct RegionMasses {
    std::vector<double> m;  // indexed by region 1..k+1
    double far = 0.0;
};

inline RegionMasses region_masses(const Barrier& b, const DiscreteKernel& kernel, double x, double y) {
    RegionMasses out;
    out.m.assign(static_cast<std::size_t>(b.k + 2), 0.0);
    const int r = kernel.reach();
    const double h = kernel.h();
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            const double w = kernel.weight(dx, dy);
            if (w == 0.0) continue;
            const double rr = std::hypot(x - dx * h, y - dy * h);
            const int j = b.region(rr);
            if (j == 0) out.far += w * b.profile(rr);
            else out.m[static_cast<std::size_t>(j)] += w;
        }
    return out;
}

/// Sets a_2 .. a_{k+1}. a_{j+1} is the largest value for which -L V >= c0 on
/// every cell of Gamma_j, counting regions up to j+1 only; the regions further
/// in carry negative constants and can only raise -L V.
inline void annular_induction(Barrier& b, const Grid2D& grid, const DiscreteKernel& kernel) {
    b.a.assign(static_cast<std::size_t>(b.k + 1), 0.0);
    for (int j = 1; j <= b.k; ++j) {
        double need = -INFINITY;
        bool any = false;
        for (int iy = 0; iy < grid.n; ++iy) {
            const double y = grid.coord(iy);
            for (int ix = 0; ix < grid.n; ++ix) {
                const double x = grid.coord(ix);
                if (b.region(std::hypot(x, y)) != j) continue;
                any = true;
                const RegionMasses rm = region_masses(b, kernel, x, y);
                const double m_next = rm.m[static_cast<std::size_t>(j + 1)];
                if (!(m_next > 0.0)) {
                    std::ostringstream os;
                    os << "annulus " << j + 1 << " invisible from cell (" << x << ", " << y
                       << "): annuli under-resolved";
                    throw ConvergenceFailure(os.str());
                }
                double s = rm.far;
                for (int i = 1; i <= j; ++i) s += b.a[static_cast<std::size_t>(i - 1)] * rm.m[static_cast<std::size_t>(i)];
                need = std::max(need, (b.c0 - b.a[static_cast<std::size_t>(j - 1)] + s) / m_next);
            }
        }
        if (!any) throw ConvergenceFailure("annulus " + std::to_string(j) + " contains no grid cells");
        b.a[static_cast<std::size_t>(j)] = -std::max(need, 0.0);
    }
}

}  // namespace detail

struct SupersolutionOptions {
    int max_k = 200;
};

/// Super-solution with -L V_+ >= kappa / |x|^3 on the exterior cells.
/// `gamma` defaults to gamma0, or to the shift needed for V_-/2 <= V_+ + gamma
/// on the grid when `sub` is given.
inline Barrier build_supersolution(const Grid2D& grid, const HoleShape& hole, const DiscreteKernel& kernel,
                                   double r0, std::optional<double> gamma = std::nullopt,
                                   const Barrier* sub = nullptr, const SupersolutionOptions& opt = {}) {
    const double d = kernel.radius();
    if (!(r0 > 0.0) || r0 >= d / 4.0) throw InvalidArgument("super-solution requires 0 < r0 < d/4");
    if (!hole.contains_origin_disk(2.0 * r0)) throw InvalidArgument("super-solution requires B_{2 r0} inside the hole");
    const DomainMask mask = build_domain(grid, hole);
    const double q = kernel.q();
    const double w = d / 2.0;
    const int reach = kernel.reach();

    Barrier b;
    b.kind = BarrierKind::super;
    b.r0 = r0;
    b.width = w;

    // Smallest k for which the log profile alone has the required defect on
    // every cell with |x| >= D.
    for (int k = 2;; ++k) {
        if (k > opt.max_k) throw ConvergenceFailure("super-solution: no admissible annulus count k");
        const double D = 2.0 * r0 + k * w;
        if (D - d - r0 < 1.0 || !(D - 2.0 * d > r0)) continue;
        const double floor_r = D - d;
        const Field2D m = minus_L_closed_form(
            [r0, floor_r](double x, double y) {
                const double r = std::hypot(x, y);
                return r >= floor_r ? std::log(r - r0) : 0.0;
            },
            grid, kernel);
        bool ok = true;
        for (int iy = 0; iy < grid.n && ok; ++iy)
            for (int ix = 0; ix < grid.n; ++ix) {
                const double r = std::hypot(grid.coord(ix), grid.coord(iy));
                if (r < D) continue;
                const double target = q * r0 * r / (2.0 * std::pow(r - r0, 4));
                if (!(m(ix, iy) >= target)) {
                    ok = false;
                    break;
                }
            }
        if (ok) {
            b.k = k;
            b.D = D;
            break;
        }
    }
    b.c0 = r0 * b.D / (2.0 * std::pow(b.D + d - r0, 4));
    detail::annular_induction(b, grid, kernel);
    b.gamma0 = std::abs(b.a.back());

    b.field = Field2D::sample(grid, [&b](double x, double y) { return b.value(x, y); });
    const Field2D m = minus_L_closed_form([&b](double x, double y) { return b.value(x, y); }, grid, kernel);
    double kappa = INFINITY;
    for (int iy = 0; iy < grid.n; ++iy)
        for (int ix = 0; ix < grid.n; ++ix) {
            if (mask.in_hole(ix, iy)) continue;
            const double r = std::hypot(grid.coord(ix), grid.coord(iy));
            kappa = std::min(kappa, r * r * r * m(ix, iy));
        }
    b.kappa = kappa;
    if (!(kappa > 0.0)) {
        std::ostringstream os;
        os << "super-solution defect not positive on the exterior: kappa = " << kappa;
        throw ConvergenceFailure(os.str());
    }

    if (gamma) {
        if (*gamma < b.gamma0) {
            std::ostringstream os;
            os << "gamma = " << *gamma << " is below gamma0 = " << b.gamma0;
            throw InvalidArgument(os.str());
        }
        b.gamma = *gamma;
    } else {
        b.gamma = b.gamma0;
        if (sub) {
            const Grid2D big = grid.grown(reach);
            for (int iy = 0; iy < big.n; ++iy)
                for (int ix = 0; ix < big.n; ++ix) {
                    const double x = big.coord(ix), y = big.coord(iy);
                    b.gamma = std::max(b.gamma, 0.5 * sub->value(x, y) - b.value(x, y));
                }
        }
    }
    return b;
}

/// Log-power super-solution equal to (log|x|)^nu + gamma on |x| >= D with
/// -L w >= kappa / (|x|^2 (log|x|)^{2-nu}) on the exterior cells.
inline Barrier build_log_power_supersolution(const Grid2D& grid, const HoleShape& hole, const DiscreteKernel& kernel,
                                             double nu, std::optional<double> gamma = std::nullopt,
                                             double r0 = -1.0, const SupersolutionOptions& opt = {}) {
    if (!(nu > 0.0 && nu < 1.0)) throw InvalidArgument("log-power exponent must satisfy 0 < nu < 1");
    const double d = kernel.radius();
    if (r0 < 0.0) r0 = d / 5.0;
    if (!(r0 > 0.0) || r0 >= d / 4.0) throw InvalidArgument("log-power barrier requires 0 < r0 < d/4");
    if (!hole.contains_origin_disk(2.0 * r0)) throw InvalidArgument("log-power barrier requires B_{2 r0} inside the hole");
    const DomainMask mask = build_domain(grid, hole);
    const double q = kernel.q();
    const double w = d / 2.0;

    Barrier b;
    b.kind = BarrierKind::log_power;
    b.r0 = r0;
    b.nu = nu;
    b.width = w;

    for (int k = 2;; ++k) {
        if (k > opt.max_k) throw ConvergenceFailure("log-power barrier: no admissible annulus count k");
        const double D = 2.0 * r0 + k * w;
        if (D - d < 1.0 || !(D - 2.0 * d > 1.0)) continue;
        const double floor_r = D - d;
        const Field2D m = minus_L_closed_form(
            [nu, floor_r](double x, double y) {
                const double r = std::hypot(x, y);
                return r >= floor_r ? std::pow(std::log(r), nu) : 0.0;
            },
            grid, kernel);
        bool ok = true;
        for (int iy = 0; iy < grid.n && ok; ++iy)
            for (int ix = 0; ix < grid.n; ++ix) {
                const double r = std::hypot(grid.coord(ix), grid.coord(iy));
                if (r < D) continue;
                const double target = 0.5 * q * nu * (1.0 - nu) / (r * r * std::pow(std::log(r), 2.0 - nu));
                if (!(m(ix, iy) >= target)) {
                    ok = false;
                    break;
                }
            }
        if (ok) {
            b.k = k;
            b.D = D;
            break;
        }
    }
    const double Dd = b.D + d;
    b.c0 = 0.5 * q * nu * (1.0 - nu) / (Dd * Dd * std::pow(std::log(Dd), 2.0 - nu));
    b.gamma = 0.0;  // L is shift invariant; induct on the unshifted profile
    detail::annular_induction(b, grid, kernel);
    b.gamma0 = std::abs(b.a.back());
    if (gamma && *gamma < b.gamma0) {
        std::ostringstream os;
        os << "gamma = " << *gamma << " is below gamma0 = " << b.gamma0;
        throw InvalidArgument(os.str());
    }
    b.gamma = gamma.value_or(b.gamma0);

    b.field = Field2D::sample(grid, [&b](double x, double y) { return b.value(x, y); });
    const Field2D m = minus_L_closed_form([&b](double x, double y) { return b.value(x, y); }, grid, kernel);
    double kappa = INFINITY;
    for (int iy = 0; iy < grid.n; ++iy)
        for (int ix = 0; ix < grid.n; ++ix) {
            if (mask.in_hole(ix, iy)) continue;
            const double r = std::hypot(grid.coord(ix), grid.coord(iy));
            kappa = std::min(kappa, r * r * std::pow(std::log(r), 2.0 - nu) * m(ix, iy));
        }
    b.kappa = kappa;
    if (!(kappa > 0.0)) {
        std::ostringstream os;
        os << "log-power defect not positive on the exterior: kappa = " << kappa;
        throw ConvergenceFailure(os.str());
    }
    return b;
}

}  // namespace nldiff
