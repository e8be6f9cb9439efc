#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nldiff/domain.hpp"
#include "nldiff/error.hpp"
#include "nldiff/evolution.hpp"
#include "nldiff/fundamental.hpp"
#include "nldiff/grid.hpp"
#include "nldiff/stationary.hpp"

namespace nldiff {

/// Neumaier-compensated running sum. All reductions below visit cells in
/// row-major order, so results are bit-reproducible.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) comp_ += (sum_ - t) + v;
        else comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// h^2 sum over cells of u * weight(x, y).
template <class W>
double weighted_integral(const Field2D& u, W&& weight) {
    const Grid2D& g = u.grid();
    CompensatedSum s;
    for (int iy = 0; iy < g.n; ++iy) {
        const double y = g.coord(iy);
        for (int ix = 0; ix < g.n; ++ix) {
            const double v = u(ix, iy);
            if (v != 0.0) s.add(v * weight(g.coord(ix), y));
        }
    }
    return s.value() * g.h() * g.h();
}

inline double mass(const Field2D& u) {
    return weighted_integral(u, [](double, double) { return 1.0; });
}

/// Cells with u == 0 are skipped, so the origin never enters.
inline double log_momentum(const Field2D& u) {
    return weighted_integral(u, [](double x, double y) { return 0.5 * std::log(x * x + y * y); });
}

inline double phi_momentum(const Field2D& u, const Field2D* phi) {
    if (!phi) throw InvalidArgument("phi_momentum needs the stationary profile");
    if (!(phi->grid() == u.grid())) throw PlanMismatch("phi and u live on different grids");
    const Grid2D& g = u.grid();
    CompensatedSum s;
    for (std::size_t k = 0; k < u.size(); ++k)
        if (u[k] != 0.0) s.add(u[k] * (*phi)[k]);
    return s.value() * g.h() * g.h();
}

inline double radial_momentum(const Field2D& u, int p) {
    if (p != 1 && p != 2) throw InvalidArgument("radial momentum order must be 1 or 2");
    if (p == 1) return weighted_integral(u, [](double x, double y) { return std::hypot(x, y); });
    return weighted_integral(u, [](double x, double y) { return x * x + y * y; });
}

template <class Pred>
double region_integral(const Field2D& u, Pred&& inside) {
    return weighted_integral(u, [&](double x, double y) { return inside(x, y) ? 1.0 : 0.0; });
}

/// t log t sup over delta sqrt(t) <= |x| of |u - 2 M* Gamma_q / log t|.
inline double outer_error(const Field2D& u, double t, double M_star, double q, double delta) {
    if (!(delta > 0.0)) throw InvalidArgument("outer_error requires delta > 0");
    if (!(t > std::numbers::e)) throw InvalidArgument("outer_error requires t > e");
    const Grid2D& g = u.grid();
    const double r_min = delta * std::sqrt(t);
    const double lt = std::log(t);
    const GaussianProfile G{q};
    double sup = -1.0;
    for (int iy = 0; iy < g.n; ++iy) {
        const double y = g.coord(iy);
        for (int ix = 0; ix < g.n; ++ix) {
            const double x = g.coord(ix);
            const double r2 = x * x + y * y;
            if (r2 < r_min * r_min) continue;
            sup = std::max(sup, std::abs(u(ix, iy) - 2.0 * M_star * G.value(r2, t) / lt));
        }
    }
    if (sup < 0.0) throw InvalidArgument("outer_error: the region |x| >= delta sqrt(t) misses the grid");
    return t * lt * sup;
}

/// t (log t)^2 sup over exterior cells with |x|^2 <= 2 a t of
/// |u - 4 M* phi W / (log t)^2| / log|x|; NaN while that region holds no
/// exterior cell.
inline double inner_error(const Field2D& u, double t, const Field2D& phi, const Field2D& W_t, double M_star, double a,
                          const DomainMask& mask) {
    if (!(t > std::numbers::e)) throw InvalidArgument("inner_error requires t > e");
    const Grid2D& g = u.grid();
    const double l2 = std::log(t) * std::log(t);
    double sup = 0.0;
    std::size_t count = 0;
    for (int iy = 0; iy < g.n; ++iy) {
        const double y = g.coord(iy);
        for (int ix = 0; ix < g.n; ++ix) {
            if (mask.in_hole(ix, iy)) continue;
            const double x = g.coord(ix);
            const double r2 = x * x + y * y;
            if (r2 > 2.0 * a * t) continue;
            const double cmp = 4.0 * M_star * phi(ix, iy) * W_t(ix, iy) / l2;
            ++count;
            sup = std::max(sup, std::abs(u(ix, iy) - cmp) / (0.5 * std::log(r2)));
        }
    }
    if (count == 0) return std::numeric_limits<double>::quiet_NaN();
    return t * l2 * sup;
}

/// Average of t log t u over the two-cell ring ||x|^2 - t h_t| <= 2 h sqrt(t h_t).
inline double intermediate_scale_probe(const Field2D& u, double t, double h_t, double bounding_radius) {
    const double s = t * h_t;
    if (!(s >= 4.0 * bounding_radius * bounding_radius))
        throw InvalidArgument("intermediate probe requires t h(t) >= (2R)^2");
    const Grid2D& g = u.grid();
    const double band = 2.0 * g.h() * std::sqrt(s);
    CompensatedSum sum;
    std::size_t count = 0;
    for (int iy = 0; iy < g.n; ++iy) {
        const double y = g.coord(iy);
        for (int ix = 0; ix < g.n; ++ix) {
            const double x = g.coord(ix);
            if (std::abs(x * x + y * y - s) <= band) {
                sum.add(u(ix, iy));
                ++count;
            }
        }
    }
    if (count == 0) throw InvalidArgument("intermediate probe ring lies outside the grid");
    return t * std::log(t) * sum.value() / static_cast<double>(count);
}

/// h(t) = t^{-alpha}.
inline double power_scale(double t, double alpha) { return std::pow(t, -alpha); }
/// h(t) = (log t)^{-gamma}.
inline double log_scale(double t, double gamma) { return std::pow(std::log(t), -gamma); }

enum class RateModel { inv_log, inv_t_log, const_plus_inv_log };

struct RateFit {
    std::vector<double> coefficients;
    double residual = 0.0;  // ||v - fit|| / ||v||
};

inline RateFit fit_log_rate(const std::vector<double>& times, const std::vector<double>& values, RateModel model) {
    if (times.size() != values.size()) throw InvalidArgument("fit_log_rate: size mismatch");
    if (times.size() < 8) throw InvalidArgument("fit_log_rate needs at least 8 samples");
    if (!(times.front() > 1.0) || std::log10(times.back() / times.front()) < 1.5)
        throw InvalidArgument("fit_log_rate needs samples spanning at least 1.5 decades with t > 1");
    const std::size_t n = times.size();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lt = std::log(times[i]);
        x[i] = model == RateModel::inv_t_log ? 1.0 / (times[i] * lt) : 1.0 / lt;
    }
    RateFit fit;
    std::vector<double> pred(n);
    if (model == RateModel::const_plus_inv_log) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sx += x[i];
            sy += values[i];
            sxx += x[i] * x[i];
            sxy += x[i] * values[i];
        }
        const double det = n * sxx - sx * sx;
        if (!(std::abs(det) > 1e-300)) throw InvalidArgument("fit_log_rate: degenerate design matrix");
        const double c1 = (n * sxy - sx * sy) / det;
        const double c0 = (sy - c1 * sx) / n;
        fit.coefficients = {c0, c1};
        for (std::size_t i = 0; i < n; ++i) pred[i] = c0 + c1 * x[i];
    } else {
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sxx += x[i] * x[i];
            sxy += x[i] * values[i];
        }
        if (!(sxx > 0.0)) throw InvalidArgument("fit_log_rate: degenerate design matrix");
        const double c = sxy / sxx;
        fit.coefficients = {c};
        for (std::size_t i = 0; i < n; ++i) pred[i] = c * x[i];
    }
    double num = 0, den = 0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (values[i] - pred[i]) * (values[i] - pred[i]);
        den += values[i] * values[i];
    }
    fit.residual = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    return fit;
}

// ---------------------------------------------------------------- series

struct DiagnosticRecord {
    double t = 0.0;
    double M = 0.0;
    double M_log = 0.0;
    double M_phi = 0.0;
    double M1 = 0.0;
    double M2 = 0.0;
    double sup_u = 0.0;
    double outer_err_d50 = std::numeric_limits<double>::quiet_NaN();
    double inner_err = std::numeric_limits<double>::quiet_NaN();
    double probe_alpha0 = std::numeric_limits<double>::quiet_NaN();
    double probe_alpha50 = std::numeric_limits<double>::quiet_NaN();
    double edge_mass = 0.0;
    std::vector<double> pointwise;  // t (log t)^2 u(x*) at the probe cells

    bool operator==(const DiagnosticRecord&) const = default;
};

inline constexpr const char* kCsvHeader =
    "t,M,M_log,M_phi,M1,M2,sup_u,outer_err_d50,inner_err,probe_alpha0,probe_alpha50,edge_mass";

struct DiagnosticSeries {
    std::vector<DiagnosticRecord> records;

    void push(DiagnosticRecord r) {
        if (!records.empty() && !(r.t > records.back().t))
            throw InvalidArgument("diagnostic times must be strictly increasing");
        records.push_back(std::move(r));
    }

    std::vector<double> column(double DiagnosticRecord::*field) const {
        std::vector<double> out;
        for (const auto& r : records) out.push_back(r.*field);
        return out;
    }

    /// Records with lo <= t <= hi.
    DiagnosticSeries window(double lo, double hi) const {
        DiagnosticSeries s;
        for (const auto& r : records)
            if (r.t >= lo * (1.0 - 1e-12) && r.t <= hi * (1.0 + 1e-12)) s.records.push_back(r);
        return s;
    }

    void write_csv(std::ostream& os) const {
        os << kCsvHeader << '\n';
        char buf[64];
        for (const auto& r : records) {
            const double cols[] = {r.t,     r.M,     r.M_log,         r.M_phi,     r.M1,           r.M2,
                                   r.sup_u, r.outer_err_d50, r.inner_err, r.probe_alpha0, r.probe_alpha50, r.edge_mass};
            for (std::size_t i = 0; i < std::size(cols); ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", cols[i]);
                os << (i ? "," : "") << buf;
            }
            os << '\n';
        }
    }

    static DiagnosticSeries read_csv(std::istream& is) {
        DiagnosticSeries s;
        std::string line;
        if (!std::getline(is, line) || line != kCsvHeader) throw InvalidArgument("diagnostics CSV header mismatch");
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::vector<double> v;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
            if (v.size() != 12) throw InvalidArgument("diagnostics CSV row has " + std::to_string(v.size()) + " cells");
            DiagnosticRecord r;
            r.t = v[0]; r.M = v[1]; r.M_log = v[2]; r.M_phi = v[3]; r.M1 = v[4]; r.M2 = v[5];
            r.sup_u = v[6]; r.outer_err_d50 = v[7]; r.inner_err = v[8]; r.probe_alpha0 = v[9];
            r.probe_alpha50 = v[10]; r.edge_mass = v[11];
            s.push(r);
        }
        return s;
    }
};

// ---------------------------------------------------------------- trends

/// Every consecutive pair strictly decreasing.
inline bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return v.size() >= 2;
}

/// Least-squares slope of log(value) against log(log t).
inline double loglog_slope(const std::vector<double>& t, const std::vector<double>& v) {
    const std::size_t n = t.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log(std::log(t[i])), y = std::log(std::abs(v[i]));
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    const double det = n * sxx - sx * sx;
    return det > 0.0 ? (n * sxy - sx * sy) / det : std::numeric_limits<double>::quiet_NaN();
}

/// "Bounded (no growth)" over a window: the slope of log value against
/// log log t stays below 0.5, midway between a bounded quantity (slope 0)
/// and one that is off by a whole factor of log t (slope 1).
inline constexpr double kBoundedSlopeCap = 0.5;

inline bool bounded_trend(const std::vector<double>& t, const std::vector<double>& v) {
    if (t.size() < 3) return false;
    for (double x : v)
        if (!std::isfinite(x) || x == 0.0) return false;
    return loglog_slope(t, v) < kBoundedSlopeCap;
}

struct TrendColumn {
    std::string name;
    std::vector<double> t;
    std::vector<double> v;
    bool ok = false;
};

struct RescaledMassReport {
    std::vector<double> t, log_t_mass, two_m_log, gap;
    double M_star = 0.0;
    bool gap_decreasing = false;       // |log t M - 2 M_log| over the window
    bool mass_toward_limit = false;    // |log t M - 2 M*| decreasing
    bool m_log_toward_limit = false;   // |2 M_log - 2 M*| decreasing
    bool log_t_mass_bounded = false;
    double C0 = 0.0;                   // C/log t fit of M when the series allows
};

inline RescaledMassReport rescaled_mass_limit(const DiagnosticSeries& series, double M_star, double t_lo, double t_hi) {
    RescaledMassReport rep;
    rep.M_star = M_star;
    std::vector<double> a, b;
    for (const auto& r : series.window(t_lo, t_hi).records) {
        const double lt = std::log(r.t);
        rep.t.push_back(r.t);
        rep.log_t_mass.push_back(lt * r.M);
        rep.two_m_log.push_back(2.0 * r.M_log);
        rep.gap.push_back(std::abs(lt * r.M - 2.0 * r.M_log));
        a.push_back(std::abs(lt * r.M - 2.0 * M_star));
        b.push_back(std::abs(2.0 * r.M_log - 2.0 * M_star));
    }
    rep.gap_decreasing = strictly_decreasing(rep.gap);
    rep.mass_toward_limit = strictly_decreasing(a);
    rep.m_log_toward_limit = strictly_decreasing(b);
    rep.log_t_mass_bounded = bounded_trend(rep.t, rep.log_t_mass);
    std::vector<double> ts, ms;
    for (const auto& r : series.records)
        if (r.t > std::numbers::e) {
            ts.push_back(r.t);
            ms.push_back(r.M);
        }
    if (ts.size() >= 8 && std::log10(ts.back() / ts.front()) >= 1.5)
        rep.C0 = fit_log_rate(ts, ms, RateModel::inv_log).coefficients[0];
    return rep;
}

struct MomentaReport {
    std::vector<double> t, m2_scaled, m1_scaled, sup_scaled;
    bool m2_bounded = false;
    bool m1_bounded = false;
    bool sup_bounded = false;
};

inline MomentaReport momenta_growth_report(const DiagnosticSeries& series, double t_lo, double t_hi) {
    MomentaReport rep;
    for (const auto& r : series.window(t_lo, t_hi).records) {
        const double lt = std::log(r.t);
        rep.t.push_back(r.t);
        rep.m2_scaled.push_back(r.M2 * lt / r.t);
        rep.m1_scaled.push_back(r.M1 * lt / std::sqrt(r.t));
        rep.sup_scaled.push_back(r.sup_u * r.t * lt);
    }
    rep.m2_bounded = bounded_trend(rep.t, rep.m2_scaled);
    rep.m1_bounded = bounded_trend(rep.t, rep.m1_scaled);
    rep.sup_bounded = bounded_trend(rep.t, rep.sup_scaled);
    return rep;
}

// ---------------------------------------------------------------- observer

/// Everything needed to turn a state into a DiagnosticRecord.
struct DiagnosticsContext {
    const Field2D* phi = nullptr;
    const DomainMask* mask = nullptr;
    const DiscreteKernel* kernel = nullptr;
    double M_star = 0.0;
    double a = 0.0;  // inner-error diffusivity; q/2 by default
    double delta = 0.5;
    double bounding_radius = 2.0;
    int edge_strip = 0;
    std::vector<std::pair<int, int>> probe_cells;
};

inline DiagnosticRecord observe(const Field2D& u, double t, const DiagnosticsContext& ctx) {
    DiagnosticRecord r;
    r.t = t;
    r.M = mass(u);
    r.M_log = log_momentum(u);
    r.M_phi = phi_momentum(u, ctx.phi);
    r.M1 = radial_momentum(u, 1);
    r.M2 = radial_momentum(u, 2);
    r.sup_u = sup_abs(u);
    r.edge_mass = edge_strip_mass(u, ctx.edge_strip);
    const double q = ctx.kernel->q();
    if (t > std::numbers::e) {
        r.outer_err_d50 = outer_error(u, t, ctx.M_star, q, ctx.delta);
        const RegularPart W = regular_part(*ctx.kernel, t, u.grid());
        r.inner_err = inner_error(u, t, *ctx.phi, W.cells, ctx.M_star, ctx.a, *ctx.mask);
        const double R = ctx.bounding_radius;
        const double h0 = log_scale(t, 1.0), h50 = power_scale(t, 0.5);
        if (t * h0 >= 4.0 * R * R) r.probe_alpha0 = intermediate_scale_probe(u, t, h0, R);
        if (t * h50 >= 4.0 * R * R) r.probe_alpha50 = intermediate_scale_probe(u, t, h50, R);
        const double l2 = std::log(t) * std::log(t);
        for (auto [ix, iy] : ctx.probe_cells) r.pointwise.push_back(t * l2 * u(ix, iy));
    }
    return r;
}

}  // namespace nldiff
