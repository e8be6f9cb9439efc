#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "nldiff/convolution.hpp"
#include "nldiff/error.hpp"
#include "nldiff/fft.hpp"
#include "nldiff/grid.hpp"
#include "nldiff/kernel.hpp"

namespace nldiff {

/// Heat kernel of dv/dt = a Laplacian v in the plane.
struct GaussianProfile {
    double a = 0.05;

    double operator()(double x, double y, double t) const { return value(x * x + y * y, t); }

    double value(double r2, double t) const {
        if (!(t > 0.0)) throw InvalidArgument("gaussian profile requires t > 0");
        return std::exp(-r2 / (4.0 * a * t)) / (4.0 * std::numbers::pi * a * t);
    }
};

inline double gaussian_profile(double a, double x, double y, double t) {
    if (!(a > 0.0)) throw InvalidArgument("gaussian profile requires a > 0");
    return GaussianProfile{a}(x, y, t);
}

/// Regular part W(., t) of the torus fundamental solution, as a density.
///
/// `lattice` holds W at lattice offsets: entry (jx, jy) is the value at
/// ((jx - n/2) h, (jy - n/2) h). `cells` holds W at the cell centres of the
/// grid, i.e. the same trigonometric interpolant shifted by half a cell.
struct RegularPart {
    Grid2D grid{};
    double t = 0.0;
    Field2D lattice;
    Field2D cells;
    double min_before_clip = 0.0;  // min over both layouts, before clipping
    double max_value = 0.0;

    /// Value at lattice offset (dx, dy), periodic.
    double at_offset(int dx, int dy) const {
        const int n = grid.n;
        const int jx = ((dx + n / 2) % n + n) % n;
        const int jy = ((dy + n / 2) % n + n) % n;
        return lattice(jx, jy);
    }
};

namespace detail {

/// Inverse transform of a real even symbol s(xi), optionally sampled half a
/// cell off the lattice. Output in centred layout, divided by h^2.
inline Field2D inverse_symbol(const Grid2D& grid, const std::vector<double>& spectrum, bool half_shift) {
    const int n = grid.n;
    const RealFft2D fft(n);
    auto spec = fft.make_complex();
    const int nh = n / 2 + 1;
    for (int ky = 0; ky < n; ++ky) {
        const int fy = ky <= n / 2 ? ky : ky - n;
        for (int kx = 0; kx < nh; ++kx) {
            const std::size_t k = static_cast<std::size_t>(ky) * nh + kx;
            std::complex<double> v(spectrum[k], 0.0);
            if (half_shift) v *= std::polar(1.0, std::numbers::pi * (kx + fy) / n);
            spec[k][0] = v.real();
            spec[k][1] = v.imag();
        }
    }
    auto real = fft.make_real();
    fft.backward(spec.get(), real.get());
    const double h = grid.h();
    const double scale = 1.0 / (static_cast<double>(n) * n * h * h);
    Field2D out(grid);
    for (int jy = 0; jy < n; ++jy)
        for (int jx = 0; jx < n; ++jx) {
            const int sx = (jx - n / 2 + n) % n, sy = (jy - n / 2 + n) % n;
            out(jx, jy) = real[static_cast<std::size_t>(sy) * n + sx] * scale;
        }
    return out;
}

}  // namespace detail

inline RegularPart regular_part(const DiscreteKernel& kernel, double t, const Grid2D& grid) {
    if (!(t > 0.0)) throw InvalidArgument("regular_part requires t > 0");
    const ConvolutionPlan plan(grid, kernel, Padding::wrap);
    std::vector<double> w(plan.symbol().size());
    const double et = std::exp(-t);
    // e^{-t} expm1(s t) is 0 * inf once e^{-t} underflows; switch forms there.
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double s = plan.symbol()[k];
        w[k] = t < 700.0 ? et * std::expm1(s * t) : std::exp((s - 1.0) * t) - et;
    }

    RegularPart r;
    r.grid = grid;
    r.t = t;
    r.lattice = detail::inverse_symbol(grid, w, false);
    r.cells = detail::inverse_symbol(grid, w, true);
    r.min_before_clip = std::min(min_value(r.lattice), min_value(r.cells));
    r.max_value = std::max(max_value(r.lattice), max_value(r.cells));
    for (Field2D* f : {&r.lattice, &r.cells})
        for (double& v : f->values())
            if (v < 0.0) v = 0.0;
    return r;
}

/// Periodic lattice convolution (W * u0)(x) = sum_y W(x - y) u0(y) h^2.
inline Field2D convolve_regular_part(const RegularPart& w, const Field2D& u0) {
    if (!(u0.grid() == w.grid)) throw PlanMismatch("regular part and field live on different grids");
    const int n = w.grid.n;
    const detail::RealFft2D fft(n);
    auto a = fft.make_real();
    auto b = fft.make_real();
    for (int jy = 0; jy < n; ++jy)
        for (int jx = 0; jx < n; ++jx) {
            a[static_cast<std::size_t>(jy) * n + jx] = w.at_offset(jx, jy);
            b[static_cast<std::size_t>(jy) * n + jx] = u0(jx, jy);
        }
    auto fa = fft.make_complex();
    auto fb = fft.make_complex();
    fft.forward(a.get(), fa.get());
    fft.forward(b.get(), fb.get());
    const double h = w.grid.h();
    const double scale = h * h / (static_cast<double>(n) * n);
    for (std::size_t k = 0; k < fft.spectral_count(); ++k) {
        const std::complex<double> p =
            std::complex<double>(fa[k][0], fa[k][1]) * std::complex<double>(fb[k][0], fb[k][1]) * scale;
        fa[k][0] = p.real();
        fa[k][1] = p.imag();
    }
    fft.backward(fa.get(), a.get());
    Field2D out(w.grid);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = a[k];
    return out;
}

struct WEstimateRow {
    double t = 0.0;
    double mass = 0.0;            // h^2 sum W
    double min_before_clip = 0.0;
    double max_value = 0.0;
    double diff_scaled = 0.0;     // t^{3/2} sup |W - Gamma_q|
    double tail_scaled = 0.0;     // sup (1 + |x|^4) |W| / t
    double l1 = 0.0;              // integral of |W|
    double d1_diff_scaled = 0.0;  // t^2 sup |D_h (W - Gamma_q)|
    double d1_tail_scaled = 0.0;  // sup (1 + |x|^5) |D_h W| / t
    double d1_l1 = 0.0;           // t^{1/2} integral of |D_h W|
};

struct WEstimateReport {
    std::vector<WEstimateRow> rows;

    /// Largest decade-normalized growth log10(v_{i+1}/v_i)/log10(t_{i+1}/t_i)
    /// of one column across consecutive times.
    template <class Get>
    double growth_rate(Get&& get) const {
        double worst = -INFINITY;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const double num = std::log10(get(rows[i]) / get(rows[i - 1]));
            worst = std::max(worst, num / std::log10(rows[i].t / rows[i - 1].t));
        }
        return worst;
    }
};

/// Normalized suprema of the regular part and its first differences.
inline WEstimateReport w_estimate_report(const DiscreteKernel& kernel, const std::vector<double>& times,
                                         const Grid2D& grid) {
    WEstimateReport rep;
    const double q = kernel.q();
    const double h = grid.h();
    const int n = grid.n;
    for (double t : times) {
        if (t < 1.0 || t > 1e3) throw InvalidArgument("w_estimate_report times must lie in [1, 1000]");
        const RegularPart w = regular_part(kernel, t, grid);
        const Field2D& W = w.cells;
        const Field2D G = Field2D::sample(grid, [&](double x, double y) { return gaussian_profile(q, x, y, t); });

        WEstimateRow row;
        row.t = t;
        row.min_before_clip = w.min_before_clip;
        row.max_value = w.max_value;
        double mass = 0.0, l1 = 0.0, dl1 = 0.0;
        for (int iy = 0; iy < n; ++iy) {
            const double y = grid.coord(iy);
            for (int ix = 0; ix < n; ++ix) {
                const double x = grid.coord(ix);
                const double r2 = x * x + y * y;
                const double v = W(ix, iy);
                mass += v;
                l1 += std::abs(v);
                row.diff_scaled = std::max(row.diff_scaled, std::abs(v - G(ix, iy)));
                row.tail_scaled = std::max(row.tail_scaled, (1.0 + r2 * r2) * std::abs(v));
                if (ix + 1 < n && iy + 1 < n) {
                    const double dx = (W(ix + 1, iy) - v) / h, dy = (W(ix, iy + 1) - v) / h;
                    const double gx = (G(ix + 1, iy) - G(ix, iy)) / h, gy = (G(ix, iy + 1) - G(ix, iy)) / h;
                    const double dw = std::hypot(dx, dy);
                    const double rr = std::sqrt(r2);
                    row.d1_diff_scaled = std::max(row.d1_diff_scaled, std::hypot(dx - gx, dy - gy));
                    row.d1_tail_scaled = std::max(row.d1_tail_scaled, (1.0 + r2 * r2 * rr) * dw);
                    dl1 += dw;
                }
            }
        }
        row.mass = mass * h * h;
        row.l1 = l1 * h * h;
        row.diff_scaled *= std::pow(t, 1.5);
        row.tail_scaled /= t;
        row.d1_diff_scaled *= t * t;
        row.d1_tail_scaled /= t;
        row.d1_l1 = dl1 * h * h * std::sqrt(t);
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace nldiff
