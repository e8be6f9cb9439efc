#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <sstream>

#include "nldiff/domain.hpp"
#include "nldiff/error.hpp"
#include "nldiff/fft.hpp"
#include "nldiff/grid.hpp"
#include "nldiff/kernel.hpp"

namespace nldiff {

enum class Padding { zero, wrap };

/// Cached FFT convolution with a fixed kernel on a fixed grid.
///
/// Zero padding embeds the n x n field in a P x P torus with P >= n + 2 reach,
/// so the periodic product equals the linear convolution on the physical
/// cells. Wrap padding uses P = n and convolves on the n-torus.
class ConvolutionPlan {
public:
    ConvolutionPlan(const Grid2D& grid, const DiscreteKernel& kernel, Padding padding = Padding::zero)
        : grid_(grid), spec_(kernel.spec()), reach_(kernel.reach()), padding_(padding) {
        if (std::abs(grid.h() - kernel.h()) > 1e-12 * kernel.h()) {
            std::ostringstream os;
            os << "kernel lattice spacing " << kernel.h() << " differs from grid spacing " << grid.h();
            throw PlanMismatch(os.str());
        }
        if (padding == Padding::wrap) {
            if (2 * reach_ + 1 > grid.n) throw InvalidArgument("kernel stencil wider than the periodic grid");
            P_ = grid.n;
        } else {
            P_ = detail::smooth_size(grid.n + 2 * reach_);
        }
        fft_ = std::make_shared<detail::RealFft2D>(P_);

        auto buf = fft_->make_real();
        std::fill(buf.get(), buf.get() + fft_->real_count(), 0.0);
        for (int dy = -reach_; dy <= reach_; ++dy) {
            const int py = (dy % P_ + P_) % P_;
            for (int dx = -reach_; dx <= reach_; ++dx) {
                const int px = (dx % P_ + P_) % P_;
                buf[static_cast<std::size_t>(py) * P_ + px] += kernel.weight(dx, dy);
            }
        }
        auto spec = fft_->make_complex();
        fft_->forward(buf.get(), spec.get());
        // The stencil is even, so its transform is real up to rounding.
        symbol_.resize(fft_->spectral_count());
        for (std::size_t k = 0; k < symbol_.size(); ++k) symbol_[k] = spec[k][0];
    }

    const Grid2D& grid() const { return grid_; }
    Padding padding() const { return padding_; }
    int padded_size() const { return P_; }
    int reach() const { return reach_; }

    bool matches(const Grid2D& grid, const DiscreteKernel& kernel) const {
        return grid == grid_ && kernel.spec() == spec_ && kernel.reach() == reach_;
    }

    /// J-hat on the half spectrum, P rows of P/2 + 1 entries.
    const std::vector<double>& symbol() const { return symbol_; }

    Field2D convolve(const Field2D& f) const {
        return spectral_map(f, [](double j) { return j; });
    }

    /// Returns IDFT[m(J-hat) * DFT f] on the plan's torus. With zero padding
    /// the field is embedded first and the physical window is returned.
    template <class M>
    Field2D spectral_map(const Field2D& f, M&& m) const {
        if (!(f.grid() == grid_)) throw PlanMismatch("field grid does not match convolution plan");
        const int n = grid_.n;
        auto real = fft_->make_real();
        if (P_ != n) std::fill(real.get(), real.get() + fft_->real_count(), 0.0);
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix) real[static_cast<std::size_t>(iy) * P_ + ix] = f(ix, iy);

        auto spec = fft_->make_complex();
        fft_->forward(real.get(), spec.get());
        const double scale = 1.0 / (static_cast<double>(P_) * P_);
        for (std::size_t k = 0; k < symbol_.size(); ++k) {
            const double g = m(symbol_[k]) * scale;
            spec[k][0] *= g;
            spec[k][1] *= g;
        }
        fft_->backward(spec.get(), real.get());

        Field2D out(grid_);
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix) out(ix, iy) = real[static_cast<std::size_t>(iy) * P_ + ix];
        return out;
    }

private:
    Grid2D grid_;
    KernelSpec spec_;
    int reach_ = 0;
    Padding padding_;
    int P_ = 0;
    std::shared_ptr<detail::RealFft2D> fft_;
    std::vector<double> symbol_;
};

inline Field2D convolve(const Field2D& f, const DiscreteKernel& kernel, const ConvolutionPlan& plan) {
    if (!plan.matches(f.grid(), kernel)) throw PlanMismatch("convolution plan was built for another grid or kernel");
    return plan.convolve(f);
}

/// Nested-loop reference convolution. Same quadrature as the FFT path.
inline Field2D convolve_direct(const Field2D& f, const DiscreteKernel& kernel, Padding padding = Padding::zero) {
    const int n = f.n();
    if (n > 256) throw InvalidArgument("grid too large for the direct convolution oracle (n > 256)");
    if (std::abs(f.h() - kernel.h()) > 1e-12 * kernel.h())
        throw PlanMismatch("kernel lattice spacing differs from grid spacing");
    const int r = kernel.reach();
    Field2D out(f.grid());
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                int sy = iy - dy;
                if (padding == Padding::wrap) sy = ((sy % n) + n) % n;
                else if (sy < 0 || sy >= n) continue;
                for (int dx = -r; dx <= r; ++dx) {
                    const double w = kernel.weight(dx, dy);
                    if (w == 0.0) continue;
                    int sx = ix - dx;
                    if (padding == Padding::wrap) sx = ((sx % n) + n) % n;
                    else if (sx < 0 || sx >= n) continue;
                    acc += w * f(sx, sy);
                }
            }
            out(ix, iy) = acc;
        }
    }
    return out;
}

/// L f = J*f - f, zeroed on hole cells when a mask is given.
inline Field2D apply_L(const Field2D& f, const DiscreteKernel& kernel, const ConvolutionPlan& plan,
                       const DomainMask* mask = nullptr) {
    Field2D out = convolve(f, kernel, plan);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] -= f[k];
    if (mask) mask->apply(out);
    return out;
}

/// L g on `grid` for a function known in closed form everywhere: g is sampled
/// on a box grown by the kernel reach so no zero padding enters the stencil.
template <class G>
Field2D apply_L_closed_form(G&& g, const Grid2D& grid, const DiscreteKernel& kernel) {
    const Grid2D big = grid.grown(kernel.reach());
    const Field2D gb = Field2D::sample(big, g);
    const ConvolutionPlan plan(big, kernel, Padding::zero);
    Field2D jg = plan.convolve(gb);
    for (std::size_t k = 0; k < jg.size(); ++k) jg[k] -= gb[k];
    return restrict_to(jg, grid);
}

/// Pointwise L g(x) by direct stencil summation.
template <class G>
double L_at(G&& g, const DiscreteKernel& kernel, double x, double y) {
    const int r = kernel.reach();
    const double h = kernel.h();
    const double g0 = g(x, y);
    double acc = 0.0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            const double w = kernel.weight(dx, dy);
            if (w != 0.0) acc += w * (g(x - dx * h, y - dy * h) - g0);
        }
    return acc;
}

/// Test function with an exact Laplacian.
struct SmoothTestFunction {
    std::function<double(double, double)> value;
    std::function<double(double, double)> laplacian;
};

/// sup over the cells of `grid` of |lambda (J_lambda * f - f) - q Laplacian f|
/// with J_lambda(x) = lambda J(sqrt(lambda) x): the stencil offsets shrink
/// by sqrt(lambda) while the weights are unchanged.
inline double scaled_operator_defect(const SmoothTestFunction& f, const DiscreteKernel& kernel, double lambda,
                                     const Grid2D& grid) {
    if (!(lambda > 1.0)) throw InvalidArgument("scaled_operator_defect requires lambda > 1");
    const int r = kernel.reach();
    const double s = kernel.h() / std::sqrt(lambda);
    const double q = kernel.q();
    double sup = 0.0;
    for (int iy = 0; iy < grid.n; ++iy) {
        const double y = grid.coord(iy);
        for (int ix = 0; ix < grid.n; ++ix) {
            const double x = grid.coord(ix);
            const double f0 = f.value(x, y);
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const double w = kernel.weight(dx, dy);
                    if (w != 0.0) acc += w * (f.value(x - dx * s, y - dy * s) - f0);
                }
            sup = std::max(sup, std::abs(lambda * acc - q * f.laplacian(x, y)));
        }
    }
    return sup;
}

}  // namespace nldiff
