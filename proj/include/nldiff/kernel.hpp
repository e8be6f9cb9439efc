#pragma once

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "nldiff/error.hpp"

namespace nldiff {

/// Polynomial bump kernel c_k (1 - |z|^2/d^2)^k sampled with spacing h.
struct KernelSpec {
    double radius = 1.0;  // support radius d
    int exponent = 3;     // k >= 2, C^2 across |z| = d
    double h = 1.0 / 16;  // lattice spacing

    static constexpr double min_cells_per_radius = 8.0;

    void validate() const {
        if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidArgument("kernel radius must be positive");
        if (exponent < 2) throw InvalidArgument("kernel exponent must be >= 2 for a C^2 bump");
        if (!(h > 0.0)) throw InvalidArgument("kernel lattice spacing must be positive");
        if (radius / h < min_cells_per_radius * (1.0 - 1e-12)) {
            std::ostringstream os;
            os << "kernel support under-resolved: d/h = " << radius / h << " < " << min_cells_per_radius;
            throw InvalidArgument(os.str());
        }
    }

    bool operator==(const KernelSpec&) const = default;
};

/// Continuum bump density, normalized to unit mass in the plane.
inline double bump_density(double radius, int exponent, double rho) {
    if (rho >= radius) return 0.0;
    const double c = (exponent + 1) / (std::numbers::pi * radius * radius);
    return c * std::pow(1.0 - (rho * rho) / (radius * radius), exponent);
}

/// Sampled kernel. `weight(dx, dy)` is the quadrature weight h^2 J(z) at the
/// lattice offset z = (dx, dy) h, so that (J*f)(x) = sum_z weight(z) f(x - z).
class DiscreteKernel {
public:
    DiscreteKernel() = default;

    const KernelSpec& spec() const { return spec_; }
    double radius() const { return spec_.radius; }
    double h() const { return spec_.h; }
    /// Offsets run over [-reach, reach]^2.
    int reach() const { return reach_; }
    int width() const { return 2 * reach_ + 1; }

    double weight(int dx, int dy) const {
        if (std::abs(dx) > reach_ || std::abs(dy) > reach_) return 0.0;
        return weights_[static_cast<std::size_t>((dy + reach_) * width() + (dx + reach_))];
    }
    double density(int dx, int dy) const { return weight(dx, dy) / (spec_.h * spec_.h); }

    const std::vector<double>& weights() const { return weights_; }
    /// Discrete mass sum_z weight(z); equals 1 to rounding.
    double total() const { return total_; }
    double q() const { return q_; }

    bool same_as(const DiscreteKernel& o) const { return spec_ == o.spec_ && reach_ == o.reach_; }

private:
    friend DiscreteKernel build_kernel(const KernelSpec& spec);

    KernelSpec spec_{};
    int reach_ = 0;
    std::vector<double> weights_;
    double total_ = 0.0;
    double q_ = 0.0;
};

/// (1/4) sum_z weight(z) |z|^2 -- the discrete diffusivity in two dimensions.
inline double kernel_diffusivity(const DiscreteKernel& kernel) {
    const int r = kernel.reach();
    const double h2 = kernel.h() * kernel.h();
    double m2 = 0.0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) m2 += kernel.weight(dx, dy) * (dx * dx + dy * dy) * h2;
    return 0.25 * m2;
}

inline DiscreteKernel build_kernel(const KernelSpec& spec) {
    spec.validate();
    DiscreteKernel k;
    k.spec_ = spec;
    k.reach_ = static_cast<int>(std::ceil(spec.radius / spec.h));
    const int w = 2 * k.reach_ + 1;
    k.weights_.assign(static_cast<std::size_t>(w) * w, 0.0);

    // Sample at lattice offsets; |z|^2 = (dx^2 + dy^2) h^2 keeps the stencil
    // exactly invariant under the lattice point group.
    double raw_total = 0.0;
    const double h2 = spec.h * spec.h;
    for (int dy = -k.reach_; dy <= k.reach_; ++dy) {
        for (int dx = -k.reach_; dx <= k.reach_; ++dx) {
            const double rho = std::sqrt(static_cast<double>(dx * dx + dy * dy) * h2);
            const double v = bump_density(spec.radius, spec.exponent, rho) * h2;
            k.weights_[static_cast<std::size_t>((dy + k.reach_) * w + (dx + k.reach_))] = v;
            raw_total += v;
        }
    }
    for (double& v : k.weights_) v /= raw_total;

    double total = 0.0;
    for (double v : k.weights_) total += v;
    k.total_ = total;
    k.q_ = kernel_diffusivity(k);
    return k;
}

}  // namespace nldiff
