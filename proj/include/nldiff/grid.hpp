#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nldiff/error.hpp"

namespace nldiff {

/// Uniform cell-centred square lattice on [-half_width, half_width]^2.
///
/// Cell (ix, iy) has centre (coord(ix), coord(iy)). Lattice offsets between
/// cell centres are integer multiples of h, which is what lets the sampled
/// kernel act as a plain stencil.
struct Grid2D {
    double half_width = 0.0;
    int n = 0;

    double h() const { return 2.0 * half_width / n; }
    double coord(int i) const { return -half_width + (i + 0.5) * h(); }
    std::size_t cells() const { return static_cast<std::size_t>(n) * static_cast<std::size_t>(n); }

    /// Concentric lattice with `margin` cells removed on every side
    /// (negative margin grows the box). Cell centres stay aligned.
    Grid2D shrunk(int margin) const { return Grid2D{half_width - margin * h(), n - 2 * margin}; }
    Grid2D grown(int margin) const { return shrunk(-margin); }

    /// Validated experiment grid: n a power of two, positive extent.
    static Grid2D make(double half_width, int n) {
        if (!(half_width > 0.0) || !std::isfinite(half_width))
            throw InvalidArgument("grid half_width must be positive and finite");
        if (n < 8 || !std::has_single_bit(static_cast<unsigned>(n)))
            throw InvalidArgument("grid cells per side must be a power of two >= 8, got " +
                                  std::to_string(n));
        return Grid2D{half_width, n};
    }

    bool operator==(const Grid2D&) const = default;
};

/// Scalar grid function, row-major with x varying fastest.
class Field2D {
public:
    Field2D() = default;
    explicit Field2D(const Grid2D& grid, double fill = 0.0) : grid_(grid), data_(grid.cells(), fill) {}

    template <class F>
    static Field2D sample(const Grid2D& grid, F&& f) {
        Field2D out(grid);
        for (int iy = 0; iy < grid.n; ++iy) {
            const double y = grid.coord(iy);
            for (int ix = 0; ix < grid.n; ++ix) out(ix, iy) = f(grid.coord(ix), y);
        }
        return out;
    }

    const Grid2D& grid() const { return grid_; }
    int n() const { return grid_.n; }
    double h() const { return grid_.h(); }
    std::size_t size() const { return data_.size(); }

    double& operator()(int ix, int iy) { return data_[index(ix, iy)]; }
    double operator()(int ix, int iy) const { return data_[index(ix, iy)]; }
    double& operator[](std::size_t k) { return data_[k]; }
    double operator[](std::size_t k) const { return data_[k]; }

    std::size_t index(int ix, int iy) const {
        return static_cast<std::size_t>(iy) * static_cast<std::size_t>(grid_.n) + static_cast<std::size_t>(ix);
    }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    bool operator==(const Field2D&) const = default;

private:
    Grid2D grid_{};
    std::vector<double> data_;
};

inline double sup_abs(const Field2D& f) {
    double m = 0.0;
    for (double v : f.values()) m = std::max(m, std::abs(v));
    return m;
}

inline double max_value(const Field2D& f) {
    return f.size() == 0 ? 0.0 : *std::max_element(f.values().begin(), f.values().end());
}

inline double min_value(const Field2D& f) {
    return f.size() == 0 ? 0.0 : *std::min_element(f.values().begin(), f.values().end());
}

inline bool all_finite(const Field2D& f) {
    return std::all_of(f.values().begin(), f.values().end(), [](double v) { return std::isfinite(v); });
}

/// sup |a - b| / sup |b|  (absolute when b vanishes).
inline double relative_sup_error(const Field2D& a, const Field2D& b) {
    double num = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) num = std::max(num, std::abs(a[k] - b[k]));
    const double den = sup_abs(b);
    return den > 0.0 ? num / den : num;
}

/// Copy of the centred window of `f` on `sub` (sub must be concentric, cell aligned).
inline Field2D restrict_to(const Field2D& f, const Grid2D& sub) {
    const int off = (f.n() - sub.n) / 2;
    Field2D out(sub);
    for (int iy = 0; iy < sub.n; ++iy)
        for (int ix = 0; ix < sub.n; ++ix) out(ix, iy) = f(ix + off, iy + off);
    return out;
}

}  // namespace nldiff
