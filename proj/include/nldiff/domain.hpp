#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "nldiff/error.hpp"
#include "nldiff/grid.hpp"

namespace nldiff {

struct Disk {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;

    bool contains(double x, double y) const { return std::hypot(x - cx, y - cy) < radius; }
    bool operator==(const Disk&) const = default;
};

struct Rectangle {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

    bool contains(double x, double y) const { return x > x0 && x < x1 && y > y0 && y < y1; }
    bool operator==(const Rectangle&) const = default;
};

/// Open bounded hole H with B_2(0) ⊂ H ⊂ B_R(0).
class HoleShape {
public:
    using Variant = std::variant<Disk, std::vector<Disk>, Rectangle>;

    HoleShape() : shape_(Disk{0.0, 0.0, 2.5}) {}
    explicit HoleShape(Variant v) : shape_(std::move(v)) {}

    static HoleShape disk(double cx, double cy, double radius) { return HoleShape(Disk{cx, cy, radius}); }
    static HoleShape disks(std::vector<Disk> parts) { return HoleShape(std::move(parts)); }
    static HoleShape rectangle(double x0, double y0, double x1, double y1) {
        return HoleShape(Rectangle{x0, y0, x1, y1});
    }

    const Variant& shape() const { return shape_; }

    bool contains(double x, double y) const {
        return std::visit(
            [&](const auto& s) -> bool {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, std::vector<Disk>>)
                    return std::any_of(s.begin(), s.end(), [&](const Disk& d) { return d.contains(x, y); });
                else
                    return s.contains(x, y);
            },
            shape_);
    }

    /// Smallest R with H ⊂ B_R(0).
    double bounding_radius() const {
        return std::visit(
            [](const auto& s) -> double {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Disk>) {
                    return std::hypot(s.cx, s.cy) + s.radius;
                } else if constexpr (std::is_same_v<T, std::vector<Disk>>) {
                    double r = 0.0;
                    for (const Disk& d : s) r = std::max(r, std::hypot(d.cx, d.cy) + d.radius);
                    return r;
                } else {
                    const double ax = std::max(std::abs(s.x0), std::abs(s.x1));
                    const double ay = std::max(std::abs(s.y0), std::abs(s.y1));
                    return std::hypot(ax, ay);
                }
            },
            shape_);
    }

    /// Whether B_r(0) ⊂ H. Exact for disks and rectangles; unions are checked
    /// by dense polar sampling, since a union can cover B_r without any single
    /// member doing so.
    bool contains_origin_disk(double r) const {
        return std::visit(
            [r](const auto& s) -> bool {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Disk>) {
                    return std::hypot(s.cx, s.cy) + r <= s.radius;
                } else if constexpr (std::is_same_v<T, Rectangle>) {
                    return s.x0 <= -r && s.x1 >= r && s.y0 <= -r && s.y1 >= r;
                } else {
                    constexpr int radial = 64, angular = 512;
                    for (int i = 0; i <= radial; ++i) {
                        const double rho = r * (1.0 - 1e-9) * i / radial;
                        for (int j = 0; j < angular; ++j) {
                            const double th = 2.0 * std::numbers::pi * j / angular;
                            const double x = rho * std::cos(th), y = rho * std::sin(th);
                            const bool covered = std::any_of(s.begin(), s.end(), [&](const Disk& d) {
                                return std::hypot(x - d.cx, y - d.cy) <= d.radius;
                            });
                            if (!covered) return false;
                        }
                    }
                    return true;
                }
            },
            shape_);
    }

    /// Checks hypothesis H_H: B_2(0) ⊂ H ⊂ B_R(0) with R < infinity.
    void validate() const {
        std::visit(
            [](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Disk>) {
                    if (!(s.radius > 0.0)) throw InvalidArgument("hole disk radius must be positive");
                } else if constexpr (std::is_same_v<T, std::vector<Disk>>) {
                    if (s.empty()) throw InvalidArgument("hole disk union is empty");
                    for (const Disk& d : s)
                        if (!(d.radius > 0.0)) throw InvalidArgument("hole disk radius must be positive");
                } else {
                    if (!(s.x1 > s.x0 && s.y1 > s.y0)) throw InvalidArgument("hole rectangle corners are not ordered");
                }
            },
            shape_);
        if (!contains_origin_disk(2.0))
            throw InvalidArgument("hole violates hypothesis H_H: it must contain the disk B_2(0) (B_2(0) ⊂ H ⊂ B_R(0))");
        if (!std::isfinite(bounding_radius()))
            throw InvalidArgument("hole violates hypothesis H_H: it must be bounded");
    }

    bool operator==(const HoleShape&) const = default;

private:
    Variant shape_;
};

/// Cell-centre hole membership on a grid.
class DomainMask {
public:
    DomainMask() = default;
    DomainMask(const Grid2D& grid, std::vector<std::uint8_t> in_hole, double bounding_radius)
        : grid_(grid), in_hole_(std::move(in_hole)), bounding_radius_(bounding_radius) {
        for (auto b : in_hole_) hole_cells_ += b;
    }

    const Grid2D& grid() const { return grid_; }
    bool in_hole(int ix, int iy) const { return in_hole_[index(ix, iy)] != 0; }
    bool exterior(int ix, int iy) const { return !in_hole(ix, iy); }
    bool in_hole(std::size_t k) const { return in_hole_[k] != 0; }

    std::size_t hole_cells() const { return hole_cells_; }
    double hole_area() const { return static_cast<double>(hole_cells_) * grid_.h() * grid_.h(); }
    double bounding_radius() const { return bounding_radius_; }
    const std::vector<std::uint8_t>& raw() const { return in_hole_; }

    /// Zeroes f on hole cells.
    void apply(Field2D& f) const {
        for (std::size_t k = 0; k < in_hole_.size(); ++k)
            if (in_hole_[k]) f[k] = 0.0;
    }

private:
    std::size_t index(int ix, int iy) const {
        return static_cast<std::size_t>(iy) * static_cast<std::size_t>(grid_.n) + static_cast<std::size_t>(ix);
    }

    Grid2D grid_{};
    std::vector<std::uint8_t> in_hole_;
    double bounding_radius_ = 0.0;
    std::size_t hole_cells_ = 0;
};

inline DomainMask build_domain(const Grid2D& grid, const HoleShape& hole) {
    hole.validate();
    const double R = std::max(hole.bounding_radius(), 2.0);
    if (grid.half_width < 4.0 * R) {
        std::ostringstream os;
        os << "grid half_width " << grid.half_width << " must be at least 4R = " << 4.0 * R;
        throw InvalidArgument(os.str());
    }
    std::vector<std::uint8_t> in_hole(grid.cells(), 0);
    for (int iy = 0; iy < grid.n; ++iy) {
        const double y = grid.coord(iy);
        for (int ix = 0; ix < grid.n; ++ix)
            in_hole[static_cast<std::size_t>(iy) * grid.n + ix] = hole.contains(grid.coord(ix), y) ? 1 : 0;
    }
    return DomainMask(grid, std::move(in_hole), R);
}

}  // namespace nldiff
