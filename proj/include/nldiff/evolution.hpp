#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "nldiff/convolution.hpp"
#include "nldiff/domain.hpp"
#include "nldiff/error.hpp"
#include "nldiff/grid.hpp"
#include "nldiff/kernel.hpp"

namespace nldiff {

enum class Scheme : unsigned { exponential = 0, forward_euler = 1 };

inline const char* scheme_name(Scheme s) { return s == Scheme::exponential ? "exponential" : "forward-euler"; }

/// Closed-form nonnegative initial datum, truncated to compact support and
/// zeroed on the hole.
struct InitialData {
    enum class Kind { gaussian, offcenter, annulus };

    Kind kind = Kind::offcenter;
    double cx = 4.5;
    double cy = 0.5;
    double sigma = 0.75;
    double ring_radius = 6.0;  // annulus only
    double amplitude = 1.0;
    double cutoff = 4.0;  // support radius in units of sigma

    void validate() const {
        if (!(sigma > 0.0)) throw InvalidArgument("initial sigma must be positive");
        if (!(amplitude >= 0.0)) throw InvalidArgument("initial amplitude must be nonnegative");
        if (!(cutoff > 0.0)) throw InvalidArgument("initial cutoff must be positive");
        if (kind == Kind::annulus && !(ring_radius > 0.0)) throw InvalidArgument("annulus radius must be positive");
    }

    double value(double x, double y) const {
        double s = 0.0;
        switch (kind) {
            case Kind::gaussian: s = std::hypot(x, y); break;
            case Kind::offcenter: s = std::hypot(x - cx, y - cy); break;
            case Kind::annulus: s = std::hypot(x, y) - ring_radius; break;
        }
        if (std::abs(s) > cutoff * sigma) return 0.0;
        return amplitude * std::exp(-s * s / (2.0 * sigma * sigma));
    }

    Field2D generate(const Grid2D& grid, const DomainMask* mask = nullptr) const {
        validate();
        Field2D u = Field2D::sample(grid, [this](double x, double y) { return value(x, y); });
        if (mask) mask->apply(u);
        return u;
    }

    bool operator==(const InitialData&) const = default;
};

struct SimulationState {
    Field2D u;
    double t = 0.0;
    double dt = 0.05;
    Scheme scheme = Scheme::exponential;
    long steps = 0;
    std::shared_ptr<const DiscreteKernel> kernel;
    std::shared_ptr<const ConvolutionPlan> plan;
    std::shared_ptr<const DomainMask> mask;  // null: no hole
};

inline SimulationState make_state(Field2D u0, const DiscreteKernel& kernel, std::shared_ptr<const DomainMask> mask,
                                  Scheme scheme, double dt, Padding padding = Padding::zero) {
    if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
    if (scheme == Scheme::forward_euler && dt > 1.0)
        throw InvalidArgument("forward-euler requires dt <= 1 to preserve positivity");
    SimulationState s;
    s.kernel = std::make_shared<const DiscreteKernel>(kernel);
    s.plan = std::make_shared<const ConvolutionPlan>(u0.grid(), kernel, padding);
    s.mask = std::move(mask);
    if (s.mask) {
        if (!(s.mask->grid() == u0.grid())) throw PlanMismatch("mask grid does not match the initial field");
        s.mask->apply(u0);
    }
    s.u = std::move(u0);
    s.dt = dt;
    s.scheme = scheme;
    return s;
}

namespace detail {

inline void advance(SimulationState& s, double tau) {
    const Field2D ju = s.plan->convolve(s.u);
    if (s.scheme == Scheme::exponential) {
        const double a = std::exp(-tau);
        const double b = -std::expm1(-tau);
        for (std::size_t k = 0; k < ju.size(); ++k) s.u[k] = a * s.u[k] + b * ju[k];
    } else {
        for (std::size_t k = 0; k < ju.size(); ++k) s.u[k] += tau * (ju[k] - s.u[k]);
    }
    if (s.mask) s.mask->apply(s.u);
    // Transform round-off leaves values of order 1e-17 * sup u where the
    // exact update is zero; those are the only negatives the scheme produces.
    for (double& v : s.u.values())
        if (v < 0.0) v = 0.0;
}

}  // namespace detail

/// One step of size state.dt.
inline SimulationState step(SimulationState state) {
    if (state.scheme == Scheme::forward_euler && state.dt > 1.0)
        throw InvalidArgument("forward-euler requires dt <= 1 to preserve positivity");
    detail::advance(state, state.dt);
    state.t += state.dt;
    ++state.steps;
    return state;
}

/// Mass h^2 sum u over cells within `strip` cells of the box edge.
inline double edge_strip_mass(const Field2D& u, int strip) {
    const int n = u.n();
    const double h2 = u.h() * u.h();
    double m = 0.0;
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix)
            if (ix < strip || iy < strip || ix >= n - strip || iy >= n - strip) m += u(ix, iy);
    return m * h2;
}

struct RunOptions {
    int edge_strip_cells = -1;  // default: kernel reach
    double edge_mass_cap = 1e-6;  // relative to initial mass
    std::vector<double> checkpoint_times;
    std::function<void(const SimulationState&)> on_checkpoint;
    std::function<void(const SimulationState&, const std::string&)> on_failure;
};

/// Steps to t_end, landing exactly on each observation time and calling
/// observe(state) there. Observation times must be increasing and <= t_end;
/// times not after state.t are skipped.
template <class Observer>
SimulationState run(SimulationState state, double t_end, const std::vector<double>& observation_times,
                    Observer&& observe, const RunOptions& opt = {}) {
    for (std::size_t i = 1; i < observation_times.size(); ++i)
        if (!(observation_times[i] > observation_times[i - 1]))
            throw InvalidArgument("observation times must be strictly increasing");
    if (!observation_times.empty() && observation_times.back() > t_end * (1.0 + 1e-12))
        throw InvalidArgument("observation times must not exceed t_end");

    std::vector<double> stops;
    for (double t : observation_times)
        if (t > state.t) stops.push_back(t);
    for (double t : opt.checkpoint_times)
        if (t > state.t && t <= t_end) stops.push_back(t);
    if (t_end > state.t) stops.push_back(t_end);
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

    const int strip = opt.edge_strip_cells >= 0 ? opt.edge_strip_cells : state.kernel->reach();
    double initial_mass = 0.0;
    for (double v : state.u.values()) initial_mass += v;
    initial_mass *= state.u.h() * state.u.h();

    auto is_in = [](const std::vector<double>& v, double t) { return std::binary_search(v.begin(), v.end(), t); };
    std::vector<double> obs(observation_times.begin(), observation_times.end());
    std::vector<double> chk(opt.checkpoint_times.begin(), opt.checkpoint_times.end());
    std::sort(chk.begin(), chk.end());

    const double dt = state.dt;
    for (double stop : stops) {
        while (state.t < stop) {
            const double remaining = stop - state.t;
            if (remaining <= dt * (1.0 + 1e-9)) {
                detail::advance(state, remaining);
                state.t = stop;
            } else {
                detail::advance(state, dt);
                state.t += dt;
            }
            ++state.steps;
        }

        std::string failure;
        if (!all_finite(state.u)) {
            failure = "non-finite value in u";
        } else if (initial_mass > 0.0) {
            const double edge = edge_strip_mass(state.u, strip);
            if (edge > opt.edge_mass_cap * initial_mass) {
                std::ostringstream os;
                os << "domain truncation: edge-strip mass " << edge << " exceeds " << opt.edge_mass_cap
                   << " of the initial mass at t = " << state.t;
                failure = os.str();
            }
        }
        if (!failure.empty()) {
            if (opt.on_failure) opt.on_failure(state, failure);
            throw NumericalFailure(failure);
        }

        if (is_in(obs, stop)) observe(static_cast<const SimulationState&>(state));
        if (opt.on_checkpoint && is_in(chk, stop)) opt.on_checkpoint(state);
    }
    return state;
}

/// Torus propagator: every discrete mode multiplied by exp((J-hat - 1) t).
inline Field2D whole_space_exact(const Field2D& u0, const DiscreteKernel& kernel, double t) {
    if (t < 0.0) throw InvalidArgument("whole_space_exact requires t >= 0");
    if (t == 0.0) return u0;
    const ConvolutionPlan plan(u0.grid(), kernel, Padding::wrap);
    return plan.spectral_map(u0, [t](double j) { return std::exp((j - 1.0) * t); });
}

}  // namespace nldiff
