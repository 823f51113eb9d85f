#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ringphonon/integrator.hpp"
#include "ringphonon/model.hpp"

// Sampled forward evaluation of the phonon equation for the synthesis, fit
// and analysis paths. Outside the window where the ramp actually moves
// (|t - t_mid| > 6 tau the radius is constant to double precision) the
// constant-coefficient closed form is used; inside it, adaptive RK. The
// result agrees with the pure RK route in integrator.hpp to integration
// tolerance; both routes are cross-checked in the test suite.

namespace ringphonon {

/// Closed-form constant-coefficient step covering all damping regimes.
inline PhononState constant_coefficient_step(const ModelParams& params, double R, double N,
                                             const PhononState& s, double t)
{
    const double w = omega(params, R, N);
    const double g = damping_gamma(params, R, N);
    const double dt = t - s.t;
    const double ea = std::exp(-g * dt);
    const double C = s.dphi_dt + g * s.phi;

    PhononState out;
    out.t = t;
    const double disc = w * w - g * g;
    if (std::abs(disc) <= 1e-12 * w * w) {  // critically damped
        out.phi = ea * (s.phi + C * dt);
        out.dphi_dt = ea * (s.dphi_dt - g * C * dt);
    } else if (disc > 0.0) {  // underdamped
        const double wd = std::sqrt(disc);
        const double cw = std::cos(wd * dt), sw = std::sin(wd * dt);
        out.phi = ea * (s.phi * cw + C / wd * sw);
        out.dphi_dt = ea * (s.dphi_dt * cw - (wd * s.phi + g * C / wd) * sw);
    } else {  // overdamped
        const double mu = std::sqrt(-disc);
        const double ch = std::cosh(mu * dt), sh = std::sinh(mu * dt);
        out.phi = ea * (s.phi * ch + C / mu * sh);
        out.dphi_dt = ea * (s.dphi_dt * ch - (w * w * s.phi + g * C) / mu * sh);
    }
    return out;
}

struct PropagateOptions {
    Dopri5Options ode{};
    double window_sigmas = 6.0;  ///< half-width of the RK window in units of tau
};

/// Propagates a state forward across an increasing grid, writing phi and
/// dphi/dt per grid point; returns the state at the last grid time.
inline PhononState propagate_sampled(const ModelParams& params, const RampProfile& profile,
                                     const StepSeries& N_of_t, PhononState state,
                                     std::span<const double> grid, double* phi_out,
                                     double* dphi_out, const PropagateOptions& opts = {})
{
    if (grid.empty())
        return state;
    const double t_end = grid.back();

    // Segment edges: atom-number steps plus the RK window walls.
    std::vector<double> edges = N_of_t.breakpoints(state.t, t_end);
    double win_lo = 0.0, win_hi = 0.0;
    const bool ramped = !profile.is_constant();
    if (ramped) {
        const double tau = profile.width();
        win_lo = profile.t_mid - opts.window_sigmas * tau;
        win_hi = profile.t_mid + opts.window_sigmas * tau;
        if (win_lo > state.t && win_lo < t_end)
            edges.push_back(win_lo);
        if (win_hi > state.t && win_hi < t_end)
            edges.push_back(win_hi);
        std::sort(edges.begin(), edges.end());
    }
    edges.push_back(t_end);

    std::size_t idx = 0;
    while (idx < grid.size() && grid[idx] <= state.t) {
        phi_out[idx] = state.phi;
        dphi_out[idx] = state.dphi_dt;
        ++idx;
    }

    for (double edge : edges) {
        if (!(edge > state.t))
            continue;
        const std::size_t lo = idx;
        while (idx < grid.size() && grid[idx] <= edge)
            ++idx;
        std::span<const double> seg = grid.subspan(lo, idx - lo);

        const double t_mid_seg = 0.5 * (state.t + edge);
        const double N = N_of_t(t_mid_seg);
        const bool analytic = !ramped || edge <= win_lo || state.t >= win_hi;

        if (analytic) {
            const double R = radius(profile, t_mid_seg);
            for (std::size_t k = 0; k < seg.size(); ++k) {
                const PhononState s = constant_coefficient_step(params, R, N, state, seg[k]);
                phi_out[lo + k] = s.phi;
                dphi_out[lo + k] = s.dphi_dt;
            }
            state = constant_coefficient_step(params, R, N, state, edge);
        } else {
            PhononRhs f{&params, &profile, N};
            Dopri5<2, PhononRhs> stepper(f, opts.ode);
            auto y = stepper.solve(state.t, {state.phi, state.dphi_dt}, edge, seg,
                                   [&](std::size_t k, double, const std::array<double, 2>& ys) {
                                       phi_out[lo + k] = ys[0];
                                       dphi_out[lo + k] = ys[1];
                                   });
            state = PhononState{y[0], y[1], edge};
        }
    }
    return state;
}

/// Observable density perturbation sampled on a grid:
///     dn(t_k) = N(t_k)/N_ref * (-R^alpha dphi/dt)
/// from the initial condition set by (dn_i, phi_0); see initial_state().
inline std::vector<double> model_dn(const ModelParams& params, const RampProfile& profile,
                                    const StepSeries& N_of_t, std::span<const double> grid,
                                    const PropagateOptions& opts = {})
{
    std::vector<double> phi(grid.size()), dphi(grid.size());
    const PhononState init = initial_state(params, profile, N_of_t(0.0));
    propagate_sampled(params, profile, N_of_t, init, grid, phi.data(), dphi.data(), opts);

    std::vector<double> dn(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
        dn[k] = N_of_t(grid[k]) / params.N_ref *
                density_from_phase(params, radius(profile, grid[k]), dphi[k]);
    return dn;
}

/// Same observable from an explicit quadrature pair (p, q) = (dn_i cos phi_0,
/// dn_i sin phi_0); the signal is linear in (p, q), which the fit exploits.
inline std::vector<double> model_dn_from_quadrature(const ModelParams& params,
                                                    const RampProfile& profile,
                                                    const StepSeries& N_of_t,
                                                    const QuadraturePair& pq,
                                                    std::span<const double> grid,
                                                    const PropagateOptions& opts = {})
{
    std::vector<double> phi(grid.size()), dphi(grid.size());
    const PhononState init = state_from_quadrature(params, profile, N_of_t(0.0), pq);
    propagate_sampled(params, profile, N_of_t, init, grid, phi.data(), dphi.data(), opts);

    std::vector<double> dn(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
        dn[k] = N_of_t(grid[k]) / params.N_ref *
                density_from_phase(params, radius(profile, grid[k]), dphi[k]);
    return dn;
}

}  // namespace ringphonon
