#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ringphonon/model.hpp"
#include "ringphonon/numerics.hpp"

// Adaptive embedded Runge-Kutta integration of the phonon wave equation
//
//   d2phi/dt2 + [2 gamma(t) + gamma_H Rdot/R] dphi/dt + omega^2(t) phi = 0
//
// using the Dormand-Prince 5(4) pair with continuous (dense) output.

namespace ringphonon {

struct Dopri5Options {
    double rtol = 1e-10;
    double atol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
};

namespace dopri5 {

// Node and stage coefficients of the Dormand-Prince 5(4) method.
inline constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                        a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
inline constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                        b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
// b - bhat, for the embedded 4th-order error estimate.
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Continuous-extension weights.
inline constexpr double d1 = -12715105075.0 / 11282082432.0;
inline constexpr double d3 = 87487479700.0 / 32700410799.0;
inline constexpr double d4 = -10690763975.0 / 1880347072.0;
inline constexpr double d5 = 701980252875.0 / 199316789632.0;
inline constexpr double d6 = -1453857185.0 / 822651844.0;
inline constexpr double d7 = 69997945.0 / 29380423.0;

}  // namespace dopri5

/// Dormand-Prince 5(4) driver for a small fixed-size system. Rhs must be
/// callable as rhs(t, y, dydt) with y/dydt of type std::array<double, N>.
template <std::size_t N, class Rhs>
class Dopri5 {
public:
    using State = std::array<double, N>;

    Dopri5(Rhs rhs, Dopri5Options opts = {}) : rhs_(std::move(rhs)), opts_(opts) {}

    /// Integrate from (t0, y0) to t1 (either direction). Sample times must be
    /// sorted in integration direction within [t0, t1]; for each one the dense
    /// solution is passed to on_sample(index, t, y).
    template <class SampleFn>
    State solve(double t0, State y, double t1, std::span<const double> samples,
                SampleFn&& on_sample)
    {
        const double dir = t1 >= t0 ? 1.0 : -1.0;
        std::size_t is = 0;
        // Samples at (or before) the start come straight from the initial state.
        while (is < samples.size() && dir * (samples[is] - t0) <= 0.0) {
            on_sample(is, samples[is], y);
            ++is;
        }
        if (t1 == t0)
            return y;

        double t = t0;
        State k1;
        rhs_(t, y, k1);
        ++n_rhs_evals_;
        double h = dir * initial_step(t, y, k1, std::abs(t1 - t0));

        State k2, k3, k4, k5, k6, k7, ytmp, ynew, yerr;
        while (dir * (t1 - t) > 0.0) {
            if (std::abs(h) < 16.0 * std::numeric_limits<double>::epsilon() * std::abs(t))
                throw std::runtime_error("stiff failure: step size underflow");
            if (dir * (t + h - t1) > 0.0)
                h = t1 - t;

            using namespace dopri5;
            for (std::size_t i = 0; i < N; ++i)
                ytmp[i] = y[i] + h * a21 * k1[i];
            rhs_(t + c2 * h, ytmp, k2);
            for (std::size_t i = 0; i < N; ++i)
                ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
            rhs_(t + c3 * h, ytmp, k3);
            for (std::size_t i = 0; i < N; ++i)
                ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
            rhs_(t + c4 * h, ytmp, k4);
            for (std::size_t i = 0; i < N; ++i)
                ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
            rhs_(t + c5 * h, ytmp, k5);
            for (std::size_t i = 0; i < N; ++i)
                ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                      a65 * k5[i]);
            rhs_(t + h, ytmp, k6);
            for (std::size_t i = 0; i < N; ++i)
                ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                                      b6 * k6[i]);
            rhs_(t + h, ynew, k7);
            n_rhs_evals_ += 6;

            double err = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                yerr[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                               e7 * k7[i]);
                const double sc =
                    opts_.atol + opts_.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
                const double r = yerr[i] / sc;
                err += r * r;
            }
            err = std::sqrt(err / N);

            if (err <= 1.0) {
                // Accepted: serve dense output for samples inside (t, t+h].
                if (is < samples.size()) {
                    State r1, r2, r3, r4, r5;
                    for (std::size_t i = 0; i < N; ++i) {
                        const double dy = ynew[i] - y[i];
                        r1[i] = y[i];
                        r2[i] = dy;
                        r3[i] = h * k1[i] - dy;
                        r4[i] = dy - h * k7[i] - r3[i];
                        r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                                     d6 * k6[i] + d7 * k7[i]);
                    }
                    while (is < samples.size() && dir * (samples[is] - (t + h)) <= 0.0) {
                        const double th = (samples[is] - t) / h;
                        State ys;
                        for (std::size_t i = 0; i < N; ++i)
                            ys[i] = r1[i] +
                                    th * (r2[i] + (1.0 - th) *
                                                      (r3[i] + th * (r4[i] + (1.0 - th) * r5[i])));
                        on_sample(is, samples[is], ys);
                        ++is;
                    }
                }
                t += h;
                y = ynew;
                k1 = k7;  // FSAL
                const double fac = std::clamp(0.9 * std::pow(std::max(err, 1e-16), -0.2), 0.2, 10.0);
                h *= fac;
                if (std::abs(h) > opts_.max_step)
                    h = dir * opts_.max_step;
            } else {
                h *= std::max(0.9 * std::pow(err, -0.2), 0.2);
            }
        }
        while (is < samples.size() && dir * (samples[is] - t1) <= 0.0) {
            on_sample(is, samples[is], y);
            ++is;
        }
        return y;
    }

    State solve(double t0, State y0, double t1)
    {
        return solve(t0, y0, t1, {}, [](std::size_t, double, const State&) {});
    }

    /// Fixed-step variant (5th-order propagation, no error control); used for
    /// convergence-order checks.
    State solve_fixed(double t0, State y, double t1, int n_steps)
    {
        using namespace dopri5;
        const double h = (t1 - t0) / n_steps;
        State k1, k2, k3, k4, k5, k6, ytmp;
        for (int s = 0; s < n_steps; ++s) {
            const double t = t0 + s * h;
            rhs_(t, y, k1);
            for (std::size_t i = 0; i < N; ++i)
                ytmp[i] = y[i] + h * a21 * k1[i];
            rhs_(t + c2 * h, ytmp, k2);
            for (std::size_t i = 0; i < N; ++i)
                ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
            rhs_(t + c3 * h, ytmp, k3);
            for (std::size_t i = 0; i < N; ++i)
                ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
            rhs_(t + c4 * h, ytmp, k4);
            for (std::size_t i = 0; i < N; ++i)
                ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
            rhs_(t + c5 * h, ytmp, k5);
            for (std::size_t i = 0; i < N; ++i)
                ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                      a65 * k5[i]);
            rhs_(t + h, ytmp, k6);
            for (std::size_t i = 0; i < N; ++i)
                y[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        }
        return y;
    }

    long n_rhs_evals() const { return n_rhs_evals_; }

private:
    double initial_step(double t0, const State& y0, const State& f0, double interval)
    {
        double d0 = 0.0, d1 = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sc = opts_.atol + opts_.rtol * std::abs(y0[i]);
            d0 += (y0[i] / sc) * (y0[i] / sc);
            d1 += (f0[i] / sc) * (f0[i] / sc);
        }
        d0 = std::sqrt(d0 / N);
        d1 = std::sqrt(d1 / N);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, interval);

        State y1, f1;
        for (std::size_t i = 0; i < N; ++i)
            y1[i] = y0[i] + h0 * f0[i];
        rhs_(t0 + h0, y1, f1);
        ++n_rhs_evals_;
        double d2 = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sc = opts_.atol + opts_.rtol * std::abs(y0[i]);
            const double df = (f1[i] - f0[i]) / sc;
            d2 += df * df;
        }
        d2 = std::sqrt(d2 / N) / h0;

        const double dm = std::max(d1, d2);
        double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
        return std::min({100.0 * h0, h1, interval, opts_.max_step});
    }

    Rhs rhs_;
    Dopri5Options opts_;
    long n_rhs_evals_ = 0;
};

// ---------------------------------------------------------------------------
// Phonon equation right-hand side

/// (dphi/dt, d2phi/dt2) of the wave equation at state s and time t.
inline std::pair<double, double> rhs(const PhononState& s, double t, const ModelParams& params,
                                     const RampProfile& profile, const StepSeries& N_of_t)
{
    const double R = radius(profile, t);
    const double Nv = N_of_t(t);
    const double w = omega(params, R, Nv);
    const double g = params.zero_gamma ? 0.0 : w / (2.0 * quality_factor(params, R));
    const double friction = 2.0 * g + params.gamma_H * radius_rate(profile, t) / R;
    return {s.dphi_dt, -friction * s.dphi_dt - w * w * s.phi};
}

/// RHS functor with the atom number frozen (N is piecewise constant; the
/// drivers split the integration at its steps).
struct PhononRhs {
    const ModelParams* params;
    const RampProfile* profile;
    double N;

    void operator()(double t, const std::array<double, 2>& y, std::array<double, 2>& dy) const
    {
        const double R = radius(*profile, t);
        const double w = omega(*params, R, N);
        const double g = params->zero_gamma ? 0.0 : w / (2.0 * quality_factor(*params, R));
        const double friction = 2.0 * g + params->gamma_H * radius_rate(*profile, t) / R;
        dy[0] = y[1];
        dy[1] = -friction * y[1] - w * w * y[0];
    }
};

// ---------------------------------------------------------------------------
// Trajectory integration

struct Trajectory {
    std::vector<double> times;
    std::vector<double> phi;
    std::vector<double> dphi_dt;
    std::vector<double> dn;          ///< -R^alpha dphi/dt (no N output scaling)
    std::vector<double> omega_inst;  ///< omega(R(t), N(t))
};

/// Integrate the wave equation from init across t_grid (strictly increasing,
/// starting at or after init.t) and sample the dense solution onto the grid.
inline Trajectory integrate(const ModelParams& params, const RampProfile& profile,
                            const StepSeries& N_of_t, const PhononState& init,
                            std::span<const double> t_grid, Dopri5Options opts = {})
{
    params.validate();
    profile.validate();
    if (!init.finite())
        throw std::invalid_argument("integrate: initial state not finite");
    if (t_grid.empty())
        throw std::invalid_argument("integrate: empty time grid");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1]))
            throw std::invalid_argument("integrate: time grid must be strictly increasing");
    if (t_grid.front() < init.t)
        throw std::invalid_argument("integrate: grid starts before the initial state");

    Trajectory out;
    const std::size_t n = t_grid.size();
    out.times.assign(t_grid.begin(), t_grid.end());
    out.phi.resize(n);
    out.dphi_dt.resize(n);
    out.dn.resize(n);
    out.omega_inst.resize(n);

    std::array<double, 2> y{init.phi, init.dphi_dt};
    double t = init.t;
    std::size_t idx = 0;

    std::vector<double> edges = N_of_t.breakpoints(t, t_grid.back());
    edges.push_back(t_grid.back());

    for (double edge : edges) {
        std::size_t lo = idx;
        while (idx < n && t_grid[idx] <= edge)
            ++idx;
        std::span<const double> seg_samples = t_grid.subspan(lo, idx - lo);

        PhononRhs f{&params, &profile, N_of_t(0.5 * (t + edge))};
        Dopri5<2, PhononRhs> stepper(f, opts);
        y = stepper.solve(t, y, edge, seg_samples, [&](std::size_t k, double ts,
                                                       const std::array<double, 2>& ys) {
            out.phi[lo + k] = ys[0];
            out.dphi_dt[lo + k] = ys[1];
            const double R = radius(profile, ts);
            out.dn[lo + k] = density_from_phase(params, R, ys[1]);
            out.omega_inst[lo + k] = omega(params, R, N_of_t(ts));
        });
        t = edge;
    }

    if (!all_finite(out.phi) || !all_finite(out.dphi_dt))
        throw std::runtime_error("integrate: non-finite trajectory");
    return out;
}

// ---------------------------------------------------------------------------
// Closed-form oracle at constant radius

/// Underdamped constant-R solution through init; requires Q > 1/2.
inline PhononState analytic_constant_R(const ModelParams& params, double R, double N,
                                       const PhononState& init, double t)
{
    const double w = omega(params, R, N);
    double g = 0.0;
    if (!params.zero_gamma) {
        const double Q = quality_factor(params, R);
        if (Q <= 0.5)
            throw std::domain_error("overdamped unsupported");
        g = w / (2.0 * Q);
    }
    const double wd = std::sqrt(w * w - g * g);
    const double dt = t - init.t;
    const double ea = std::exp(-g * dt);
    const double cw = std::cos(wd * dt), sw = std::sin(wd * dt);
    const double B = (init.dphi_dt + g * init.phi) / wd;

    PhononState out;
    out.t = t;
    out.phi = ea * (init.phi * cw + B * sw);
    out.dphi_dt = ea * (init.dphi_dt * cw - (wd * init.phi + g * B) * sw);
    return out;
}

// ---------------------------------------------------------------------------
// Accumulated phase

/// phi_0 + integral of omega(t) over [0, t_end], by composite Simpson with
/// n_panels panels (split at atom-number steps).
inline double accumulated_phase(const ModelParams& params, const RampProfile& profile,
                                const StepSeries& N_of_t, double t_end, int n_panels = 10000)
{
    if (t_end < 0.0)
        throw std::invalid_argument("accumulated_phase: t_end must be >= 0");
    auto w = [&](double t) { return omega(params, radius(profile, t), N_of_t(t)); };
    return params.phi_0 + simpson_segmented(w, 0.0, t_end, N_of_t.breakpoints(0.0, t_end), n_panels);
}

// ---------------------------------------------------------------------------
// Wronskian first integral (gamma = 0)

/// W(t) V_rel(t) with W = phi_a dphi_b - phi_b dphi_a and
/// V_rel = (R(t)/R(t0))^gamma_H; constant in exact arithmetic when gamma = 0.
inline std::vector<double> wronskian_invariant(const ModelParams& params,
                                               const RampProfile& profile,
                                               const PhononState& init_a,
                                               const PhononState& init_b,
                                               std::span<const double> t_grid,
                                               Dopri5Options opts = {})
{
    if (!params.zero_gamma)
        throw std::invalid_argument("wronskian_invariant requires the gamma = 0 mode");
    if (init_a.t != init_b.t)
        throw std::invalid_argument("wronskian_invariant: initial states must share a time");

    const StepSeries N = StepSeries::constant(params.N_ref);
    const Trajectory a = integrate(params, profile, N, init_a, t_grid, opts);
    const Trajectory b = integrate(params, profile, N, init_b, t_grid, opts);

    const double R0 = radius(profile, init_a.t);
    std::vector<double> out(t_grid.size());
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        const double W = a.phi[i] * b.dphi_dt[i] - b.phi[i] * a.dphi_dt[i];
        const double V_rel = std::pow(radius(profile, t_grid[i]) / R0, params.gamma_H);
        out[i] = W * V_rel;
    }
    return out;
}

}  // namespace ringphonon
