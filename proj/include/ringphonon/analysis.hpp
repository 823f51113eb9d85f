#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ringphonon/fit.hpp"
#include "ringphonon/integrator.hpp"
#include "ringphonon/propagate.hpp"

// Amplitude extraction and phase-dependence analysis: the amplitude ratio
// A_f/A_i across a ramp as a function of the phonon's temporal phase at peak
// friction, plus the slow-ramp (adiabatic) reference.

namespace ringphonon {

struct AmplitudeEstimate {
    double value = 0.0;
    double sigma = 0.0;
    int n_points = 0;
};

struct PhaseSweepPoint {
    double phi_peak = 0.0;     ///< rad
    double ratio = 0.0;        ///< A_f / A_i
    double ratio_sigma = 0.0;
    double t_i = 0.0;          ///< ramp-start metadata time, ms
};

/// Time at which the ramp has covered the given fraction of its swing.
inline double ramp_completion_time(const RampProfile& p, double fraction)
{
    if (p.is_constant())
        throw std::invalid_argument("ramp_completion_time: no ramp");
    return p.t_mid + p.width() * inverse_erf(2.0 * fraction - 1.0);
}

namespace analysis_detail {

/// Integral of the damped oscillation frequency at fixed radius R across
/// [a, b], exact over the piecewise-constant atom-number segments.
inline double damped_phase_integral(const ModelParams& globals, double R,
                                    const StepSeries& N_of_t, double gamma_f, double a, double b)
{
    if (a == b)
        return 0.0;
    const double sgn = b >= a ? 1.0 : -1.0;
    const double lo = std::min(a, b), hi = std::max(a, b);
    std::vector<double> edges = N_of_t.breakpoints(lo, hi);
    edges.push_back(hi);
    double acc = 0.0, t = lo;
    for (double e : edges) {
        const double w = omega(globals, R, N_of_t(0.5 * (t + e)));
        acc += std::sqrt(std::max(w * w - gamma_f * gamma_f, 0.0)) * (e - t);
        t = e;
    }
    return sgn * acc;
}

}  // namespace analysis_detail

/// Fits the post-ramp oscillation to A exp(-gamma_f (t - t_peak)) cos(Theta + psi)
/// with (A, psi) free; gamma_f and the frequency come from the globals at the
/// final radius, so A is the envelope extrapolated back to t_peak. Input is
/// the signed dn series on `times`; only samples inside [window_lo, window_hi]
/// are used (at least five required).
inline AmplitudeEstimate final_amplitude(std::span<const double> times,
                                         std::span<const double> signed_dn,
                                         const ModelParams& globals, const RampProfile& profile,
                                         const StepSeries& N_of_t, double window_lo,
                                         double window_hi)
{
    if (times.size() != signed_dn.size())
        throw std::invalid_argument("final_amplitude: size mismatch");
    const double t_peak = peak_time(profile);
    const double R_f = profile.R_end;
    const double gamma_f = damping_gamma(globals, R_f, N_of_t(window_lo));

    double cc = 0.0, ss = 0.0, cs = 0.0, cy = 0.0, sy = 0.0;
    std::vector<double> b1s, b2s, ys;
    double theta_acc = 0.0, t_prev = t_peak;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double t = times[k];
        if (t < window_lo || t > window_hi)
            continue;
        theta_acc += analysis_detail::damped_phase_integral(globals, R_f, N_of_t, gamma_f,
                                                            t_prev, t);
        t_prev = t;
        const double env = std::exp(-gamma_f * (t - t_peak));
        const double b1 = env * std::cos(theta_acc);
        const double b2 = -env * std::sin(theta_acc);
        cc += b1 * b1;
        ss += b2 * b2;
        cs += b1 * b2;
        cy += b1 * signed_dn[k];
        sy += b2 * signed_dn[k];
        b1s.push_back(b1);
        b2s.push_back(b2);
        ys.push_back(signed_dn[k]);
    }
    const int n = static_cast<int>(ys.size());
    if (n < 5)
        throw std::invalid_argument("insufficient data");

    const double det = cc * ss - cs * cs;
    if (!(std::abs(det) > 1e-14 * std::max(cc * ss, 1.0)))
        throw std::runtime_error("final_amplitude: degenerate window basis");
    const double a = (ss * cy - cs * sy) / det;
    const double b = (cc * sy - cs * cy) / det;
    const double A = std::hypot(a, b);

    double rss = 0.0;
    for (int k = 0; k < n; ++k) {
        const double r = ys[static_cast<std::size_t>(k)] -
                         a * b1s[static_cast<std::size_t>(k)] - b * b2s[static_cast<std::size_t>(k)];
        rss += r * r;
    }
    const double s2 = rss / std::max(n - 2, 1);
    // covariance of (a, b) = s2 * inv([[cc, cs], [cs, ss]])
    const double va = s2 * ss / det, vb = s2 * cc / det, vab = -s2 * cs / det;
    double sigma = 0.0;
    if (A > 0.0)
        sigma = std::sqrt(std::max(
            (a * a * va + 2.0 * a * b * vab + b * b * vb) / (A * A), 0.0));
    else
        sigma = std::sqrt(std::max(0.5 * (va + vb), 0.0));

    return AmplitudeEstimate{A, sigma, n};
}

/// Convenience overload: slice-fits each in-window time slice of a trace
/// matrix and sign-resolves against dtheta_ref before the window fit.
inline AmplitudeEstimate final_amplitude(const Trace& tr, const ModelParams& globals,
                                         double dtheta_ref, double window_lo, double window_hi)
{
    std::vector<double> theta(static_cast<std::size_t>(tr.spec.theta_bins));
    for (int j = 0; j < tr.spec.theta_bins; ++j)
        theta[static_cast<std::size_t>(j)] = tr.spec.theta(j);
    std::vector<double> signed_dn(tr.spec.t_samples.size());
    for (Eigen::Index k = 0; k < tr.dn.rows(); ++k) {
        std::vector<double> row(tr.dn.cols());
        for (Eigen::Index j = 0; j < tr.dn.cols(); ++j)
            row[static_cast<std::size_t>(j)] = tr.dn(k, j);
        signed_dn[static_cast<std::size_t>(k)] =
            signed_amplitude(slice_fit(row, theta, globals.m), dtheta_ref);
    }
    return final_amplitude(tr.spec.t_samples, signed_dn, globals, tr.spec.profile,
                           tr.spec.N_series, window_lo, window_hi);
}

/// Envelope the phonon would have had at t_peak absent the ramp: the pre-ramp
/// decaying envelope extrapolated with the damping at the start radius.
inline double initial_amplitude(const ModelParams& globals, const RampProfile& profile,
                                const StepSeries& N_of_t)
{
    const double t_peak = peak_time(profile);
    const double N0 = N_of_t(0.0);
    const double gamma_i = damping_gamma(globals, profile.R_start, N0);
    return globals.dn_i * N0 / globals.N_ref * std::exp(-gamma_i * t_peak);
}

// ---------------------------------------------------------------------------
// Phase sweeps

struct SweepOptions {
    bool zero_gamma = false;      ///< disable phenomenological damping (theory curves)
    double window_periods = 4.0;  ///< post-ramp fit window length
    int samples_per_period = 24;  ///< dense sampling of the model trace
    double ramp_done_fraction = 0.99;
    /// When positive, the window instead starts at t_mid + sigmas * tau; slow
    /// ramps need this since their 99% point still sits far from R_end.
    double window_start_sigmas = 0.0;
    PropagateOptions prop{};
};

/// Amplitude ratio across the ramp for one schedule; the model trace is
/// evaluated densely in the post-ramp window.
inline PhaseSweepPoint sweep_point(const ModelParams& params_in, const RampProfile& profile,
                                   const SweepOptions& opts = {})
{
    ModelParams p = params_in;
    if (opts.zero_gamma)
        p.zero_gamma = true;
    const StepSeries N = StepSeries::constant(p.N_ref);

    const double t_peak = peak_time(profile);
    const double w_f = omega(p, profile.R_end, p.N_ref);
    const double w0 = opts.window_start_sigmas > 0.0
                          ? profile.t_mid + opts.window_start_sigmas * profile.width()
                          : ramp_completion_time(profile, opts.ramp_done_fraction);
    const double w1 = w0 + opts.window_periods * 2.0 * kPi / w_f;

    const int n = static_cast<int>(opts.window_periods * opts.samples_per_period) + 1;
    std::vector<double> grid(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        grid[static_cast<std::size_t>(k)] = w0 + (w1 - w0) * k / (n - 1);

    const std::vector<double> dn = model_dn(p, profile, N, grid, opts.prop);
    const AmplitudeEstimate af = final_amplitude(grid, dn, p, profile, N, w0, w1);
    const double ai = initial_amplitude(p, profile, N);

    PhaseSweepPoint pt;
    pt.phi_peak = accumulated_phase(p, profile, N, t_peak);
    pt.ratio = af.value / ai;
    pt.ratio_sigma = af.sigma / ai;
    pt.t_i = profile.t_start();
    return pt;
}

/// Sweep over ramp-start times t_i (t_mid = t_i + rise/2), phase-shifting the
/// phonon by omega_i * t_i while keeping phi_0 fixed.
inline std::vector<PhaseSweepPoint> phase_sweep(const ModelParams& params,
                                                const RampProfile& tmpl,
                                                std::span<const double> t_i_list,
                                                const SweepOptions& opts = {})
{
    if (t_i_list.empty())
        throw std::invalid_argument("phase_sweep: empty sweep list");
    std::vector<PhaseSweepPoint> out;
    out.reserve(t_i_list.size());
    for (double t_i : t_i_list) {
        RampProfile prof = tmpl;
        prof.t_mid = t_i + 0.5 * tmpl.rise_10_90;
        out.push_back(sweep_point(params, prof, opts));
    }
    return out;
}

/// Sweep dialing the initial temporal phase directly at a fixed schedule.
inline std::vector<PhaseSweepPoint> phase_sweep_phi0(const ModelParams& params,
                                                     const RampProfile& tmpl, double t_i,
                                                     std::span<const double> phi0_list,
                                                     const SweepOptions& opts = {})
{
    if (phi0_list.empty())
        throw std::invalid_argument("phase_sweep: empty sweep list");
    RampProfile prof = tmpl;
    prof.t_mid = t_i + 0.5 * tmpl.rise_10_90;
    std::vector<PhaseSweepPoint> out;
    out.reserve(phi0_list.size());
    for (double phi0 : phi0_list) {
        ModelParams p = params;
        p.phi_0 = phi0;
        out.push_back(sweep_point(p, prof, opts));
    }
    return out;
}

/// Sweep hitting prescribed phi_peak values by inverting the (exactly linear)
/// dependence of phi_peak on t_i.
inline std::vector<PhaseSweepPoint> phase_sweep_phi_peak(const ModelParams& params,
                                                         const RampProfile& tmpl,
                                                         std::span<const double> phi_peak_targets,
                                                         const SweepOptions& opts = {})
{
    if (phi_peak_targets.empty())
        throw std::invalid_argument("phase_sweep: empty sweep list");
    ModelParams p = params;
    if (opts.zero_gamma)
        p.zero_gamma = true;
    const StepSeries N = StepSeries::constant(p.N_ref);
    const double w_i = omega(p, tmpl.R_start, p.N_ref);
    // Earliest t_i keeping the whole ramp window after t = 0.
    const double t_i_min = 6.0 * tmpl.width() - 0.5 * tmpl.rise_10_90;

    RampProfile anchor = tmpl;
    const double t_i_anchor = std::max(t_i_min + 1.0, 1.0);
    anchor.t_mid = t_i_anchor + 0.5 * tmpl.rise_10_90;
    const double phi_anchor = accumulated_phase(p, anchor, N, peak_time(anchor));

    std::vector<double> t_is;
    t_is.reserve(phi_peak_targets.size());
    for (double target : phi_peak_targets) {
        const double t_i = t_i_anchor + (target - phi_anchor) / w_i;
        if (t_i < t_i_min)
            throw std::invalid_argument("phase_sweep: phi_peak target below reachable range");
        t_is.push_back(t_i);
    }
    return phase_sweep(params, tmpl, t_is, opts);
}

// ---------------------------------------------------------------------------
// Adiabatic reference and curve families

struct AdiabaticOptions {
    double periods = 100.0;  ///< slow-ramp duration in units of the longest period
    SweepOptions sweep{};
};

/// Amplitude ratio for a slow (adiabatic) undamped ramp between the reference
/// radii; independent of the temporal phase and matching the invariant
/// scaling (R_f/R_i)^((alpha-2)/4) when gamma_H = alpha.
inline PhaseSweepPoint adiabatic_reference(const ModelParams& params,
                                           const AdiabaticOptions& opts = {})
{
    ModelParams p = params;
    p.zero_gamma = true;

    const double w_i = omega(p, p.R_i_ref, p.N_ref);
    const double w_f = omega(p, p.R_f_ref, p.N_ref);
    const double T_slow = 2.0 * kPi / std::min(w_i, w_f);

    RampProfile prof;
    prof.R_start = p.R_i_ref;
    prof.R_end = p.R_f_ref;
    prof.rise_10_90 = opts.periods * T_slow;
    prof.t_mid = 6.0 * prof.width() + 2.0 * T_slow;

    SweepOptions so = opts.sweep;
    so.zero_gamma = true;
    if (so.window_start_sigmas <= 0.0)
        so.window_start_sigmas = 5.0;
    return sweep_point(p, prof, so);
}

struct GainCurve {
    double gamma_H = 0.0;
    std::vector<PhaseSweepPoint> points;
};

/// Ratio curves versus phi_peak for a family of friction strengths on a
/// uniform phi_peak grid covering [pi, 3 pi].
inline std::vector<GainCurve> gain_curve_family(const ModelParams& params,
                                                const RampProfile& tmpl,
                                                std::span<const double> gamma_H_list,
                                                int n_points = 200, SweepOptions opts = {})
{
    if (gamma_H_list.empty())
        throw std::invalid_argument("gain_curve_family: empty gamma_H list");
    std::vector<double> grid(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i)
        grid[static_cast<std::size_t>(i)] = kPi + 2.0 * kPi * i / (n_points - 1);

    std::vector<GainCurve> out;
    out.reserve(gamma_H_list.size());
    for (double gh : gamma_H_list) {
        ModelParams p = params;
        p.gamma_H = gh;
        out.push_back(GainCurve{gh, phase_sweep_phi_peak(p, tmpl, grid, opts)});
    }
    return out;
}

}  // namespace ringphonon
