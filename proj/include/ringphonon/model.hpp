#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ringphonon/numerics.hpp"

// Core physical model of an azimuthal phonon in a ring condensate whose
// radius follows an error-function schedule.
//
// Units: lengths in um, times in ms, speeds in um/ms, angular frequencies in
// rad/ms, angles in rad. Density-perturbation amplitudes carry rad^-1 um^alpha
// (the interaction constant is absorbed; only ratios and shapes matter).

namespace ringphonon {

// ---------------------------------------------------------------------------
// Radius ramp

/// Error-function radius schedule R(t), parameterized by the erf midpoint and
/// the 10%-90% rise time. The conventional ramp "start" metadata time is
/// t_i = t_mid - rise_10_90 / 2.
struct RampProfile {
    double R_start = 1.0;      ///< um
    double R_end = 1.0;        ///< um
    double t_mid = 0.0;        ///< ms, erf midpoint
    double rise_10_90 = 1.0;   ///< ms

    /// erf width parameter tau: R(t) = R_start + dR * (1 + erf((t-t_mid)/tau)) / 2.
    double width() const { return rise_10_90 / (2.0 * kErfInv08); }

    bool is_constant() const { return R_start == R_end; }

    double t_start() const { return t_mid - 0.5 * rise_10_90; }

    void validate() const
    {
        if (!(R_start > 0.0) || !(R_end > 0.0))
            throw std::invalid_argument("RampProfile: radii must be positive");
        if (!(rise_10_90 > 0.0))
            throw std::invalid_argument("RampProfile: rise_10_90 must be positive");
        if (!std::isfinite(width()))
            throw std::invalid_argument("RampProfile: width not finite");
    }
};

inline double radius(const RampProfile& p, double t)
{
    if (p.is_constant())
        return p.R_start;
    return p.R_start + (p.R_end - p.R_start) * 0.5 * (1.0 + std::erf((t - p.t_mid) / p.width()));
}

inline double radius_rate(const RampProfile& p, double t)
{
    if (p.is_constant())
        return 0.0;
    const double tau = p.width();
    const double z = (t - p.t_mid) / tau;
    return (p.R_end - p.R_start) / (tau * std::sqrt(kPi)) * std::exp(-z * z);
}

/// Logarithmic rate Rdot/R in 1/ms (the friction prefactor is applied later).
inline double hubble_rate(const RampProfile& p, double t)
{
    return radius_rate(p, t) / radius(p, t);
}

/// Time at which |Rdot/R| is maximal, located by golden-section search on
/// [t_mid - 4 tau, t_mid + 4 tau] to 1e-6 ms.
inline double peak_time(const RampProfile& p)
{
    if (p.is_constant())
        throw std::invalid_argument("peak_time: no ramp");
    const double tau = p.width();
    auto f = [&](double t) { return std::abs(hubble_rate(p, t)); };
    return golden_section_max(f, p.t_mid - 4.0 * tau, p.t_mid + 4.0 * tau, 1e-6);
}

// ---------------------------------------------------------------------------
// Step-interpolated series (piecewise constant between measurement times),
// used for per-trace relative atom number N(t).

class StepSeries {
public:
    StepSeries() : times_{0.0}, values_{1.0} {}

    StepSeries(std::vector<double> times, std::vector<double> values)
        : times_(std::move(times)), values_(std::move(values))
    {
        if (times_.empty() || times_.size() != values_.size())
            throw std::invalid_argument("StepSeries: need equally many times and values");
        for (std::size_t i = 1; i < times_.size(); ++i)
            if (!(times_[i] > times_[i - 1]))
                throw std::invalid_argument("StepSeries: times must be strictly increasing");
        for (double v : values_)
            if (!(v > 0.0) || !std::isfinite(v))
                throw std::invalid_argument("StepSeries: values must be positive and finite");
    }

    static StepSeries constant(double value) { return StepSeries({0.0}, {value}); }

    bool is_constant() const { return values_.size() == 1; }

    /// Value at time t; left-closed steps, clamped to the first/last value.
    double operator()(double t) const
    {
        if (t <= times_.front())
            return values_.front();
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
    }

    /// Step locations strictly inside (t0, t1) in increasing order.
    std::vector<double> breakpoints(double t0, double t1) const
    {
        std::vector<double> out;
        for (double t : times_)
            if (t > t0 && t < t1)
                out.push_back(t);
        return out;
    }

    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> times_;
    std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Model parameters

/// Physical and fit parameters of the phonon model. c_theta_i and Q_i/Q_f are
/// referenced to R_i_ref/R_f_ref; N_ref is the reference (relative) atom
/// number at which c_theta_i and dn_i are quoted.
struct ModelParams {
    double gamma_H = 0.0;    ///< Hubble-friction strength multiplying Rdot/R
    double alpha = 0.5;      ///< volume exponent, V ~ R^alpha
    double Q_i = 10.0;       ///< quality factor at R_i_ref
    double Q_f = 10.0;       ///< quality factor at R_f_ref
    double c_theta_i = 1.0;  ///< speed of sound at (R_i_ref, N_ref), um/ms
    double dn_i = 1.0;       ///< initial density-perturbation envelope
    double phi_0 = 0.0;      ///< initial temporal phase, rad
    double dtheta = 0.0;     ///< azimuthal offset, rad
    int m = 1;               ///< azimuthal mode number
    double R_i_ref = 1.0;    ///< um
    double R_f_ref = 1.0;    ///< um
    double N_ref = 1.0;      ///< reference relative atom number
    bool zero_gamma = false; ///< disable phenomenological damping (gamma = 0 mode)

    void validate() const
    {
        if (!(Q_i > 0.0) || !(Q_f > 0.0))
            throw std::invalid_argument("ModelParams: Q_i and Q_f must be positive");
        if (!(c_theta_i > 0.0))
            throw std::invalid_argument("ModelParams: c_theta_i must be positive");
        if (!(alpha > 0.0 && alpha < 2.0))
            throw std::invalid_argument("ModelParams: alpha must lie in (0, 2)");
        if (m < 1)
            throw std::invalid_argument("ModelParams: m must be >= 1");
        if (!std::isfinite(gamma_H))
            throw std::invalid_argument("ModelParams: gamma_H must be finite");
        if (!(R_i_ref > 0.0) || !(R_f_ref > 0.0) || !(N_ref > 0.0))
            throw std::invalid_argument("ModelParams: reference radii and N_ref must be positive");
    }
};

/// Instantaneous phonon state: phase-field amplitude and its time derivative.
struct PhononState {
    double phi = 0.0;       ///< rad
    double dphi_dt = 0.0;   ///< rad/ms
    double t = 0.0;         ///< ms

    bool finite() const
    {
        return std::isfinite(phi) && std::isfinite(dphi_dt) && std::isfinite(t);
    }
};

// ---------------------------------------------------------------------------
// Static scaling laws

/// c_theta = c_theta_i (R/R_i_ref)^(-alpha/2) (N/N_ref)^(alpha/2).
inline double speed_of_sound(const ModelParams& p, double R, double N)
{
    return p.c_theta_i * std::exp(0.5 * p.alpha * (std::log(N / p.N_ref) - std::log(R / p.R_i_ref)));
}

/// omega = m c_theta / R.
inline double omega(const ModelParams& p, double R, double N)
{
    return p.m * speed_of_sound(p, R, N) / R;
}

/// Q interpolated linearly in R between (R_i_ref, Q_i) and (R_f_ref, Q_f);
/// extrapolation is clamped at 0.5 from below, and a non-positive linear value
/// is rejected.
inline double quality_factor(const ModelParams& p, double R)
{
    double q = p.Q_i;
    if (p.R_i_ref != p.R_f_ref)
        q += (p.Q_f - p.Q_i) * (R - p.R_i_ref) / (p.R_f_ref - p.R_i_ref);
    if (!(q > 0.0))
        throw std::domain_error("invalid damping");
    return std::max(q, 0.5);
}

/// Phenomenological damping rate gamma = omega / (2 Q); zero in gamma=0 mode.
inline double damping_gamma(const ModelParams& p, double R, double N)
{
    if (p.zero_gamma)
        return 0.0;
    return omega(p, R, N) / (2.0 * quality_factor(p, R));
}

/// dn = -R^alpha dphi/dt (conversion constant fixed to one internal unit).
inline double density_from_phase(const ModelParams& p, double R, double dphi_dt)
{
    return -std::pow(R, p.alpha) * dphi_dt;
}

// ---------------------------------------------------------------------------
// Initial-condition convention.
//
// While the radius is still at its initial value the model's density
// perturbation is defined to follow the damped-oscillator reference
//
//     dn_unit(t) = dn_i exp(-gamma0 t) cos(omega_d0 t + phi_0),
//
// so dn_i is the envelope at t = 0 and phi_0 the temporal phase. The output
// perturbation additionally carries the observation-time scaling N(t)/N_ref.
// The state below reproduces dn_unit(0) and its derivative exactly for any
// profile (the ramp terms cancel when the ramp has not started).

struct QuadraturePair {
    double p = 0.0;  ///< dn_i cos(phi_0)
    double q = 0.0;  ///< dn_i sin(phi_0)
};

/// Phonon state at time t0 whose unit-density signal dn_u = -R^alpha dphi/dt
/// has value p and derivative -(gamma0 p + omega_d0 q) there.
inline PhononState state_from_quadrature(const ModelParams& params, const RampProfile& profile,
                                         double N0, const QuadraturePair& pq, double t0 = 0.0)
{
    const double R0 = radius(profile, t0);
    const double w0 = omega(params, R0, N0);
    const double g0 = damping_gamma(params, R0, N0);
    const double wd0 = std::sqrt(std::max(w0 * w0 - g0 * g0, 0.0));
    const double Ra = std::pow(R0, params.alpha);

    const double dn0 = pq.p;
    const double ddn0 = -(g0 * pq.p + wd0 * pq.q);

    const double dphi0 = -dn0 / Ra;
    const double rr = hubble_rate(profile, t0);
    const double phi0 =
        (ddn0 - Ra * dphi0 * (2.0 * g0 + (params.gamma_H - params.alpha) * rr)) / (Ra * w0 * w0);
    return PhononState{phi0, dphi0, t0};
}

/// Initial state realizing envelope dn_i and temporal phase phi_0 at t = 0.
inline PhononState initial_state(const ModelParams& params, const RampProfile& profile, double N0)
{
    return state_from_quadrature(params, profile, N0,
                                 QuadraturePair{params.dn_i * std::cos(params.phi_0),
                                                params.dn_i * std::sin(params.phi_0)});
}

}  // namespace ringphonon
