#pragma once

// Moment-style starting point for the global fit, assembled from per-slice
// sinusoid fits: the sound speed and alpha come from the oscillation
// frequencies of the constant-R traces, Q from log-envelope decay, amplitudes
// and phases from the pre-ramp samples.

#include <cmath>
#include <numeric>
#include <vector>

namespace ringphonon {

namespace init_detail {

struct TraceMoments {
    double dtheta = 0.0;
    std::vector<double> signed_dn;  ///< amplitude projected on sin(m theta + dtheta)
    double N0 = 1.0;
};

inline double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

/// Offset angle mod pi via the doubled-angle mean, weighted by amplitude^2.
inline double offset_estimate(const std::vector<SliceFit>& fits)
{
    double cs = 0.0, sn = 0.0;
    for (const auto& f : fits) {
        const double w = f.amplitude * f.amplitude;
        cs += w * std::cos(2.0 * f.offset);
        sn += w * std::sin(2.0 * f.offset);
    }
    if (cs == 0.0 && sn == 0.0)
        return 0.0;
    return 0.5 * std::atan2(sn, cs);
}

/// Angular frequency from the sign changes of a sampled sinusoid, using
/// linearly interpolated crossing times.
inline double crossing_frequency(std::span<const double> t, const std::vector<double>& s)
{
    std::vector<double> crossings;
    for (std::size_t k = 1; k < s.size(); ++k) {
        if ((s[k] >= 0.0) != (s[k - 1] >= 0.0)) {
            const double f = s[k - 1] / (s[k - 1] - s[k]);
            crossings.push_back(t[k - 1] + f * (t[k] - t[k - 1]));
        }
    }
    if (crossings.size() < 2)
        return 0.0;
    return kPi * static_cast<double>(crossings.size() - 1) /
           (crossings.back() - crossings.front());
}

/// Decay rate from the RMS of the first versus second half of the series.
inline double rms_decay_rate(std::span<const double> t, const std::vector<double>& s)
{
    const std::size_t n = s.size(), h = n / 2;
    if (h < 2)
        return 1e-4;
    double r1 = 0.0, r2 = 0.0, t1 = 0.0, t2 = 0.0;
    for (std::size_t k = 0; k < h; ++k) {
        r1 += s[k] * s[k];
        t1 += t[k];
    }
    for (std::size_t k = h; k < n; ++k) {
        r2 += s[k] * s[k];
        t2 += t[k];
    }
    r1 = std::sqrt(r1 / h);
    r2 = std::sqrt(r2 / (n - h));
    t1 /= static_cast<double>(h);
    t2 /= static_cast<double>(n - h);
    if (!(r1 > 0.0) || !(r2 > 0.0) || !(t2 > t1))
        return 1e-4;
    return clampd(0.5 * std::log(r1 * r1 / (r2 * r2)) / (t2 - t1), 1e-5, 10.0);
}

/// Envelope at the first sample: sqrt(2) x decay-corrected RMS over the first
/// window_span of the series.
inline double early_envelope(std::span<const double> t, const std::vector<double>& s,
                             double window_span, double decay_rate)
{
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < s.size() && (t[k] - t.front() <= window_span || n < 4); ++k) {
        const double undecayed = s[k] * std::exp(decay_rate * (t[k] - t.front()));
        acc += undecayed * undecayed;
        ++n;
    }
    return n ? std::sqrt(2.0 * acc / static_cast<double>(n)) : 0.0;
}

/// Temporal phase of s ~ E exp(-g t) cos(wd t + phi0) by linear least squares.
inline double phase_estimate(std::span<const double> t, const std::vector<double>& s,
                             double w, double g, double t_limit)
{
    const double wd = std::sqrt(std::max(w * w - g * g, 1e-12));
    double cc = 0.0, ss = 0.0, cs = 0.0, cy = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < s.size() && (t[k] <= t_limit || n < 4); ++k) {
        const double e = std::exp(-g * (t[k] - t.front()));
        const double bc = e * std::cos(wd * (t[k] - t.front()));
        const double bs = -e * std::sin(wd * (t[k] - t.front()));
        cc += bc * bc;
        ss += bs * bs;
        cs += bc * bs;
        cy += bc * s[k];
        sy += bs * s[k];
        ++n;
    }
    const double det = cc * ss - cs * cs;
    if (!(std::abs(det) > 1e-14))
        return 0.0;
    const double a = (ss * cy - cs * sy) / det;
    const double b = (cc * sy - cs * cy) / det;
    if (a == 0.0 && b == 0.0)
        return 0.0;
    return std::atan2(b, a);
}

inline double median(std::vector<double> v)
{
    if (v.empty())
        return 0.0;
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

}  // namespace init_detail

inline ParamVector GlobalFitProblem::initial_guess() const
{
    using namespace init_detail;
    const std::size_t n = n_traces_;

    std::vector<TraceMoments> mom(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Trace& tr = ds_->traces[i];
        std::vector<SliceFit> fits(static_cast<std::size_t>(tr.dn.rows()));
        std::vector<double> theta(static_cast<std::size_t>(tr.spec.theta_bins));
        for (int j = 0; j < tr.spec.theta_bins; ++j)
            theta[static_cast<std::size_t>(j)] = tr.spec.theta(j);
        for (Eigen::Index k = 0; k < tr.dn.rows(); ++k) {
            std::vector<double> row(tr.dn.cols());
            for (Eigen::Index j = 0; j < tr.dn.cols(); ++j)
                row[static_cast<std::size_t>(j)] = tr.dn(k, j);
            fits[static_cast<std::size_t>(k)] = slice_fit(row, theta, m_);
        }
        mom[i].dtheta = offset_estimate(fits);
        mom[i].signed_dn.resize(fits.size());
        for (std::size_t k = 0; k < fits.size(); ++k)
            mom[i].signed_dn[k] = signed_amplitude(fits[k], mom[i].dtheta);
        mom[i].N0 = tr.spec.N_series(tr.spec.t_samples.front());
    }

    // Constant-R traces pin the frequency scaling and the damping.
    std::vector<double> lnR, lnW, radii, Qs;
    for (std::size_t i = 0; i < n; ++i) {
        const Trace& tr = ds_->traces[i];
        if (!tr.spec.profile.is_constant())
            continue;
        const double w_meas = crossing_frequency(tr.spec.t_samples, mom[i].signed_dn);
        if (!(w_meas > 0.0))
            continue;
        const double g = rms_decay_rate(tr.spec.t_samples, mom[i].signed_dn);
        const double q = clampd(w_meas / (2.0 * g), 0.6, 45.0);
        // crossings measure the damped frequency; undo sqrt(1 - 1/(4 Q^2))
        const double w = w_meas / std::sqrt(1.0 - 1.0 / (4.0 * q * q));
        lnR.push_back(std::log(tr.spec.profile.R_start));
        lnW.push_back(std::log(w));
        radii.push_back(tr.spec.profile.R_start);
        Qs.push_back(q);
    }

    double alpha = 0.5;
    if (lnR.size() >= 2) {
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        const double cnt = static_cast<double>(lnR.size());
        for (std::size_t k = 0; k < lnR.size(); ++k) {
            sx += lnR[k];
            sy += lnW[k];
            sxx += lnR[k] * lnR[k];
            sxy += lnR[k] * lnW[k];
        }
        const double slope = (cnt * sxy - sx * sy) / std::max(cnt * sxx - sx * sx, 1e-12);
        alpha = clampd(-2.0 * (slope + 1.0), 0.25, 1.4);
    }

    std::vector<double> c_est;
    for (std::size_t k = 0; k < radii.size(); ++k) {
        const double R = radii[k];
        const double w = std::exp(lnW[k]);
        c_est.push_back(w * R * std::pow(R / ds_->R_i_ref, 0.5 * alpha));
    }
    double c_i = c_est.empty() ? 1.0 : median(c_est);

    double Q_at_Ri = 8.0, Q_at_Rf = 8.0;
    if (radii.size() >= 2) {
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        const double cnt = static_cast<double>(radii.size());
        for (std::size_t k = 0; k < radii.size(); ++k) {
            sx += radii[k];
            sy += Qs[k];
            sxx += radii[k] * radii[k];
            sxy += radii[k] * Qs[k];
        }
        const double slope = (cnt * sxy - sx * sy) / std::max(cnt * sxx - sx * sx, 1e-12);
        const double icpt = (sy - slope * sx) / cnt;
        Q_at_Ri = clampd(icpt + slope * ds_->R_i_ref, 0.6, 45.0);
        Q_at_Rf = clampd(icpt + slope * ds_->R_f_ref, 0.6, 45.0);
    } else if (!Qs.empty()) {
        Q_at_Ri = Q_at_Rf = Qs.front();
    }

    // Fallback when the dataset carries no usable constant-R trace: take the
    // frequency of the first trace's pre-ramp stretch at its start radius.
    if (c_est.empty()) {
        const Trace& tr = ds_->traces.front();
        const double w = crossing_frequency(tr.spec.t_samples, mom[0].signed_dn);
        if (w > 0.0) {
            const double R = tr.spec.profile.R_start;
            c_i = w * R * std::pow(R / ds_->R_i_ref, 0.5 * alpha);
        }
    }

    ParamVector pv;
    pv.alpha = alpha;
    pv.gamma_H = alpha;  // theory start: friction strength equal to alpha
    pv.Q_i = Q_at_Ri;
    pv.Q_f = Q_at_Rf;
    pv.c_theta_i = clampd(c_i, 0.05, 200.0);

    ModelParams probe;
    probe.alpha = pv.alpha;
    probe.c_theta_i = pv.c_theta_i;
    probe.Q_i = pv.Q_i;
    probe.Q_f = pv.Q_f;
    probe.R_i_ref = ds_->R_i_ref;
    probe.R_f_ref = ds_->R_f_ref;
    probe.N_ref = ds_->N_ref;
    probe.m = m_;

    std::vector<double> dn_est(n), phi_est(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Trace& tr = ds_->traces[i];
        const double R0 = tr.spec.profile.R_start;
        const double w0 = omega(probe, R0, mom[i].N0);
        const double g0 = w0 / (2.0 * quality_factor(probe, R0));
        const double period = 2.0 * kPi / w0;
        const double pre_span = tr.spec.profile.is_constant()
                                    ? 1.5 * period
                                    : std::max(tr.spec.profile.t_start() -
                                                   tr.spec.t_samples.front(),
                                               0.0);
        const double est_span = std::min(std::max(pre_span, 0.5 * period), 1.5 * period);
        const double env = early_envelope(tr.spec.t_samples, mom[i].signed_dn, est_span, g0);
        dn_est[i] = env * ds_->N_ref / mom[i].N0;
        phi_est[i] = phase_estimate(tr.spec.t_samples, mom[i].signed_dn, w0, g0, est_span);
    }
    pv.dn_i = clampd(median(dn_est), 1e-4, 1e4);

    auto circ_mean = [](const std::vector<double>& a) {
        double c = 0.0, s = 0.0;
        for (double x : a) {
            c += std::cos(x);
            s += std::sin(x);
        }
        return (c == 0.0 && s == 0.0) ? 0.0 : std::atan2(s, c);
    };

    if (variant_.share_phi0) {
        pv.phi_0 = {circ_mean(phi_est)};
    } else {
        pv.phi_0 = phi_est;
    }
    if (variant_.share_dtheta) {
        std::vector<double> dts(n);
        for (std::size_t i = 0; i < n; ++i)
            dts[i] = mom[i].dtheta;
        pv.dtheta = {circ_mean(dts)};
    } else {
        pv.dtheta.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            pv.dtheta[i] = mom[i].dtheta;
    }
    if (!variant_.time_resolved_N) {
        pv.n_scale.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& vals = ds_->traces[i].spec.N_series.values();
            const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) /
                                static_cast<double>(vals.size());
            pv.n_scale[i] = clampd(mean / ds_->N_ref, 0.2, 5.0);
        }
    }
    return pv;
}

}  // namespace ringphonon
