#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ringphonon/lm.hpp"
#include "ringphonon/synth.hpp"

// Global shared-parameter fits of the phonon model to multi-trace datasets:
// per-slice sinusoid fits, the Levenberg-Marquardt global fit, the eight
// sharing variants and their uncertainty combination.

namespace ringphonon {

// ---------------------------------------------------------------------------
// Per-slice sinusoid fit

struct SliceFit {
    double amplitude = 0.0;  ///< non-negative
    double offset = 0.0;     ///< rad, in y = A sin(m theta + offset)
};

/// Closed-form linear least squares of y(theta) = a sin(m theta) + b cos(m theta);
/// amplitude = hypot(a, b), offset = atan2(b, a). An all-zero column returns
/// (0, 0) by convention.
inline SliceFit slice_fit(std::span<const double> y, std::span<const double> theta, int m = 1)
{
    if (y.size() < 3 || y.size() != theta.size())
        throw std::invalid_argument("slice_fit: need at least 3 theta bins");
    double ss = 0.0, cc = 0.0, sc = 0.0, sy = 0.0, cy = 0.0;
    bool all_zero = true;
    for (std::size_t j = 0; j < y.size(); ++j) {
        const double s = std::sin(m * theta[j]);
        const double c = std::cos(m * theta[j]);
        ss += s * s;
        cc += c * c;
        sc += s * c;
        sy += s * y[j];
        cy += c * y[j];
        all_zero = all_zero && y[j] == 0.0;
    }
    if (all_zero)
        return {0.0, 0.0};
    const double det = ss * cc - sc * sc;
    if (!(std::abs(det) > 1e-12 * std::max(ss * cc, 1.0)))
        throw std::invalid_argument("slice_fit: degenerate theta grid");
    const double a = (cc * sy - sc * cy) / det;
    const double b = (ss * cy - sc * sy) / det;
    return {std::hypot(a, b), std::atan2(b, a)};
}

inline SliceFit slice_fit_uniform(std::span<const double> y, int m = 1)
{
    std::vector<double> theta(y.size());
    for (std::size_t j = 0; j < y.size(); ++j)
        theta[j] = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(y.size());
    return slice_fit(y, theta, m);
}

/// Signed amplitude relative to a reference azimuthal offset: projects the
/// fitted sinusoid onto sin(m theta + dtheta_ref).
inline double signed_amplitude(const SliceFit& f, double dtheta_ref)
{
    return f.amplitude * std::cos(f.offset - dtheta_ref);
}

// ---------------------------------------------------------------------------
// Fit variants and the parameter vector

/// One of the eight fit bookkeeping variants: whether the temporal phase and
/// azimuthal offset are shared across traces, and whether the atom number is
/// the measured series or a fitted per-trace constant.
struct FitVariant {
    bool share_phi0 = true;
    bool share_dtheta = true;
    bool time_resolved_N = true;

    static std::array<FitVariant, 8> all()
    {
        std::array<FitVariant, 8> v{};
        for (int i = 0; i < 8; ++i)
            v[static_cast<std::size_t>(i)] =
                FitVariant{(i & 1) == 0, (i & 2) == 0, (i & 4) == 0};
        return v;
    }

    int index() const
    {
        return (share_phi0 ? 0 : 1) | (share_dtheta ? 0 : 2) | (time_resolved_N ? 0 : 4);
    }

    std::string label() const
    {
        std::string s = "phi0=";
        s += share_phi0 ? "shared" : "per-trace";
        s += " dtheta=";
        s += share_dtheta ? "shared" : "per-trace";
        s += " N=";
        s += time_resolved_N ? "series" : "fitted";
        return s;
    }
};

inline constexpr std::array<const char*, 6> kGlobalNames = {"gamma_H", "alpha",     "Q_i",
                                                            "Q_f",     "c_theta_i", "dn_i"};

/// Fit parameters: six globals plus per-trace (or shared) phases/offsets and,
/// when the atom number is fitted, one relative-N scalar per trace.
struct ParamVector {
    double gamma_H = 0.0;
    double alpha = 0.5;
    double Q_i = 5.0;
    double Q_f = 5.0;
    double c_theta_i = 1.0;
    double dn_i = 1.0;
    std::vector<double> phi_0;    ///< size 1 if shared, else n_traces
    std::vector<double> dtheta;   ///< size 1 if shared, else n_traces
    std::vector<double> n_scale;  ///< empty if time-resolved, else n_traces

    double phi0_of(std::size_t trace) const { return phi_0.size() == 1 ? phi_0[0] : phi_0.at(trace); }
    double dtheta_of(std::size_t trace) const
    {
        return dtheta.size() == 1 ? dtheta[0] : dtheta.at(trace);
    }

    std::array<double, 6> globals() const { return {gamma_H, alpha, Q_i, Q_f, c_theta_i, dn_i}; }
};

// ---------------------------------------------------------------------------
// Global fit problem

class GlobalFitProblem {
public:
    GlobalFitProblem(const Dataset& ds, FitVariant variant, PropagateOptions popts = {})
        : ds_(&ds), variant_(variant), popts_(popts)
    {
        if (ds.traces.empty())
            throw std::invalid_argument("GlobalFitProblem: empty dataset");
        m_ = ds.generator.is_object() && ds.generator.contains("m")
                 ? ds.generator["m"].get<int>()
                 : 1;
        n_traces_ = ds.traces.size();
        n_phi_ = variant.share_phi0 ? 1 : n_traces_;
        n_dth_ = variant.share_dtheta ? 1 : n_traces_;
        n_nsc_ = variant.time_resolved_N ? 0 : n_traces_;
        n_params_ = 6 + n_phi_ + n_dth_ + n_nsc_;
        n_residuals_ = 0;
        for (const auto& tr : ds.traces)
            n_residuals_ += static_cast<std::size_t>(tr.dn.size());
        if (static_cast<long>(n_residuals_) - static_cast<long>(n_params_) <= 0)
            throw std::invalid_argument("overparameterized");
    }

    std::size_t n_traces() const { return n_traces_; }
    Eigen::Index n_parameters() const { return static_cast<Eigen::Index>(n_params_); }
    Eigen::Index n_residuals() const { return static_cast<Eigen::Index>(n_residuals_); }
    const FitVariant& variant() const { return variant_; }

    Eigen::VectorXd pack(const ParamVector& pv) const
    {
        Eigen::VectorXd x(n_parameters());
        x[0] = pv.gamma_H;
        x[1] = pv.alpha;
        x[2] = pv.Q_i;
        x[3] = pv.Q_f;
        x[4] = pv.c_theta_i;
        x[5] = pv.dn_i;
        Eigen::Index c = 6;
        for (std::size_t i = 0; i < n_phi_; ++i)
            x[c++] = pv.phi_0.size() == n_phi_ ? pv.phi_0[i] : pv.phi0_of(i);
        for (std::size_t i = 0; i < n_dth_; ++i)
            x[c++] = pv.dtheta.size() == n_dth_ ? pv.dtheta[i] : pv.dtheta_of(i);
        for (std::size_t i = 0; i < n_nsc_; ++i)
            x[c++] = i < pv.n_scale.size() ? pv.n_scale[i] : 1.0;
        return x;
    }

    ParamVector unpack(const Eigen::VectorXd& x) const
    {
        ParamVector pv;
        pv.gamma_H = x[0];
        pv.alpha = x[1];
        pv.Q_i = x[2];
        pv.Q_f = x[3];
        pv.c_theta_i = x[4];
        pv.dn_i = x[5];
        Eigen::Index c = 6;
        pv.phi_0.assign(x.data() + c, x.data() + c + static_cast<Eigen::Index>(n_phi_));
        c += static_cast<Eigen::Index>(n_phi_);
        pv.dtheta.assign(x.data() + c, x.data() + c + static_cast<Eigen::Index>(n_dth_));
        c += static_cast<Eigen::Index>(n_dth_);
        pv.n_scale.assign(x.data() + c, x.data() + c + static_cast<Eigen::Index>(n_nsc_));
        return pv;
    }

    void bounds(Eigen::VectorXd& lb, Eigen::VectorXd& ub) const
    {
        lb.resize(n_parameters());
        ub.resize(n_parameters());
        lb[0] = -2.0;  ub[0] = 3.0;    // gamma_H
        lb[1] = 0.2;   ub[1] = 1.5;    // alpha
        lb[2] = 0.5;   ub[2] = 50.0;   // Q_i
        lb[3] = 0.5;   ub[3] = 50.0;   // Q_f
        lb[4] = 0.05;  ub[4] = 200.0;  // c_theta_i
        lb[5] = 1e-4;  ub[5] = 1e4;    // dn_i
        Eigen::Index c = 6;
        for (std::size_t i = 0; i < n_phi_ + n_dth_; ++i, ++c) {
            lb[c] = -2.0 * kPi;
            ub[c] = 2.0 * kPi;
        }
        for (std::size_t i = 0; i < n_nsc_; ++i, ++c) {
            lb[c] = 0.2;
            ub[c] = 5.0;
        }
    }

    std::string parameter_name(Eigen::Index c) const
    {
        if (c < 6)
            return kGlobalNames[static_cast<std::size_t>(c)];
        c -= 6;
        auto suffix = [&](std::size_t n, const char* base) {
            return n == 1 ? std::string(base)
                          : std::string(base) + "[" + std::to_string(c) + "]";
        };
        if (c < static_cast<Eigen::Index>(n_phi_))
            return suffix(n_phi_, "phi_0");
        c -= static_cast<Eigen::Index>(n_phi_);
        if (c < static_cast<Eigen::Index>(n_dth_))
            return suffix(n_dth_, "dtheta");
        c -= static_cast<Eigen::Index>(n_dth_);
        return "N_scale[" + std::to_string(c) + "]";
    }

    /// Model parameters seen by trace i under pv.
    ModelParams trace_params(const ParamVector& pv, std::size_t i) const
    {
        ModelParams p;
        p.gamma_H = pv.gamma_H;
        p.alpha = pv.alpha;
        p.Q_i = pv.Q_i;
        p.Q_f = pv.Q_f;
        p.c_theta_i = pv.c_theta_i;
        p.dn_i = pv.dn_i;
        p.phi_0 = pv.phi0_of(i);
        p.dtheta = pv.dtheta_of(i);
        p.m = m_;
        p.R_i_ref = ds_->R_i_ref;
        p.R_f_ref = ds_->R_f_ref;
        p.N_ref = ds_->N_ref;
        return p;
    }

    StepSeries trace_atom_series(const ParamVector& pv, std::size_t i) const
    {
        if (variant_.time_resolved_N)
            return ds_->traces[i].spec.N_series;
        return StepSeries::constant(pv.n_scale.at(i) * ds_->N_ref);
    }

    /// Envelope signal dn(t_k) for trace i (before the theta expansion).
    std::vector<double> trace_signal(const ParamVector& pv, std::size_t i) const
    {
        const Trace& tr = ds_->traces[i];
        return model_dn(trace_params(pv, i), tr.spec.profile, trace_atom_series(pv, i),
                        tr.spec.t_samples, popts_);
    }

    /// Residual block of trace i (model - data), row-major over (t_k, theta_j).
    void trace_residual(const ParamVector& pv, std::size_t i, double* out) const
    {
        const Trace& tr = ds_->traces[i];
        const std::vector<double> s = trace_signal(pv, i);
        expand_minus_data(tr, s, pv.dtheta_of(i), out);
    }

    Eigen::VectorXd residuals(const Eigen::VectorXd& x) const
    {
        const ParamVector pv = unpack(x);
        Eigen::VectorXd r(n_residuals());
        std::size_t off = 0;
        for (std::size_t i = 0; i < n_traces_; ++i) {
            trace_residual(pv, i, r.data() + off);
            off += static_cast<std::size_t>(ds_->traces[i].dn.size());
        }
        return r;
    }

    /// Jacobian exploiting model structure: the signal is exactly linear in
    /// dn_i and the azimuthal offset enters only the theta expansion, so those
    /// columns are analytic; the remaining columns are forward differences
    /// (relative step 1e-6, floor 1e-8, one-sided inward at a bound).
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const
    {
        const ParamVector pv = unpack(x);
        Eigen::VectorXd lb, ub;
        bounds(lb, ub);

        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n_residuals(), n_parameters());
        std::vector<std::vector<double>> base(n_traces_);
        std::vector<std::size_t> offset(n_traces_);
        std::size_t off = 0;
        for (std::size_t i = 0; i < n_traces_; ++i) {
            base[i] = trace_signal(pv, i);
            offset[i] = off;
            off += static_cast<std::size_t>(ds_->traces[i].dn.size());
        }

        for (Eigen::Index c = 0; c < n_parameters(); ++c) {
            if (c == 5) {  // dn_i: signal scales linearly
                for (std::size_t i = 0; i < n_traces_; ++i)
                    fill_theta_expansion(i, base[i], pv.dtheta_of(i), 1.0 / pv.dn_i,
                                         J.col(c).data() + offset[i]);
                continue;
            }
            const auto [kind, trace] = classify(c);
            if (kind == ParamKind::dtheta) {
                for (std::size_t i = 0; i < n_traces_; ++i) {
                    if (!variant_.share_dtheta && i != trace)
                        continue;
                    fill_theta_derivative(i, base[i], pv.dtheta_of(i),
                                          J.col(c).data() + offset[i]);
                }
                continue;
            }
            // Forward difference on the affected traces.
            double step = std::max(1e-6 * std::abs(x[c]), 1e-8);
            double sign = 1.0;
            if (x[c] + step > ub[c]) {
                sign = -1.0;  // one-sided difference inward
            }
            Eigen::VectorXd xp = x;
            xp[c] += sign * step;
            const ParamVector pvp = unpack(xp);
            for (std::size_t i = 0; i < n_traces_; ++i) {
                if (kind == ParamKind::per_trace && i != trace)
                    continue;
                const std::vector<double> sp = trace_signal(pvp, i);
                std::vector<double> ds(sp.size());
                for (std::size_t k = 0; k < sp.size(); ++k)
                    ds[k] = (sp[k] - base[i][k]) / (sign * step);
                fill_theta_expansion(i, ds, pvp.dtheta_of(i), 1.0, J.col(c).data() + offset[i]);
            }
        }
        return J;
    }

    /// Moment-style starting point assembled from per-slice fits.
    ParamVector initial_guess() const;

private:
    enum class ParamKind { global, dtheta, per_trace };

    /// Which traces a flat parameter touches: globals touch all, dtheta is
    /// handled analytically, phi_0/N_scale touch one trace unless shared.
    std::pair<ParamKind, std::size_t> classify(Eigen::Index c) const
    {
        if (c < 6)
            return {ParamKind::global, 0};
        std::size_t k = static_cast<std::size_t>(c) - 6;
        if (k < n_phi_)
            return {variant_.share_phi0 ? ParamKind::global : ParamKind::per_trace, k};
        k -= n_phi_;
        if (k < n_dth_)
            return {ParamKind::dtheta, k};
        k -= n_dth_;
        return {ParamKind::per_trace, k};
    }

    void expand_minus_data(const Trace& tr, const std::vector<double>& s, double dth,
                           double* out) const
    {
        const int nt = static_cast<int>(tr.dn.rows());
        const int nj = static_cast<int>(tr.dn.cols());
        std::vector<double> sins(static_cast<std::size_t>(nj));
        for (int j = 0; j < nj; ++j)
            sins[static_cast<std::size_t>(j)] = std::sin(m_ * tr.spec.theta(j) + dth);
        for (int k = 0; k < nt; ++k)
            for (int j = 0; j < nj; ++j)
                out[k * nj + j] = s[static_cast<std::size_t>(k)] * sins[static_cast<std::size_t>(j)] -
                                  tr.dn(k, j);
    }

    void fill_theta_expansion(std::size_t i, const std::vector<double>& s, double dth,
                              double scale, double* out) const
    {
        const Trace& tr = ds_->traces[i];
        const int nt = static_cast<int>(tr.dn.rows());
        const int nj = static_cast<int>(tr.dn.cols());
        for (int k = 0; k < nt; ++k)
            for (int j = 0; j < nj; ++j)
                out[k * nj + j] = scale * s[static_cast<std::size_t>(k)] *
                                  std::sin(m_ * tr.spec.theta(j) + dth);
    }

    void fill_theta_derivative(std::size_t i, const std::vector<double>& s, double dth,
                               double* out) const
    {
        const Trace& tr = ds_->traces[i];
        const int nt = static_cast<int>(tr.dn.rows());
        const int nj = static_cast<int>(tr.dn.cols());
        for (int k = 0; k < nt; ++k)
            for (int j = 0; j < nj; ++j)
                out[k * nj + j] = s[static_cast<std::size_t>(k)] *
                                  std::cos(m_ * tr.spec.theta(j) + dth);
    }

    const Dataset* ds_;
    FitVariant variant_;
    PropagateOptions popts_;
    int m_ = 1;
    std::size_t n_traces_ = 0, n_phi_ = 0, n_dth_ = 0, n_nsc_ = 0;
    std::size_t n_params_ = 0, n_residuals_ = 0;
};

/// Residual vector of the model against the dataset under a sharing variant.
inline Eigen::VectorXd residuals(const ParamVector& pv, const Dataset& ds, FitVariant variant,
                                 const PropagateOptions& popts = {})
{
    GlobalFitProblem prob(ds, variant, popts);
    return prob.residuals(prob.pack(pv));
}

/// Plain forward-difference Jacobian (relative step 1e-6, absolute floor
/// 1e-8; one-sided inward at a bound). Tied parameters produce one column.
inline Eigen::MatrixXd numeric_jacobian(const ParamVector& pv, const Dataset& ds,
                                        FitVariant variant, const PropagateOptions& popts = {})
{
    GlobalFitProblem prob(ds, variant, popts);
    Eigen::VectorXd lb, ub;
    prob.bounds(lb, ub);
    return finite_difference_jacobian([&](const Eigen::VectorXd& x) { return prob.residuals(x); },
                                      prob.pack(pv), lb, ub);
}

// ---------------------------------------------------------------------------
// Fit results

struct FitResult {
    FitVariant variant;
    ParamVector best;
    Eigen::MatrixXd covariance;
    double chi2 = 0.0;
    int dof = 0;
    bool converged = false;
    int n_evals = 0;
    int n_iterations = 0;
    int n_parameters = 0;
    std::array<double, 6> global_sigma{};

    double chi2_per_dof() const { return dof > 0 ? chi2 / dof : 0.0; }
};

struct FitEnsemble {
    std::vector<FitResult> per_variant;
    std::array<double, 6> mean_globals{};
    std::array<double, 6> combined_sigma{};  ///< quadrature of variant spread and mean 1-sigma
};

inline FitResult global_fit(const Dataset& ds, FitVariant variant,
                            const std::optional<ParamVector>& pv0 = std::nullopt,
                            const PropagateOptions& popts = {}, const LmOptions& lm_opts = {})
{
    GlobalFitProblem prob(ds, variant, popts);
    const ParamVector start = pv0 ? *pv0 : prob.initial_guess();
    Eigen::VectorXd lb, ub;
    prob.bounds(lb, ub);

    const LmResult lm = levenberg_marquardt(
        [&](const Eigen::VectorXd& x) { return prob.residuals(x); },
        [&](const Eigen::VectorXd& x) { return prob.jacobian(x); }, prob.pack(start), lb, ub,
        lm_opts);

    FitResult out;
    out.variant = variant;
    out.best = prob.unpack(lm.x);
    out.covariance = lm.covariance;
    out.chi2 = lm.chi2;
    out.dof = lm.dof;
    out.converged = lm.converged;
    out.n_evals = lm.n_evals;
    out.n_iterations = lm.n_iterations;
    out.n_parameters = static_cast<int>(prob.n_parameters());
    for (int g = 0; g < 6; ++g)
        out.global_sigma[static_cast<std::size_t>(g)] =
            std::sqrt(std::max(lm.covariance(g, g), 0.0));
    return out;
}

/// Runs all eight variants and combines them: per global parameter the mean
/// across variants, with the sample standard deviation over variants added in
/// quadrature to the mean per-variant 1-sigma.
inline FitEnsemble ensemble_fit(const Dataset& ds,
                                const std::optional<ParamVector>& pv0 = std::nullopt,
                                const PropagateOptions& popts = {}, const LmOptions& lm_opts = {})
{
    FitEnsemble ens;
    for (const FitVariant& v : FitVariant::all())
        ens.per_variant.push_back(global_fit(ds, v, pv0, popts, lm_opts));

    const std::size_t nv = ens.per_variant.size();
    for (std::size_t g = 0; g < 6; ++g) {
        double mean = 0.0, mean_sigma = 0.0;
        for (const auto& fr : ens.per_variant) {
            mean += fr.best.globals()[g];
            mean_sigma += fr.global_sigma[g];
        }
        mean /= static_cast<double>(nv);
        mean_sigma /= static_cast<double>(nv);
        double var = 0.0;
        for (const auto& fr : ens.per_variant) {
            const double d = fr.best.globals()[g] - mean;
            var += d * d;
        }
        var /= static_cast<double>(nv - 1);
        ens.mean_globals[g] = mean;
        ens.combined_sigma[g] = std::sqrt(var + mean_sigma * mean_sigma);
    }
    return ens;
}

}  // namespace ringphonon

#include "ringphonon/fit_init.hpp"
