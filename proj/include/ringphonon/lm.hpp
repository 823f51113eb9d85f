#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

// Levenberg-Marquardt least squares with projected box bounds.
//
// Damping schedule: lambda starts at 1e-3, x10 on a rejected step, /10 on an
// accepted one. Convergence: relative cost decrease < 1e-12 over three
// consecutive accepted steps, or gradient infinity-norm < 1e-10. The
// covariance reported at the solution is chi2/dof (J^T J)^-1.

namespace ringphonon {

struct LmOptions {
    double lambda_init = 1e-3;
    double lambda_factor = 10.0;
    double lambda_min = 1e-14;
    double lambda_max = 1e14;
    int max_iterations = 500;
    double cost_tol = 1e-12;
    int cost_tol_hits = 3;
    double grad_tol = 1e-10;
};

struct LmResult {
    Eigen::VectorXd x;
    Eigen::MatrixXd covariance;
    double chi2 = 0.0;
    int dof = 0;
    bool converged = false;
    int n_evals = 0;                      ///< residual evaluations
    int n_iterations = 0;                 ///< accepted steps
    std::vector<double> accepted_costs;   ///< cost after each accepted step
};

namespace detail {

inline Eigen::VectorXd clamp_box(Eigen::VectorXd x, const Eigen::VectorXd& lb,
                                 const Eigen::VectorXd& ub)
{
    for (Eigen::Index i = 0; i < x.size(); ++i)
        x[i] = std::min(std::max(x[i], lb[i]), ub[i]);
    return x;
}

inline double cost_of(const Eigen::VectorXd& r)
{
    if (!r.allFinite())
        return std::numeric_limits<double>::infinity();
    return r.squaredNorm();
}

/// chi2/dof (J^T J)^+ by eigendecomposition; directions with eigenvalues
/// below 1e-10 of the largest (exactly tied or gauge-degenerate parameter
/// combinations) are excluded rather than amplified.
inline Eigen::MatrixXd covariance_at(const Eigen::MatrixXd& J, double chi2, int dof)
{
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(JtJ);
    const auto& ev = es.eigenvalues();
    const double cut = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::VectorXd inv_ev = Eigen::VectorXd::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] > cut)
            inv_ev[i] = 1.0 / ev[i];
    const Eigen::MatrixXd inv =
        es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();
    const double scale = dof > 0 ? chi2 / dof : 1.0;
    Eigen::MatrixXd cov = scale * inv;
    cov = 0.5 * (cov + cov.transpose()).eval();
    return cov;
}

}  // namespace detail

/// Forward-difference Jacobian with relative step 1e-6 (absolute floor 1e-8);
/// parameters at their upper bound difference one-sided inward.
inline Eigen::MatrixXd finite_difference_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual_fn,
    const Eigen::VectorXd& x, const Eigen::VectorXd& lb, const Eigen::VectorXd& ub)
{
    const Eigen::VectorXd r0 = residual_fn(x);
    Eigen::MatrixXd J(r0.size(), x.size());
    for (Eigen::Index c = 0; c < x.size(); ++c) {
        const double step = std::max(1e-6 * std::abs(x[c]), 1e-8);
        const double sign = x[c] + step > ub[c] ? -1.0 : 1.0;
        Eigen::VectorXd xp = x;
        xp[c] += sign * step;
        if (xp[c] < lb[c])
            throw std::invalid_argument("finite_difference_jacobian: box narrower than the step");
        J.col(c) = (residual_fn(xp) - r0) / (sign * step);
    }
    return J;
}

/// Minimize |r(x)|^2 subject to lb <= x <= ub.
/// residual_fn: VectorXd -> VectorXd, jacobian_fn: VectorXd -> MatrixXd.
inline LmResult levenberg_marquardt(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual_fn,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& jacobian_fn,
    Eigen::VectorXd x0, const Eigen::VectorXd& lb, const Eigen::VectorXd& ub,
    const LmOptions& opts = {})
{
    if (x0.size() != lb.size() || x0.size() != ub.size())
        throw std::invalid_argument("levenberg_marquardt: bound size mismatch");
    for (Eigen::Index i = 0; i < x0.size(); ++i)
        if (!(lb[i] <= ub[i]))
            throw std::invalid_argument("levenberg_marquardt: empty box");

    LmResult res;
    Eigen::VectorXd x = detail::clamp_box(std::move(x0), lb, ub);
    Eigen::VectorXd r = residual_fn(x);
    ++res.n_evals;
    double cost = detail::cost_of(r);
    if (!std::isfinite(cost))
        throw std::runtime_error("levenberg_marquardt: initial point not evaluable");

    Eigen::MatrixXd J = jacobian_fn(x);
    double lambda = opts.lambda_init;
    int flat_hits = 0;

    const int n = static_cast<int>(x.size());
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        const Eigen::VectorXd g = J.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
            res.converged = true;
            break;
        }
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        Eigen::VectorXd diag = JtJ.diagonal().cwiseMax(1e-12);

        bool accepted = false;
        while (!accepted && lambda <= opts.lambda_max) {
            Eigen::MatrixXd A = JtJ;
            A.diagonal() += lambda * diag;
            const Eigen::VectorXd step = A.ldlt().solve(-g);
            const Eigen::VectorXd x_new = detail::clamp_box(x + step, lb, ub);
            const Eigen::VectorXd r_new = residual_fn(x_new);
            ++res.n_evals;
            const double cost_new = detail::cost_of(r_new);

            if (cost_new < cost) {
                const double rel_drop = (cost - cost_new) / std::max(cost, 1e-300);
                x = x_new;
                r = r_new;
                cost = cost_new;
                lambda = std::max(lambda / opts.lambda_factor, opts.lambda_min);
                accepted = true;
                ++res.n_iterations;
                res.accepted_costs.push_back(cost);
                flat_hits = rel_drop < opts.cost_tol ? flat_hits + 1 : 0;
                J = jacobian_fn(x);
            } else {
                lambda *= opts.lambda_factor;
            }
        }
        if (!accepted) {
            // Even the steepest-descent-like step at maximal damping cannot
            // decrease the cost: the iterate is at a numerical minimum.
            res.converged = true;
            break;
        }
        if (flat_hits >= opts.cost_tol_hits) {
            res.converged = true;
            break;
        }
    }

    res.x = x;
    res.chi2 = cost;
    res.dof = static_cast<int>(r.size()) - n;
    res.covariance = detail::covariance_at(J, res.chi2, res.dof);
    return res;
}

}  // namespace ringphonon
