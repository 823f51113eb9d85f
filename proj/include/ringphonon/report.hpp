#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "ringphonon/fit.hpp"
#include "ringphonon/table.hpp"

// Human-readable and machine-readable fit reports.

namespace ringphonon {

inline std::vector<std::string> parameter_names(const ParamVector& pv)
{
    std::vector<std::string> names(kGlobalNames.begin(), kGlobalNames.end());
    auto push = [&](const std::vector<double>& v, const char* base) {
        if (v.size() == 1) {
            names.emplace_back(base);
        } else {
            for (std::size_t i = 0; i < v.size(); ++i)
                names.push_back(std::string(base) + "[" + std::to_string(i) + "]");
        }
    };
    push(pv.phi_0, "phi_0");
    push(pv.dtheta, "dtheta");
    if (!pv.n_scale.empty())
        for (std::size_t i = 0; i < pv.n_scale.size(); ++i)
            names.push_back("N_scale[" + std::to_string(i) + "]");
    return names;
}

inline std::vector<double> parameter_values(const ParamVector& pv)
{
    std::vector<double> v{pv.gamma_H, pv.alpha, pv.Q_i, pv.Q_f, pv.c_theta_i, pv.dn_i};
    v.insert(v.end(), pv.phi_0.begin(), pv.phi_0.end());
    v.insert(v.end(), pv.dtheta.begin(), pv.dtheta.end());
    v.insert(v.end(), pv.n_scale.begin(), pv.n_scale.end());
    return v;
}

inline json fit_result_to_json(const FitResult& fr)
{
    json j;
    j["variant"] = {{"index", fr.variant.index()},
                    {"share_phi0", fr.variant.share_phi0},
                    {"share_dtheta", fr.variant.share_dtheta},
                    {"time_resolved_N", fr.variant.time_resolved_N},
                    {"label", fr.variant.label()}};
    j["converged"] = fr.converged;
    j["chi2"] = fr.chi2;
    j["dof"] = fr.dof;
    j["chi2_per_dof"] = fr.chi2_per_dof();
    j["n_parameters"] = fr.n_parameters;
    j["n_evals"] = fr.n_evals;
    j["n_iterations"] = fr.n_iterations;
    const auto names = parameter_names(fr.best);
    const auto values = parameter_values(fr.best);
    json params = json::array();
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double sig = i < static_cast<std::size_t>(fr.covariance.rows())
                               ? std::sqrt(std::max(
                                     fr.covariance(static_cast<Eigen::Index>(i),
                                                   static_cast<Eigen::Index>(i)),
                                     0.0))
                               : 0.0;
        params.push_back({{"name", names[i]}, {"value", values[i]}, {"sigma", sig}});
    }
    j["parameters"] = params;
    return j;
}

inline void append_fit_result_text(std::ostringstream& os, const FitResult& fr)
{
    os << "variant: " << fr.variant.label() << "\n";
    os << "converged: " << (fr.converged ? "yes" : "no") << "\n";
    os << "chi2: " << format_double(fr.chi2, 10) << "\n";
    os << "dof: " << fr.dof << "  (residuals " << fr.dof + fr.n_parameters << " - parameters "
       << fr.n_parameters << ")\n";
    os << "chi2/dof: " << format_double(fr.chi2_per_dof(), 6) << "\n";
    const auto names = parameter_names(fr.best);
    const auto values = parameter_values(fr.best);
    os << "parameters (name value sigma):\n";
    char line[128];
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double sig = std::sqrt(std::max(
            fr.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)), 0.0));
        std::snprintf(line, sizeof(line), "  %-14s %-14s %s\n", names[i].c_str(),
                      format_double(values[i], 8).c_str(), format_double(sig, 4).c_str());
        os << line;
    }
}

inline std::string fit_report_text(const FitResult& fr)
{
    std::ostringstream os;
    os << "# global fit report\n";
    append_fit_result_text(os, fr);
    return os.str();
}

inline std::string ensemble_report_text(const FitEnsemble& ens)
{
    std::ostringstream os;
    os << "# ensemble fit report (8 variants)\n\n";
    os << "variant matrix (index label converged chi2/dof";
    for (const char* n : kGlobalNames)
        os << ' ' << n;
    os << "):\n";
    char line[256];
    for (const auto& fr : ens.per_variant) {
        const auto g = fr.best.globals();
        std::snprintf(line, sizeof(line),
                      "  %d  %-44s %-3s %-10s %-10s %-10s %-10s %-10s %-10s %s\n",
                      fr.variant.index(), fr.variant.label().c_str(),
                      fr.converged ? "yes" : "no",
                      format_double(fr.chi2_per_dof(), 6).c_str(),
                      format_double(g[0], 6).c_str(), format_double(g[1], 6).c_str(),
                      format_double(g[2], 6).c_str(), format_double(g[3], 6).c_str(),
                      format_double(g[4], 6).c_str(), format_double(g[5], 6).c_str());
        os << line;
    }
    os << "\ncombined globals (name mean combined_sigma):\n";
    for (std::size_t g = 0; g < 6; ++g) {
        std::snprintf(line, sizeof(line), "  %-10s %-14s %s\n", kGlobalNames[g],
                      format_double(ens.mean_globals[g], 8).c_str(),
                      format_double(ens.combined_sigma[g], 4).c_str());
        os << line;
    }
    os << "\nper-variant details:\n\n";
    for (const auto& fr : ens.per_variant) {
        append_fit_result_text(os, fr);
        os << "\n";
    }
    return os.str();
}

inline json ensemble_report_json(const FitEnsemble& ens)
{
    json j;
    j["variants"] = json::array();
    for (const auto& fr : ens.per_variant)
        j["variants"].push_back(fit_result_to_json(fr));
    json combined;
    for (std::size_t g = 0; g < 6; ++g)
        combined[kGlobalNames[g]] = {{"value", ens.mean_globals[g]},
                                     {"sigma", ens.combined_sigma[g]}};
    j["combined"] = combined;
    return j;
}

}  // namespace ringphonon
