#pragma once

#include <string>

#include <json.hpp>

#include "ringphonon/model.hpp"

// JSON (de)serialization of the core types. Field names match the type
// definitions one to one.

namespace ringphonon {

using json = nlohmann::ordered_json;

inline json to_json(const RampProfile& p)
{
    return json{{"R_start", p.R_start},
                {"R_end", p.R_end},
                {"t_mid", p.t_mid},
                {"rise_10_90", p.rise_10_90}};
}

inline RampProfile ramp_profile_from_json(const json& j)
{
    RampProfile p;
    p.R_start = j.at("R_start").get<double>();
    p.R_end = j.at("R_end").get<double>();
    p.t_mid = j.at("t_mid").get<double>();
    p.rise_10_90 = j.at("rise_10_90").get<double>();
    p.validate();
    return p;
}

inline json to_json(const ModelParams& p)
{
    return json{{"gamma_H", p.gamma_H},
                {"alpha", p.alpha},
                {"Q_i", p.Q_i},
                {"Q_f", p.Q_f},
                {"c_theta_i", p.c_theta_i},
                {"dn_i", p.dn_i},
                {"phi_0", p.phi_0},
                {"dtheta", p.dtheta},
                {"m", p.m},
                {"R_i_ref", p.R_i_ref},
                {"R_f_ref", p.R_f_ref},
                {"N_ref", p.N_ref},
                {"zero_gamma", p.zero_gamma}};
}

inline ModelParams model_params_from_json(const json& j)
{
    ModelParams p;
    p.gamma_H = j.at("gamma_H").get<double>();
    p.alpha = j.at("alpha").get<double>();
    p.Q_i = j.at("Q_i").get<double>();
    p.Q_f = j.at("Q_f").get<double>();
    p.c_theta_i = j.at("c_theta_i").get<double>();
    p.dn_i = j.at("dn_i").get<double>();
    p.phi_0 = j.at("phi_0").get<double>();
    p.dtheta = j.at("dtheta").get<double>();
    p.m = j.at("m").get<int>();
    p.R_i_ref = j.at("R_i_ref").get<double>();
    p.R_f_ref = j.value("R_f_ref", p.R_i_ref);
    p.N_ref = j.value("N_ref", 1.0);
    p.zero_gamma = j.value("zero_gamma", false);
    p.validate();
    return p;
}

inline json to_json(const StepSeries& s)
{
    return json{{"times", s.times()}, {"values", s.values()}};
}

inline StepSeries step_series_from_json(const json& j)
{
    return StepSeries(j.at("times").get<std::vector<double>>(),
                      j.at("values").get<std::vector<double>>());
}

}  // namespace ringphonon
