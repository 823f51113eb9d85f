#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ringphonon/model.hpp"
#include "ringphonon/propagate.hpp"
#include "ringphonon/rng.hpp"
#include "ringphonon/serialize.hpp"
#include "ringphonon/table.hpp"

// Synthetic multi-trace datasets: angular density-perturbation matrices
// dn_1D(theta_j, t_k) with per-trace ramp schedule, atom-number series and
// Gaussian measurement noise.

namespace ringphonon {

enum class TraceKind { expansion, contraction, constant_R };

inline std::string to_string(TraceKind k)
{
    switch (k) {
        case TraceKind::expansion: return "expansion";
        case TraceKind::contraction: return "contraction";
        default: return "constant-R";
    }
}

inline TraceKind trace_kind_from_string(const std::string& s)
{
    if (s == "expansion")
        return TraceKind::expansion;
    if (s == "contraction")
        return TraceKind::contraction;
    if (s == "constant-R")
        return TraceKind::constant_R;
    throw std::invalid_argument("unknown trace kind: " + s);
}

struct TraceSpec {
    std::string id;
    TraceKind kind = TraceKind::constant_R;
    RampProfile profile;
    std::vector<double> t_samples;
    int theta_bins = 64;
    StepSeries N_series;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    void validate() const
    {
        profile.validate();
        if (theta_bins < 8)
            throw std::invalid_argument("TraceSpec: theta_bins must be >= 8");
        if (t_samples.empty())
            throw std::invalid_argument("TraceSpec: empty sample grid");
        for (std::size_t i = 1; i < t_samples.size(); ++i)
            if (!(t_samples[i] > t_samples[i - 1]))
                throw std::invalid_argument("TraceSpec: t_samples must be increasing");
        if (noise_sigma < 0.0)
            throw std::invalid_argument("TraceSpec: noise_sigma must be >= 0");
    }

    double theta(int j) const { return 2.0 * kPi * j / theta_bins; }
};

/// One synthetic trace: rows are sample times, columns are theta bins.
struct Trace {
    TraceSpec spec;
    Eigen::MatrixXd dn;
};

struct Dataset {
    std::vector<Trace> traces;
    double R_i_ref = 1.0;
    double R_f_ref = 1.0;
    double N_ref = 1.0;
    json generator;  ///< provenance: generating parameters, when synthetic

    const Trace& trace(std::size_t i) const { return traces.at(i); }
    std::size_t n_traces() const { return traces.size(); }

    std::size_t n_cells() const
    {
        std::size_t n = 0;
        for (const auto& tr : traces)
            n += static_cast<std::size_t>(tr.dn.rows()) * static_cast<std::size_t>(tr.dn.cols());
        return n;
    }
};

// ---------------------------------------------------------------------------
// Forward model

/// Noiseless trace matrix dn_1D[t_k, theta_j] = dn(t_k) sin(m theta_j + dtheta).
inline Eigen::MatrixXd forward_trace(const ModelParams& params, const TraceSpec& spec,
                                     const PropagateOptions& opts = {})
{
    params.validate();
    spec.validate();
    const std::vector<double> dn = model_dn(params, spec.profile, spec.N_series, spec.t_samples, opts);

    const int nt = static_cast<int>(spec.t_samples.size());
    Eigen::MatrixXd out(nt, spec.theta_bins);
    for (int j = 0; j < spec.theta_bins; ++j) {
        const double s = std::sin(params.m * spec.theta(j) + params.dtheta);
        for (int k = 0; k < nt; ++k)
            out(k, j) = dn[static_cast<std::size_t>(k)] * s;
    }
    return out;
}

/// Adds independent Gaussian noise per cell, keyed by (seed, trace, j, k);
/// sigma = 0 returns the input bit-identically.
inline Eigen::MatrixXd add_noise(const Eigen::MatrixXd& m, double noise_sigma, std::uint64_t seed,
                                 std::uint64_t trace_index = 0)
{
    if (noise_sigma < 0.0)
        throw std::invalid_argument("add_noise: noise_sigma must be >= 0");
    if (noise_sigma == 0.0)
        return m;
    Eigen::MatrixXd out = m;
    for (int k = 0; k < m.rows(); ++k)
        for (int j = 0; j < m.cols(); ++j)
            out(k, j) += noise_sigma * gaussian_at(seed, trace_index, static_cast<std::uint64_t>(j),
                                                   static_cast<std::uint64_t>(k));
    return out;
}

/// Builds a dataset from explicit trace specs; trace i draws noise from
/// stream (seed, i).
inline Dataset build_dataset(const ModelParams& params, std::vector<TraceSpec> specs,
                             std::uint64_t seed, const PropagateOptions& opts = {})
{
    if (specs.empty())
        throw std::invalid_argument("build_dataset: no trace specs");
    std::set<std::string> ids;
    for (const auto& s : specs)
        if (!ids.insert(s.id).second)
            throw std::invalid_argument("build_dataset: duplicate trace id " + s.id);

    Dataset ds;
    ds.R_i_ref = params.R_i_ref;
    ds.R_f_ref = params.R_f_ref;
    ds.N_ref = params.N_ref;
    ds.generator = to_json(params);
    ds.traces.reserve(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        TraceSpec spec = std::move(specs[i]);
        spec.seed = seed;
        Eigen::MatrixXd m = forward_trace(params, spec, opts);
        m = add_noise(m, spec.noise_sigma, seed, i);
        ds.traces.push_back(Trace{std::move(spec), std::move(m)});
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Presets

struct PresetOptions {
    int theta_bins = 64;
    int n_time_samples = 45;
    double t_max = 150.0;        ///< ms
    double rise_10_90 = 3.6;     ///< ms
    double noise_rel = 0.05;     ///< noise sigma as a fraction of dn_i
    double ramp_N_loss = 0.10;   ///< relative atom loss across the ramp
    double N_drift = 0.05;       ///< linear atom-number drift across the dataset
    std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<double> linspace(double a, double b, int n)
{
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = a;
        return v;
    }
    for (int i = 0; i < n; ++i)
        v[i] = a + (b - a) * i / (n - 1);
    return v;
}

/// Atom number for a ramped trace, recorded per sample time: N_pre before the
/// ramp, reaching N_pre (1 - loss) at the end of the trace. Loss accrues both
/// during the ramp (half, tracking ramp progress) and after it (half, linear
/// in time), matching how atoms are lost in practice.
inline StepSeries ramp_atom_series(const RampProfile& prof, std::span<const double> t_samples,
                                   double N_pre, double loss)
{
    std::vector<double> times(t_samples.begin(), t_samples.end());
    std::vector<double> values(times.size());
    const double t_done = prof.is_constant()
                              ? times.front()
                              : prof.t_mid + prof.width() * inverse_erf(0.98);
    const double t_tail = std::max(times.back() - t_done, 1e-9);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double progress =
            prof.is_constant() ? 0.0
                               : (radius(prof, times[i]) - prof.R_start) / (prof.R_end - prof.R_start);
        const double after = std::clamp((times[i] - t_done) / t_tail, 0.0, 1.0);
        values[i] = N_pre * (1.0 - loss * 0.5 * (progress + after));
    }
    return StepSeries(std::move(times), std::move(values));
}

}  // namespace detail

/// The two bundled reference compositions:
///   "paper-contraction": 17 contractions (t_i spread over 27..70 ms) plus 7
///                        constant-R traces, 24 traces total;
///   "paper-expansion":   11 expansions (t_i 6.5..23 ms) plus the same 7
///                        constant-R traces, 18 traces total.
/// Constant-R radii are evenly spaced between the reference radii. t_i is the
/// ramp-start metadata time, t_mid = t_i + rise/2.
inline Dataset build_preset_dataset(std::string_view preset, const ModelParams& params,
                                    const PresetOptions& opt = {},
                                    const PropagateOptions& prop = {})
{
    params.validate();
    bool contraction;
    if (preset == "paper-contraction")
        contraction = true;
    else if (preset == "paper-expansion")
        contraction = false;
    else
        throw std::invalid_argument("unknown preset: " + std::string(preset));

    const int n_ramped = contraction ? 17 : 11;
    const std::vector<double> t_i_list =
        contraction ? detail::linspace(27.0, 70.0, n_ramped) : detail::linspace(6.5, 23.0, n_ramped);
    const double R_lo = std::min(params.R_i_ref, params.R_f_ref);
    const double R_hi = std::max(params.R_i_ref, params.R_f_ref);
    const std::vector<double> const_radii = detail::linspace(R_lo, R_hi, 7);
    const std::vector<double> t_samples = detail::linspace(0.0, opt.t_max, opt.n_time_samples);

    const int n_total = n_ramped + 7;
    std::vector<TraceSpec> specs;
    specs.reserve(n_total);
    int index = 0;
    auto n_pre = [&](int i) {
        return n_total == 1 ? 1.0 : 1.0 + opt.N_drift * (2.0 * i / (n_total - 1) - 1.0);
    };

    char buf[64];
    for (int i = 0; i < n_ramped; ++i, ++index) {
        TraceSpec s;
        std::snprintf(buf, sizeof(buf), "%s-%02d", contraction ? "contraction" : "expansion", i);
        s.id = buf;
        s.kind = contraction ? TraceKind::contraction : TraceKind::expansion;
        s.profile = RampProfile{params.R_i_ref, params.R_f_ref, t_i_list[i] + 0.5 * opt.rise_10_90,
                                opt.rise_10_90};
        s.t_samples = t_samples;
        s.theta_bins = opt.theta_bins;
        s.N_series = detail::ramp_atom_series(s.profile, t_samples, n_pre(index), opt.ramp_N_loss);
        s.noise_sigma = opt.noise_rel * params.dn_i;
        specs.push_back(std::move(s));
    }
    for (int i = 0; i < 7; ++i, ++index) {
        TraceSpec s;
        std::snprintf(buf, sizeof(buf), "constant-%02d", i);
        s.id = buf;
        s.kind = TraceKind::constant_R;
        s.profile = RampProfile{const_radii[i], const_radii[i], 0.0, opt.rise_10_90};
        s.t_samples = t_samples;
        s.theta_bins = opt.theta_bins;
        s.N_series = StepSeries::constant(n_pre(index));
        s.noise_sigma = opt.noise_rel * params.dn_i;
        specs.push_back(std::move(s));
    }
    return build_dataset(params, std::move(specs), opt.seed, prop);
}

// ---------------------------------------------------------------------------
// Persistence: manifest.json plus one matrix file per trace.

inline json to_json(const TraceSpec& s)
{
    return json{{"id", s.id},
                {"kind", to_string(s.kind)},
                {"profile", to_json(s.profile)},
                {"t_samples", s.t_samples},
                {"theta_bins", s.theta_bins},
                {"N_series", to_json(s.N_series)},
                {"noise_sigma", s.noise_sigma},
                {"seed", s.seed}};
}

inline TraceSpec trace_spec_from_json(const json& j)
{
    TraceSpec s;
    s.id = j.at("id").get<std::string>();
    s.kind = trace_kind_from_string(j.at("kind").get<std::string>());
    s.profile = ramp_profile_from_json(j.at("profile"));
    s.t_samples = j.at("t_samples").get<std::vector<double>>();
    s.theta_bins = j.at("theta_bins").get<int>();
    s.N_series = step_series_from_json(j.at("N_series"));
    s.noise_sigma = j.at("noise_sigma").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.validate();
    return s;
}

inline std::string trace_matrix_to_text(const Trace& tr, int sig_digits = 10)
{
    std::ostringstream os;
    os << "# trace " << tr.spec.id << "\n# t";
    for (int j = 0; j < tr.spec.theta_bins; ++j)
        os << " dn_" << j;
    os << '\n';
    for (int k = 0; k < tr.dn.rows(); ++k) {
        os << format_double(tr.spec.t_samples[static_cast<std::size_t>(k)], 12);
        for (int j = 0; j < tr.dn.cols(); ++j)
            os << ' ' << format_double(tr.dn(k, j), sig_digits);
        os << '\n';
    }
    return os.str();
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    json manifest;
    manifest["R_i_ref"] = ds.R_i_ref;
    manifest["R_f_ref"] = ds.R_f_ref;
    manifest["N_ref"] = ds.N_ref;
    if (!ds.generator.is_null())
        manifest["generator"] = ds.generator;
    manifest["traces"] = json::array();
    for (const auto& tr : ds.traces) {
        json e = to_json(tr.spec);
        e["file"] = tr.spec.id + ".tsv";
        manifest["traces"].push_back(e);
        write_text_file((dir / (tr.spec.id + ".tsv")).string(), trace_matrix_to_text(tr));
    }
    write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

inline Dataset load_dataset(const std::filesystem::path& dir)
{
    const json manifest = json::parse(read_text_file((dir / "manifest.json").string()));
    Dataset ds;
    ds.R_i_ref = manifest.at("R_i_ref").get<double>();
    ds.R_f_ref = manifest.at("R_f_ref").get<double>();
    ds.N_ref = manifest.at("N_ref").get<double>();
    if (manifest.contains("generator"))
        ds.generator = manifest["generator"];
    for (const auto& e : manifest.at("traces")) {
        Trace tr;
        tr.spec = trace_spec_from_json(e);
        const auto rows = parse_table(read_text_file((dir / e.at("file").get<std::string>()).string()));
        if (rows.size() != tr.spec.t_samples.size())
            throw std::runtime_error("dataset: matrix row count does not match t_samples for " +
                                     tr.spec.id);
        tr.dn.resize(static_cast<Eigen::Index>(rows.size()), tr.spec.theta_bins);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (static_cast<int>(rows[k].size()) != tr.spec.theta_bins + 1)
                throw std::runtime_error("dataset: bad column count in trace " + tr.spec.id);
            for (int j = 0; j < tr.spec.theta_bins; ++j)
                tr.dn(static_cast<Eigen::Index>(k), j) = rows[k][static_cast<std::size_t>(j) + 1];
        }
        ds.traces.push_back(std::move(tr));
    }
    return ds;
}

}  // namespace ringphonon
