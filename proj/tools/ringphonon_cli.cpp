// Command-line front end: simulate trajectories, synthesize datasets, run
// global fits and phase sweeps, all driven by a single JSON config per run.
//
// Exit codes: 0 success, 2 config error, 3 numeric failure,
//             4 fit non-convergence (report still written).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ringphonon/analysis.hpp"
#include "ringphonon/fit.hpp"
#include "ringphonon/integrator.hpp"
#include "ringphonon/report.hpp"
#include "ringphonon/synth.hpp"
#include "ringphonon/version.hpp"

namespace fs = std::filesystem;
using namespace ringphonon;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string output_dir;
    bool manifest = false;
    std::optional<std::uint64_t> seed_override;
    std::string variant = "all";
    std::string preset_override;
};

json load_config(const CommonArgs& args)
{
    if (!fs::exists(args.config_path))
        throw std::invalid_argument("config file does not exist: " + args.config_path);
    return json::parse(read_text_file(args.config_path));
}

void prepare_output(const CommonArgs& args)
{
    fs::create_directories(args.output_dir);
    // The config travels with the results.
    write_text_file((fs::path(args.output_dir) / "config.json").string(),
                    read_text_file(args.config_path));
}

void write_manifest(const CommonArgs& args, const std::string& command,
                    const std::vector<std::string>& outputs, double wall_seconds,
                    const json& extra = json::object())
{
    if (!args.manifest)
        return;
    json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["config"] = args.config_path;
    m["outputs"] = outputs;
    m["wall_time_s"] = wall_seconds;
    if (args.seed_override)
        m["seed_override"] = *args.seed_override;
    if (!extra.empty())
        m.update(extra);
    write_text_file((fs::path(args.output_dir) / "run_manifest.json").string(), m.dump(2) + "\n");
}

StepSeries atom_series_from_config(const json& cfg, const ModelParams& params)
{
    if (cfg.contains("N_series"))
        return step_series_from_json(cfg["N_series"]);
    return StepSeries::constant(params.N_ref);
}

std::vector<double> grid_from_config(const json& cfg)
{
    if (cfg.contains("times"))
        return cfg["times"].get<std::vector<double>>();
    const json& g = cfg.at("grid");
    const double a = g.at("t_start").get<double>();
    const double b = g.at("t_end").get<double>();
    const int n = g.at("n").get<int>();
    if (n < 2 || !(b > a))
        throw std::invalid_argument("grid: need t_end > t_start and n >= 2");
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        t[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
    return t;
}

// -------------------------------------------------------------------------

int cmd_simulate(const CommonArgs& args)
{
    const auto t0 = std::chrono::steady_clock::now();
    const json cfg = load_config(args);
    const ModelParams params = model_params_from_json(cfg.at("params"));
    const RampProfile profile = ramp_profile_from_json(cfg.at("profile"));
    const StepSeries N = atom_series_from_config(cfg, params);
    const std::vector<double> grid = grid_from_config(cfg);
    prepare_output(args);

    const PhononState init = initial_state(params, profile, N(grid.front()));
    const Trajectory tr = integrate(params, profile, N, init, grid);

    TextTable table;
    table.columns = {"t", "phi", "dphi_dt", "dn", "omega_inst"};
    for (std::size_t k = 0; k < tr.times.size(); ++k)
        table.add_row({tr.times[k], tr.phi[k], tr.dphi_dt[k], tr.dn[k], tr.omega_inst[k]});
    const std::string out_path = (fs::path(args.output_dir) / "trajectory.tsv").string();
    write_text_file(out_path, table.to_string(12));

    if (profile.is_constant()) {
        std::cout << "no ramp (constant radius " << format_double(profile.R_start, 12) << " um)\n";
    } else {
        const double tp = peak_time(profile);
        double max_rate = 0.0;
        for (int i = 0; i <= 4000; ++i) {
            const double t = profile.t_mid - 4.0 * profile.width() +
                             8.0 * profile.width() * i / 4000.0;
            max_rate = std::max(max_rate, std::abs(hubble_rate(profile, t)));
        }
        const double phi_peak = accumulated_phase(params, profile, N, tp);
        std::cout << "t_peak = " << format_double(tp, 12) << " ms\n";
        std::cout << "max |Rdot/R| = " << format_double(max_rate, 12) << " 1/ms\n";
        std::cout << "phi_peak = " << format_double(phi_peak, 12) << " rad ("
                  << format_double(phi_peak / kPi, 12) << " pi)\n";
    }

    write_manifest(args, "simulate", {"trajectory.tsv"},
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return 0;
}

int cmd_synth(const CommonArgs& args)
{
    const auto t0 = std::chrono::steady_clock::now();
    const json cfg = load_config(args);
    const ModelParams params = model_params_from_json(cfg.at("params"));

    PresetOptions opt;
    if (cfg.contains("preset_options")) {
        const json& po = cfg["preset_options"];
        opt.theta_bins = po.value("theta_bins", opt.theta_bins);
        opt.n_time_samples = po.value("n_time_samples", opt.n_time_samples);
        opt.t_max = po.value("t_max", opt.t_max);
        opt.rise_10_90 = po.value("rise_10_90", opt.rise_10_90);
        opt.noise_rel = po.value("noise_rel", opt.noise_rel);
        opt.ramp_N_loss = po.value("ramp_N_loss", opt.ramp_N_loss);
        opt.N_drift = po.value("N_drift", opt.N_drift);
    }

    Dataset ds;
    if (cfg.contains("traces")) {
        std::vector<TraceSpec> specs;
        for (const auto& e : cfg["traces"])
            specs.push_back(trace_spec_from_json(e));
        bool noisy = false;
        for (const auto& s : specs)
            noisy = noisy || s.noise_sigma > 0.0;
        if (noisy && !cfg.contains("seed") && !args.seed_override)
            throw std::invalid_argument("noise requested but no seed given");
        const std::uint64_t seed =
            args.seed_override ? *args.seed_override : cfg.value("seed", std::uint64_t{0});
        ds = build_dataset(params, std::move(specs), seed);
    } else {
        const std::string preset = !args.preset_override.empty()
                                       ? args.preset_override
                                       : cfg.at("preset").get<std::string>();
        if (opt.noise_rel > 0.0 && !cfg.contains("seed") && !args.seed_override)
            throw std::invalid_argument("noise requested but no seed given");
        opt.seed = args.seed_override ? *args.seed_override : cfg.value("seed", std::uint64_t{0});
        ds = build_preset_dataset(preset, params, opt);
    }

    prepare_output(args);
    save_dataset(ds, args.output_dir);
    std::cout << "dataset: " << ds.n_traces() << " traces, " << ds.n_cells() << " cells\n";

    std::vector<std::string> outputs{"manifest.json"};
    for (const auto& tr : ds.traces)
        outputs.push_back(tr.spec.id + ".tsv");
    write_manifest(args, "synth", outputs,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return 0;
}

int cmd_fit(const CommonArgs& args)
{
    const auto t0 = std::chrono::steady_clock::now();
    const json cfg = load_config(args);
    const std::string ds_path = cfg.at("dataset").get<std::string>();
    if (!fs::exists(fs::path(ds_path) / "manifest.json"))
        throw std::invalid_argument("dataset directory not found: " + ds_path);
    const Dataset ds = load_dataset(ds_path);

    std::optional<ParamVector> pv0;  // moment-based start unless overridden

    std::string variant = args.variant;
    if (variant == "all" && cfg.contains("variant"))
        variant = cfg["variant"].is_number() ? std::to_string(cfg["variant"].get<int>())
                                             : cfg["variant"].get<std::string>();

    prepare_output(args);
    bool all_converged = true;
    std::vector<std::string> outputs{"report.txt", "report.json"};

    if (variant == "all") {
        const FitEnsemble ens = ensemble_fit(ds, pv0);
        for (const auto& fr : ens.per_variant) {
            all_converged = all_converged && fr.converged;
            std::cout << "variant " << fr.variant.index() << ": chi2/dof "
                      << format_double(fr.chi2_per_dof(), 6) << ", dof " << fr.dof << " ("
                      << fr.dof + fr.n_parameters << " residuals - " << fr.n_parameters
                      << " parameters), " << (fr.converged ? "converged" : "NOT converged")
                      << "\n";
        }
        write_text_file((fs::path(args.output_dir) / "report.txt").string(),
                        ensemble_report_text(ens));
        write_text_file((fs::path(args.output_dir) / "report.json").string(),
                        ensemble_report_json(ens).dump(2) + "\n");
    } else {
        const int idx = std::stoi(variant);
        if (idx < 0 || idx > 7)
            throw std::invalid_argument("variant index must be 0..7 or 'all'");
        const FitResult fr = global_fit(ds, FitVariant::all()[static_cast<std::size_t>(idx)], pv0);
        all_converged = fr.converged;
        std::cout << "variant " << idx << ": chi2/dof " << format_double(fr.chi2_per_dof(), 6)
                  << ", dof " << fr.dof << " (" << fr.dof + fr.n_parameters << " residuals - "
                  << fr.n_parameters << " parameters), "
                  << (fr.converged ? "converged" : "NOT converged") << "\n";
        write_text_file((fs::path(args.output_dir) / "report.txt").string(),
                        fit_report_text(fr));
        write_text_file((fs::path(args.output_dir) / "report.json").string(),
                        fit_result_to_json(fr).dump(2) + "\n");
    }

    write_manifest(args, "fit", outputs,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return all_converged ? 0 : 4;
}

int cmd_phase_sweep(const CommonArgs& args)
{
    const auto t0 = std::chrono::steady_clock::now();
    const json cfg = load_config(args);
    const ModelParams params = model_params_from_json(cfg.at("params"));

    RampProfile tmpl;
    if (cfg.contains("profile_template")) {
        tmpl = ramp_profile_from_json(cfg["profile_template"]);
    } else {
        tmpl = RampProfile{params.R_i_ref, params.R_f_ref, 0.0, 3.6};
    }

    SweepOptions sweep;
    sweep.zero_gamma = cfg.value("zero_gamma", true);

    std::vector<double> gamma_H_list = cfg.value("gamma_H_list",
                                                 std::vector<double>{0.0, 0.36, 1.0});
    prepare_output(args);
    std::vector<std::string> outputs;

    auto write_curve = [&](const std::string& name, const std::vector<PhaseSweepPoint>& pts) {
        TextTable table;
        table.columns = {"phi_peak_over_pi", "ratio", "sigma", "t_i"};
        for (const auto& q : pts)
            table.add_row({q.phi_peak / kPi, q.ratio, q.ratio_sigma, q.t_i});
        write_text_file((fs::path(args.output_dir) / name).string(), table.to_string(10));
        outputs.push_back(name);
    };

    if (cfg.contains("t_i_list")) {
        const auto tis = cfg["t_i_list"].get<std::vector<double>>();
        for (double gh : gamma_H_list) {
            ModelParams pg = params;
            pg.gamma_H = gh;
            const auto pts = phase_sweep(pg, tmpl, tis, sweep);
            write_curve("sweep_gamma_H_" + format_double(gh, 6) + ".tsv", pts);
        }
    } else {
        int n_points = 200;
        double lo_pi = 1.0, hi_pi = 3.0;
        if (cfg.contains("phi_peak_grid")) {
            const json& g = cfg["phi_peak_grid"];
            lo_pi = g.value("from_pi", lo_pi);
            hi_pi = g.value("to_pi", hi_pi);
            n_points = g.value("n", n_points);
        }
        if (n_points < 1)
            throw std::invalid_argument("phi_peak_grid: n must be >= 1");
        std::vector<double> grid(static_cast<std::size_t>(n_points));
        for (int i = 0; i < n_points; ++i)
            grid[static_cast<std::size_t>(i)] =
                kPi * (n_points == 1 ? lo_pi : lo_pi + (hi_pi - lo_pi) * i / (n_points - 1));
        for (double gh : gamma_H_list) {
            ModelParams pg = params;
            pg.gamma_H = gh;
            const auto pts = phase_sweep_phi_peak(pg, tmpl, grid, sweep);
            write_curve("sweep_gamma_H_" + format_double(gh, 6) + ".tsv", pts);
        }
    }

    if (cfg.value("adiabatic", true)) {
        AdiabaticOptions ao;
        const auto pt = adiabatic_reference(params, ao);
        write_curve("adiabatic.tsv", {pt});
        std::cout << "adiabatic ratio = " << format_double(pt.ratio, 10) << "\n";
    }
    std::cout << "curves written: " << outputs.size() << "\n";

    write_manifest(args, "phase-sweep", outputs,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"ring-condensate phonon simulator and fitting toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    CommonArgs args;
    auto add_common = [&](CLI::App* sub, bool with_variant = false, bool with_preset = false) {
        sub->add_option("--config", args.config_path, "JSON run configuration")->required();
        sub->add_option("--output", args.output_dir, "output directory")->required();
        sub->add_flag("--manifest", args.manifest, "write a run summary (inputs, version, timing)");
        sub->add_option("--seed", args.seed_override, "override the config seed");
        if (with_variant)
            sub->add_option("--variant", args.variant, "fit variant index 0..7 or 'all'");
        if (with_preset)
            sub->add_option("--preset", args.preset_override, "dataset preset name");
    };

    CLI::App* sim = app.add_subcommand("simulate", "integrate one trajectory");
    add_common(sim);
    CLI::App* syn = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(syn, false, true);
    CLI::App* fit = app.add_subcommand("fit", "run the global fit");
    add_common(fit, true);
    CLI::App* sweep = app.add_subcommand("phase-sweep", "amplitude ratio versus phase");
    add_common(sweep);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed())
            return cmd_simulate(args);
        if (syn->parsed())
            return cmd_synth(args);
        if (fit->parsed())
            return cmd_fit(args);
        if (sweep->parsed())
            return cmd_phase_sweep(args);
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
