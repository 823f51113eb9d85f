#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ringphonon/analysis.hpp"
#include "ringphonon/integrator.hpp"
#include "ringphonon/synth.hpp"

using namespace ringphonon;
using Catch::Approx;

namespace {

ModelParams contraction_params()
{
    ModelParams p;
    p.gamma_H = 0.36;
    p.alpha = 0.52;
    p.Q_i = 7.8;
    p.Q_f = 3.5;
    p.c_theta_i = 4.36;
    p.dn_i = 4.50;
    p.phi_0 = 0.8;
    p.dtheta = 0.1;
    p.R_i_ref = 38.4;
    p.R_f_ref = 11.9;
    return p;
}

const RampProfile kTemplate{38.4, 11.9, 0.0, 3.6};

std::vector<double> linspace(double a, double b, int n)
{
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        v[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
    return v;
}

/// Exact amplitude-at-t_peak oracle from the pure RK trajectory: the
/// post-ramp solution is a damped sinusoid, so its quadrature envelope
/// extrapolated back with gamma_f is time-independent.
double trajectory_amplitude_oracle(const ModelParams& p, const RampProfile& prof, double t_star)
{
    const StepSeries N;
    const double t_peak = peak_time(prof);
    const double R_f = prof.R_end;
    const double w_f = omega(p, R_f, 1.0);
    const double g_f = damping_gamma(p, R_f, 1.0);
    const double wd_f = std::sqrt(w_f * w_f - g_f * g_f);

    const PhononState init = initial_state(p, prof, 1.0);
    const std::vector<double> grid{0.0, t_star};
    const Trajectory tr = integrate(p, prof, N, init, grid);
    const double dn = tr.dn.back();
    const double Ra = std::pow(R_f, p.alpha);
    const double dq = Ra * (g_f * tr.dphi_dt.back() + w_f * w_f * tr.phi.back()) / wd_f;
    return std::hypot(dn, dq) * std::exp(g_f * (t_star - t_peak));
}

}  // namespace

TEST_CASE("final_amplitude matches the trajectory envelope at t_peak to 0.1%")
{
    const ModelParams p = contraction_params();
    RampProfile prof = kTemplate;
    prof.t_mid = 40.0;

    // The oracle itself is window-time independent (exact damped sinusoid).
    const double a1 = trajectory_amplitude_oracle(p, prof, 60.0);
    const double a2 = trajectory_amplitude_oracle(p, prof, 85.0);
    const double a3 = trajectory_amplitude_oracle(p, prof, 110.0);
    CHECK(a2 == Approx(a1).epsilon(1e-7));
    CHECK(a3 == Approx(a1).epsilon(1e-7));

    // Full pipeline: synthetic matrix -> slice fits -> window fit.
    TraceSpec spec;
    spec.id = "t";
    spec.kind = TraceKind::contraction;
    spec.profile = prof;
    spec.t_samples = linspace(0.0, 150.0, 45);
    spec.theta_bins = 64;
    const Trace trace{spec, forward_trace(p, spec)};

    const double w0 = ramp_completion_time(prof, 0.99);
    const double w_f = omega(p, prof.R_end, 1.0);
    const double w1 = w0 + 4.0 * 2.0 * kPi / w_f;
    const AmplitudeEstimate af = final_amplitude(trace, p, p.dtheta, w0, w1);
    CHECK(af.value == Approx(a1).epsilon(1e-3));
    CHECK(af.n_points >= 5);

    // Shifting the window by one post-ramp period moves A_f by < 0.5%.
    const double T_f = 2.0 * kPi / w_f;
    const AmplitudeEstimate af2 = final_amplitude(trace, p, p.dtheta, w0 + T_f, w1 + T_f);
    CHECK(af2.value == Approx(af.value).epsilon(5e-3));
}

TEST_CASE("final_amplitude edge cases")
{
    const ModelParams p = contraction_params();
    RampProfile prof = kTemplate;
    prof.t_mid = 40.0;

    TraceSpec spec;
    spec.id = "z";
    spec.kind = TraceKind::contraction;
    spec.profile = prof;
    spec.t_samples = linspace(0.0, 150.0, 45);
    spec.theta_bins = 16;
    Trace zero{spec, Eigen::MatrixXd::Zero(45, 16)};

    const double w0 = ramp_completion_time(prof, 0.99);
    const AmplitudeEstimate az = final_amplitude(zero, p, 0.0, w0, w0 + 50.0);
    CHECK(az.value == 0.0);

    CHECK_THROWS_WITH(final_amplitude(zero, p, 0.0, w0, w0 + 4.0),
                      Catch::Matchers::ContainsSubstring("insufficient data"));
}

TEST_CASE("initial_amplitude: undamped limit and envelope formula")
{
    ModelParams p = contraction_params();
    RampProfile prof = kTemplate;
    prof.t_mid = 40.0;
    const double t_peak = peak_time(prof);

    ModelParams free = p;
    free.zero_gamma = true;
    const StepSeries N08 = StepSeries::constant(0.8);
    CHECK(initial_amplitude(free, prof, N08) == Approx(p.dn_i * 0.8).epsilon(1e-12));

    const StepSeries N;
    const double gi = omega(p, 38.4, 1.0) / (2.0 * quality_factor(p, 38.4));
    CHECK(initial_amplitude(p, prof, N) ==
          Approx(p.dn_i * std::exp(-gi * t_peak)).epsilon(1e-12));
}

TEST_CASE("phase-shifting by a period leaves the ratio unchanged (gamma = 0)")
{
    ModelParams p = contraction_params();
    p.gamma_H = 0.0;
    SweepOptions so;
    so.zero_gamma = true;

    const double w_i = omega(p, 38.4, 1.0);
    const double dt = kPi / w_i;  // phi_peak shift of exactly pi
    for (double t_i : {27.0, 35.0, 43.0}) {
        const std::vector<double> tis{t_i, t_i + dt, t_i + 2.0 * dt};
        const auto pts = phase_sweep(p, kTemplate, tis, so);
        CHECK(pts[1].phi_peak - pts[0].phi_peak == Approx(kPi).epsilon(1e-9));
        CHECK(pts[1].ratio == Approx(pts[0].ratio).epsilon(1e-6));
        CHECK(pts[2].ratio == Approx(pts[0].ratio).epsilon(1e-6));
    }
}

TEST_CASE("phenomenological decay is common-mode: absent from the ratio")
{
    const ModelParams p = contraction_params();
    SweepOptions so;  // damping on

    const double w_i = omega(p, 38.4, 1.0);
    const double dt = 2.0 * kPi / w_i;
    const std::vector<double> tis{28.0, 28.0 + dt};
    const auto pts = phase_sweep(p, kTemplate, tis, so);

    // Between the two schedules the phonon decays for one extra period:
    // both amplitudes drop materially while their ratio moves by < 2%.
    const StepSeries N;
    RampProfile prof_a = kTemplate, prof_b = kTemplate;
    prof_a.t_mid = tis[0] + 1.8;
    prof_b.t_mid = tis[1] + 1.8;
    const double ai_a = initial_amplitude(p, prof_a, N);
    const double ai_b = initial_amplitude(p, prof_b, N);
    CHECK(ai_b < 0.9 * ai_a);
    CHECK(pts[1].ratio * ai_b < 0.9 * pts[0].ratio * ai_a);  // A_f decreased too
    CHECK(pts[1].ratio == Approx(pts[0].ratio).epsilon(0.02));
}

TEST_CASE("contraction sweep covers the probed phase window")
{
    ModelParams p = contraction_params();
    p.phi_0 = 0.65;
    const auto pts = phase_sweep(p, kTemplate, linspace(27.0, 70.0, 12), SweepOptions{});

    CHECK(pts.front().phi_peak / kPi == Approx(1.3).epsilon(0.10));
    CHECK(pts.back().phi_peak / kPi == Approx(2.9).epsilon(0.10));
    for (const auto& q : pts) {
        CHECK(q.ratio > 0.0);
        CHECK(std::isfinite(q.phi_peak));
        CHECK(q.t_i >= 27.0);
        CHECK(q.t_i <= 70.0);
    }
}

TEST_CASE("adiabatic reference follows the invariant scaling")
{
    ModelParams p = contraction_params();

    SECTION("gamma_H = alpha contraction: (R_f/R_i)^((alpha-2)/4) ~ 1.5426")
    {
        p.gamma_H = p.alpha;
        const PhaseSweepPoint r = adiabatic_reference(p);
        CHECK(r.ratio == Approx(1.54258881231622).epsilon(0.01));
    }

    SECTION("independent of the temporal phase")
    {
        p.gamma_H = p.alpha;
        double mean = 0.0;
        std::vector<double> ratios;
        for (int k = 0; k < 6; ++k) {
            p.phi_0 = 2.0 * kPi * k / 6.0;
            ratios.push_back(adiabatic_reference(p).ratio);
            mean += ratios.back() / 6.0;
        }
        double var = 0.0;
        for (double r : ratios)
            var += (r - mean) * (r - mean) / 6.0;
        CHECK(std::sqrt(var) / mean <= 0.005);
    }

    SECTION("general friction strength: exponent 3 alpha/4 - 1/2 - gamma_H/2")
    {
        // gamma_H = 0.36 != alpha; WKB scaling derived from V omega phi^2.
        const PhaseSweepPoint r = adiabatic_reference(p);
        CHECK(r.ratio == Approx(1.40458309223673).epsilon(0.01));
    }

    SECTION("alpha -> 2 limit gives no amplitude change")
    {
        p.alpha = 1.99;
        p.gamma_H = 1.99;
        const PhaseSweepPoint r = adiabatic_reference(p);
        CHECK(r.ratio == Approx(1.0).epsilon(0.01));
    }

    SECTION("expansion is the reciprocal of contraction")
    {
        p.gamma_H = p.alpha;
        const double con = adiabatic_reference(p).ratio;
        ModelParams pe = p;
        pe.Q_i = p.Q_f;
        pe.Q_f = p.Q_i;
        pe.c_theta_i = speed_of_sound(p, p.R_f_ref, p.N_ref);
        pe.R_i_ref = p.R_f_ref;
        pe.R_f_ref = p.R_i_ref;
        const double exp_ = adiabatic_reference(pe).ratio;
        CHECK(exp_ == Approx(1.0 / con).epsilon(0.01));
    }
}

TEST_CASE("gain curve family: ordering, oscillation contrast, monotonicity")
{
    ModelParams p = contraction_params();
    p.phi_0 = 0.0;
    p.dtheta = 0.0;
    SweepOptions so;
    so.zero_gamma = true;

    const std::vector<double> ghs{0.0, 0.36, 1.0};
    const auto curves = gain_curve_family(p, kTemplate, ghs, 81, so);
    REQUIRE(curves.size() == 3);

    std::vector<double> mean(3, 0.0), lo(3, 1e300), hi(3, -1e300);
    for (std::size_t c = 0; c < 3; ++c) {
        REQUIRE(curves[c].points.size() == 81);
        for (const auto& q : curves[c].points) {
            mean[c] += q.ratio / 81.0;
            lo[c] = std::min(lo[c], q.ratio);
            hi[c] = std::max(hi[c], q.ratio);
        }
        // phi_peak grid spans [pi, 3 pi] uniformly.
        CHECK(curves[c].points.front().phi_peak == Approx(kPi).epsilon(1e-9));
        CHECK(curves[c].points.back().phi_peak == Approx(3.0 * kPi).epsilon(1e-9));
    }

    // Larger gamma_H amplifies more on average under contraction.
    CHECK(mean[0] < mean[1]);
    CHECK(mean[1] < mean[2]);

    // Strong oscillation at gamma_H = 0; flatter at gamma_H = 1.
    CHECK((hi[0] - lo[0]) / mean[0] > 0.20);
    CHECK((hi[2] - lo[2]) / mean[2] < (hi[0] - lo[0]) / mean[0]);

    // Monotone in gamma_H at fixed phase.
    for (double target : {1.25 * kPi, 2.0 * kPi, 2.6 * kPi}) {
        double prev = -1.0;
        for (double gh : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            ModelParams pg = p;
            pg.gamma_H = gh;
            const std::vector<double> one{target};
            const auto pt = phase_sweep_phi_peak(pg, kTemplate, one, so);
            CHECK(pt[0].ratio > prev);
            prev = pt[0].ratio;
        }
    }
}

TEST_CASE("phase_sweep input validation")
{
    const ModelParams p = contraction_params();
    CHECK_THROWS_AS(phase_sweep(p, kTemplate, std::vector<double>{}, SweepOptions{}),
                    std::invalid_argument);
    const std::vector<double> too_low{0.05 * kPi};
    CHECK_THROWS_AS(phase_sweep_phi_peak(p, kTemplate, too_low, SweepOptions{}),
                    std::invalid_argument);
}

TEST_CASE("phi_0 sweep entry point dials the phase directly")
{
    ModelParams p = contraction_params();
    SweepOptions so;
    so.zero_gamma = true;
    const std::vector<double> phis{0.0, 0.5, 1.0};
    const auto pts = phase_sweep_phi0(p, kTemplate, 35.0, phis, so);
    REQUIRE(pts.size() == 3);
    CHECK(pts[1].phi_peak - pts[0].phi_peak == Approx(0.5).epsilon(1e-9));
    CHECK(pts[2].phi_peak - pts[0].phi_peak == Approx(1.0).epsilon(1e-9));
}
