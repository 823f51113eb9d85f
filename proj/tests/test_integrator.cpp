#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ringphonon/integrator.hpp"
#include "ringphonon/model.hpp"

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
    p.R_i_ref = 38.4;
    p.R_f_ref = 11.9;
    return p;
}

/// Constant ring at R = 11.9 um with omega ~ 0.4555 rad/ms and Q = 3.5.
ModelParams constant_ring_params()
{
    ModelParams p;
    p.alpha = 0.47;
    p.Q_i = 3.5;
    p.Q_f = 3.5;
    p.c_theta_i = 5.42;
    p.R_i_ref = 11.9;
    p.R_f_ref = 38.4;
    return p;
}

std::vector<double> linspace(double a, double b, int n)
{
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        v[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
    return v;
}

}  // namespace

TEST_CASE("rhs: fixed point, constant-R coefficients, gamma_H inert without a ramp")
{
    const ModelParams p = contraction_params();
    const RampProfile flat{20.0, 20.0, 0.0, 3.6};
    const StepSeries N;

    auto [d1, d2] = rhs(PhononState{0.0, 0.0, 0.0}, 5.0, p, flat, N);
    CHECK(d1 == 0.0);
    CHECK(d2 == 0.0);

    // gamma_H has no effect when Rdot = 0.
    ModelParams p2 = p;
    p2.gamma_H = 2.5;
    const PhononState s{0.7, -0.2, 0.0};
    auto [a1, a2] = rhs(s, 3.0, p, flat, N);
    auto [b1, b2] = rhs(s, 3.0, p2, flat, N);
    CHECK(a1 == b1);
    CHECK(a2 == b2);

    // Textbook damped oscillator: d2phi = -2 gamma dphi - omega^2 phi.
    const double w = omega(p, 20.0, 1.0);
    const double g = damping_gamma(p, 20.0, 1.0);
    CHECK(a2 == Approx(-2.0 * g * s.dphi_dt - w * w * s.phi).epsilon(1e-14));

    // Cross-check against the analytic solution: second difference of the
    // closed form equals the rhs evaluated on it.
    const PhononState init{1.0, 0.0, 0.0};
    const double t = 7.3, h = 1e-4;
    const PhononState sm = analytic_constant_R(p, 20.0, 1.0, init, t - h);
    const PhononState s0 = analytic_constant_R(p, 20.0, 1.0, init, t);
    const PhononState sp = analytic_constant_R(p, 20.0, 1.0, init, t + h);
    const double fd2 = (sp.phi - 2.0 * s0.phi + sm.phi) / (h * h);
    auto [r1, r2] = rhs(s0, t, p, flat, N);
    CHECK(r1 == Approx(s0.dphi_dt));
    CHECK(r2 == Approx(fd2).epsilon(1e-6));
}

TEST_CASE("analytic_constant_R: limits and envelope decay")
{
    ModelParams p = constant_ring_params();
    const double R = 11.9;
    const double w = omega(p, R, 1.0);

    // gamma -> 0 limit: pure cosine for init (1, 0).
    ModelParams free = p;
    free.zero_gamma = true;
    for (double t : {0.0, 3.0, 11.0, 40.0}) {
        const PhononState s = analytic_constant_R(free, R, 1.0, PhononState{1.0, 0.0, 0.0}, t);
        CHECK(s.phi == Approx(std::cos(w * t)).margin(1e-13));
        CHECK(s.dphi_dt == Approx(-w * std::sin(w * t)).margin(1e-13));
    }

    // One damped period reduces the envelope by exp(-2 pi gamma / omega_d).
    const double g = damping_gamma(p, R, 1.0);
    const double wd = std::sqrt(w * w - g * g);
    const double Td = 2.0 * kPi / wd;
    const PhononState a = analytic_constant_R(p, R, 1.0, PhononState{1.0, 0.0, 0.0}, Td);
    CHECK(a.phi == Approx(std::exp(-g * Td)).epsilon(1e-12));

    // Q = 3.5: per-period decay ~ exp(-pi/3.5) to within 1.1%.
    CHECK(std::exp(-g * Td) == Approx(std::exp(-kPi / 3.5)).epsilon(0.011));

    ModelParams over = p;
    over.Q_i = over.Q_f = 0.4;  // clamps to 0.5 -> rejected as overdamped
    CHECK_THROWS_WITH(analytic_constant_R(over, R, 1.0, PhononState{1.0, 0.0, 0.0}, 1.0),
                      Catch::Matchers::ContainsSubstring("overdamped unsupported"));
}

TEST_CASE("integrate matches the closed form at constant radius to 1e-8 over 150 ms")
{
    const ModelParams p = constant_ring_params();
    const RampProfile flat{11.9, 11.9, 0.0, 3.6};
    const StepSeries N;
    const PhononState init{1.0, 0.0, 0.0};
    const std::vector<double> grid = linspace(0.0, 150.0, 1501);

    const Trajectory tr = integrate(p, flat, N, init, grid);
    double max_err = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const PhononState ref = analytic_constant_R(p, 11.9, 1.0, init, grid[k]);
        max_err = std::max(max_err, std::abs(tr.phi[k] - ref.phi));
        max_err = std::max(max_err, std::abs(tr.dphi_dt[k] - ref.dphi_dt));
    }
    CHECK(max_err <= 1e-8);
}

TEST_CASE("integrate: zero initial state stays zero")
{
    const ModelParams p = contraction_params();
    const RampProfile prof{38.4, 11.9, 40.0, 3.6};
    const Trajectory tr =
        integrate(p, prof, StepSeries{}, PhononState{0.0, 0.0, 0.0}, linspace(0.0, 120.0, 241));
    for (std::size_t k = 0; k < tr.phi.size(); ++k) {
        CHECK(tr.phi[k] == 0.0);
        CHECK(tr.dphi_dt[k] == 0.0);
    }
}

TEST_CASE("dense output is consistent under grid refinement")
{
    const ModelParams p = contraction_params();
    const RampProfile prof{38.4, 11.9, 40.0, 3.6};
    const PhononState init = initial_state(p, prof, 1.0);

    const std::vector<double> coarse = linspace(0.0, 120.0, 241);
    const std::vector<double> fine = linspace(0.0, 120.0, 481);
    const Trajectory a = integrate(p, prof, StepSeries{}, init, coarse);
    const Trajectory b = integrate(p, prof, StepSeries{}, init, fine);
    for (std::size_t k = 0; k < coarse.size(); ++k) {
        CHECK(std::abs(a.phi[k] - b.phi[2 * k]) <= 1e-9);
        CHECK(std::abs(a.dphi_dt[k] - b.dphi_dt[2 * k]) <= 1e-9);
    }
}

TEST_CASE("Wronskian first integral")
{
    ModelParams p = contraction_params();
    p.zero_gamma = true;
    const PhononState ia{1.0, 0.0, 0.0};
    const PhononState ib{0.0, 1.0, 0.0};

    SECTION("constant ring: W itself constant")
    {
        const RampProfile flat{20.0, 20.0, 0.0, 3.6};
        const auto w = wronskian_invariant(p, flat, ia, ib, linspace(0.0, 100.0, 201));
        CHECK(w.front() == Approx(1.0).epsilon(1e-12));
        for (double v : w)
            CHECK(v == Approx(w.front()).epsilon(1e-8));
    }

    SECTION("full ramp: W V_rel drifts below 1e-7")
    {
        const RampProfile prof{38.4, 11.9, 40.0, 3.6};
        const auto w = wronskian_invariant(p, prof, ia, ib, linspace(0.0, 150.0, 301));
        CHECK(w.front() == Approx(1.0).epsilon(1e-12));
        double drift = 0.0;
        for (double v : w)
            drift = std::max(drift, std::abs(v / w.front() - 1.0));
        CHECK(drift <= 1e-7);
    }

    SECTION("requires the gamma = 0 mode")
    {
        ModelParams damped = contraction_params();
        const RampProfile prof{38.4, 11.9, 40.0, 3.6};
        CHECK_THROWS_AS(wronskian_invariant(damped, prof, ia, ib, linspace(0.0, 10.0, 11)),
                        std::invalid_argument);
    }
}

TEST_CASE("time reversal returns the initial state (gamma = 0)")
{
    ModelParams p = contraction_params();
    p.zero_gamma = true;
    const RampProfile prof{38.4, 11.9, 40.0, 3.6};
    const PhononState init = initial_state(p, prof, 1.0);

    PhononRhs f{&p, &prof, 1.0};
    Dopri5<2, PhononRhs> fwd(f);
    const auto y_end = fwd.solve(0.0, {init.phi, init.dphi_dt}, 120.0);
    Dopri5<2, PhononRhs> bwd(f);
    const auto y_back = bwd.solve(120.0, y_end, 0.0);

    const double scale = std::max(std::abs(init.phi), std::abs(init.dphi_dt));
    CHECK(std::abs(y_back[0] - init.phi) / scale <= 1e-7);
    CHECK(std::abs(y_back[1] - init.dphi_dt) / scale <= 1e-7);
}

TEST_CASE("adiabatic ramp: cycle-averaged invariant and amplitude scaling")
{
    // gamma = 0, gamma_H = alpha, ramp stretched to ~100 periods.
    ModelParams p = contraction_params();
    p.zero_gamma = true;
    p.gamma_H = p.alpha;

    const double w_slow = omega(p, 38.4, 1.0);
    const double T_slow = 2.0 * kPi / w_slow;
    RampProfile prof;
    prof.R_start = 38.4;
    prof.R_end = 11.9;
    prof.rise_10_90 = 100.0 * T_slow;
    prof.t_mid = 6.0 * prof.width() + 2.0 * T_slow;

    const double t_end = prof.t_mid + 6.0 * prof.width() + 2.0 * T_slow;
    const PhononState init = initial_state(p, prof, 1.0);

    auto cycle_average_invariant = [&](double t0) {
        const double w = omega(p, radius(prof, t0), 1.0);
        const std::vector<double> grid = linspace(t0, t0 + 2.0 * kPi / w, 257);
        const Trajectory tr = integrate(p, prof, StepSeries{}, init, grid);
        double acc = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double R = radius(prof, grid[k]);
            const double V_rel = std::pow(R / radius(prof, 0.0), p.gamma_H);
            const double wk = tr.omega_inst[k];
            const double inv =
                V_rel * (tr.dphi_dt[k] * tr.dphi_dt[k] + wk * wk * tr.phi[k] * tr.phi[k]) / wk;
            acc += inv;
        }
        return acc / static_cast<double>(grid.size());
    };

    const double I_before = cycle_average_invariant(0.0);
    const double I_after = cycle_average_invariant(t_end);
    CHECK(std::abs(I_after / I_before - 1.0) <= 0.005);

    // dn amplitude ratio across the ramp follows (R_f/R_i)^((alpha-2)/4).
    auto envelope_max = [&](double t0, double w) {
        const std::vector<double> grid = linspace(t0, t0 + 2.0 * kPi / w, 257);
        const Trajectory tr = integrate(p, prof, StepSeries{}, init, grid);
        double m = 0.0;
        for (double v : tr.dn)
            m = std::max(m, std::abs(v));
        return m;
    };
    const double A_before = envelope_max(0.0, omega(p, 38.4, 1.0));
    const double A_after = envelope_max(t_end, omega(p, 11.9, 1.0));
    const double expected = std::pow(11.9 / 38.4, (p.alpha - 2.0) / 4.0);
    CHECK(A_after / A_before == Approx(expected).epsilon(0.01));
}

TEST_CASE("fixed-step global error converges at fourth order or better")
{
    const ModelParams p = constant_ring_params();
    const RampProfile flat{11.9, 11.9, 0.0, 3.6};
    const PhononState init{1.0, 0.0, 0.0};
    PhononRhs f{&p, &flat, 1.0};
    Dopri5<2, PhononRhs> stepper(f);

    const double T = 30.0;
    auto global_error = [&](int n_steps) {
        const auto y = stepper.solve_fixed(0.0, {init.phi, init.dphi_dt}, T, n_steps);
        const PhononState ref = analytic_constant_R(p, 11.9, 1.0, init, T);
        return std::max(std::abs(y[0] - ref.phi), std::abs(y[1] - ref.dphi_dt));
    };
    const double e1 = global_error(60);
    const double e2 = global_error(120);
    const double order = std::log2(e1 / e2);
    CHECK(order > 3.8);
}

TEST_CASE("accumulated_phase: trivial cases, panel doubling, ramp values")
{
    ModelParams p = contraction_params();
    p.phi_0 = 0.4;
    const StepSeries N;

    const RampProfile flat{20.0, 20.0, 0.0, 3.6};
    CHECK(accumulated_phase(p, flat, N, 0.0) == Approx(0.4));
    CHECK(accumulated_phase(p, flat, N, 37.0) ==
          Approx(0.4 + omega(p, 20.0, 1.0) * 37.0).epsilon(1e-10));

    // Contraction with t_i in {27, 70} ms; values frozen from an independent
    // adaptive-quadrature evaluation of the omega integral.
    p.phi_0 = 0.0;
    for (auto [t_i, want] : {std::pair{27.0, 3.48703471709581}, std::pair{70.0, 8.36932638376248}}) {
        const RampProfile prof{38.4, 11.9, t_i + 1.8, 3.6};
        const double tp = peak_time(prof);
        const double acc = accumulated_phase(p, prof, N, tp);
        CHECK(acc == Approx(want).epsilon(1e-8));
        const double acc2 = accumulated_phase(p, prof, N, tp, 20000);
        CHECK(std::abs(acc2 - acc) <= 1e-8 * std::abs(acc));
    }
}

TEST_CASE("step-size underflow raises a stiff failure")
{
    struct JumpRhs {
        void operator()(double t, const std::array<double, 1>& y, std::array<double, 1>& dy) const
        {
            (void)y;
            dy[0] = t < 1.0 ? 0.0 : 1e8;
        }
    };
    Dopri5<1, JumpRhs> stepper{JumpRhs{}};
    CHECK_THROWS_WITH(stepper.solve(0.0, {0.0}, 2.0),
                      Catch::Matchers::ContainsSubstring("stiff failure"));
}

TEST_CASE("integrate validates its inputs")
{
    const ModelParams p = contraction_params();
    const RampProfile prof{38.4, 11.9, 40.0, 3.6};
    const StepSeries N;
    CHECK_THROWS_AS(integrate(p, prof, N, PhononState{1.0, 0.0, 0.0}, std::vector<double>{}),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        integrate(p, prof, N, PhononState{1.0, 0.0, 0.0}, std::vector<double>{0.0, 0.0, 1.0}),
        std::invalid_argument);
    const double nan = std::nan("");
    CHECK_THROWS_AS(
        integrate(p, prof, N, PhononState{nan, 0.0, 0.0}, std::vector<double>{0.0, 1.0}),
        std::invalid_argument);
}
