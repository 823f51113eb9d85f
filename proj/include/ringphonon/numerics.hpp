#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace ringphonon {

inline constexpr double kPi = 3.14159265358979323846;

/// Inverse error function, Newton-refined to ~1e-12 on top of std::erf.
inline double inverse_erf(double y)
{
    if (!(y > -1.0 && y < 1.0))
        throw std::invalid_argument("inverse_erf: argument must lie in (-1, 1)");
    if (y == 0.0)
        return 0.0;

    // Winitzki-style seed, then Newton on erf(x) - y.
    const double a = 0.147;
    const double l = std::log(1.0 - y * y);
    const double t = 2.0 / (kPi * a) + 0.5 * l;
    double x = std::copysign(std::sqrt(std::sqrt(t * t - l / a) - t), y);

    const double c = 2.0 / std::sqrt(kPi);
    for (int i = 0; i < 60; ++i) {
        const double step = (std::erf(x) - y) / (c * std::exp(-x * x));
        x -= step;
        if (std::abs(step) <= 1e-12 * std::max(1.0, std::abs(x)))
            break;
    }
    return x;
}

// erfinv(0.8); relates a 10%-90% rise time to the erf width parameter.
inline const double kErfInv08 = inverse_erf(0.8);

/// Golden-section maximization of f on [a, b] to absolute abscissa tolerance.
/// f must be unimodal on the bracket.
inline double golden_section_max(const std::function<double(double)>& f,
                                 double a, double b, double x_tol)
{
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > x_tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    return 0.5 * (a + b);
}

/// Composite Simpson rule with n panels (n rounded up to even).
inline double simpson(const std::function<double(double)>& f,
                      double a, double b, int n)
{
    if (b == a)
        return 0.0;
    if (n < 2)
        n = 2;
    if (n % 2 != 0)
        ++n;
    const double h = (b - a) / n;
    double odd = 0.0, even = 0.0;
    for (int i = 1; i < n; i += 2)
        odd += f(a + i * h);
    for (int i = 2; i < n; i += 2)
        even += f(a + i * h);
    return h / 3.0 * (f(a) + 4.0 * odd + 2.0 * even + f(b));
}

/// Simpson integration split at interior breakpoints (the integrand may jump
/// there). Panels are distributed proportionally to segment length, at least
/// two per segment.
inline double simpson_segmented(const std::function<double(double)>& f,
                                double a, double b,
                                std::span<const double> breakpoints, int n_total)
{
    std::vector<double> edges{a};
    for (double x : breakpoints)
        if (x > a && x < b)
            edges.push_back(x);
    edges.push_back(b);

    double sum = 0.0;
    const double span = b - a;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double len = edges[i + 1] - edges[i];
        int n = span > 0.0 ? static_cast<int>(std::ceil(n_total * len / span)) : 2;
        sum += simpson(f, edges[i], edges[i + 1], std::max(n, 2));
    }
    return sum;
}

inline bool all_finite(std::span<const double> xs)
{
    for (double x : xs)
        if (!std::isfinite(x))
            return false;
    return true;
}

}  // namespace ringphonon
