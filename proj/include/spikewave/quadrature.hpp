// quadrature.hpp -- 15-point Gauss-Legendre panels and a bisection-adaptive
// composite rule on top of them.
#pragma once

#include <cmath>
#include <cstddef>

#include "spikewave/errors.hpp"

namespace spikewave {

namespace gl15 {
// Abscissas (non-negative half) and weights of the 15-point Gauss-Legendre
// rule on [-1, 1].
inline constexpr double kX[8] = {
    0.0000000000000000,    0.20119409399743451, 0.39415134707756339, 0.57097217260853885,
    0.72441773136017005,   0.84820658341042722, 0.93727339240070590, 0.98799251802048543};
inline constexpr double kW[8] = {
    0.20257824192556127,   0.19843148532711158, 0.18616100001556221, 0.16626920581699393,
    0.13957067792615431,   0.10715922046717194, 0.070366047488108125, 0.030753241996117268};
} // namespace gl15

// Integrate f over [a, b] with a single 15-point panel. T is double or
// std::complex<double>.
template <class T, class F>
T gl15_panel(F&& f, double a, double b) {
    double mid = 0.5 * (a + b);
    double hal = 0.5 * (b - a);
    T acc = gl15::kW[0] * f(mid);
    for (int i = 1; i < 8; ++i) {
        double dx = hal * gl15::kX[i];
        acc += gl15::kW[i] * (f(mid + dx) + f(mid - dx));
    }
    return hal * acc;
}

namespace detail {

template <class T, class F>
T integrate_rec(F&& f, double a, double b, T whole, double tol, int depth) {
    if (depth > 48) throw QuadratureFailure("adaptive quadrature: recursion limit");
    double m = 0.5 * (a + b);
    T left = gl15_panel<T>(f, a, m);
    T right = gl15_panel<T>(f, m, b);
    T sum = left + right;
    if (std::abs(sum - whole) <= tol) return sum;
    return integrate_rec<T>(f, a, m, left, 0.5 * tol, depth + 1) +
           integrate_rec<T>(f, m, b, right, 0.5 * tol, depth + 1);
}

} // namespace detail

// Adaptive integration by panel bisection. The error of a 15-point panel on
// analytic integrands decays so fast with halving that the doubled rule is
// used directly as the result.
template <class T, class F>
T integrate(F&& f, double a, double b, double rtol = 1e-12, double atol = 1e-300) {
    if (a == b) return T{};
    T whole = gl15_panel<T>(f, a, b);
    double tol = std::max(atol, rtol * std::abs(whole));
    for (int round = 0; round < 8; ++round) {
        T refined = detail::integrate_rec<T>(f, a, b, whole, tol, 0);
        double scale = std::abs(refined);
        double want = std::max(atol, rtol * scale);
        if (want >= tol || scale == 0.0) return refined;
        whole = refined; // the magnitude shrank; re-run against the tighter target
        tol = want;
    }
    throw QuadratureFailure("adaptive quadrature: tolerance chase failed");
}

} // namespace spikewave
