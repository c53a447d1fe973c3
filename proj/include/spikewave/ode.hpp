// ode.hpp -- embedded Dormand-Prince 5(4) stepper with FSAL, a PI step
// controller, and two geometry hooks:
//
//   max_h(t, y)            hard cap on the next step size (return inf for none)
//   veto(t0, y0, t1, y1)   inspect a step that already passed error control;
//                          return 1.0 to keep it or a fraction in (0,1) to
//                          retry with h scaled by exactly that factor
//
// The veto fraction is applied verbatim (clamped away from 0 and 1), so a
// caller that knows where a panel boundary lies can aim successive retries at
// it, secant style, and land on it to full precision. The observer may return
// bool; returning false stops the integration after that accepted step, and
// the reached time is written through t_reached. Integration otherwise lands
// exactly on the requested endpoint.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <type_traits>

#include "spikewave/errors.hpp"

namespace spikewave {

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_init = 0.0;  // 0 = derive from the initial slope
    double h_max = std::numeric_limits<double>::infinity();
    std::int64_t max_steps = 400'000'000;
};

struct OdeStats {
    std::int64_t accepted = 0;
    std::int64_t rejected = 0;
    std::int64_t rhs_evals = 0;
};

namespace dp5 {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
} // namespace dp5

namespace detail {
struct NoCap {
    template <class S>
    double operator()(double, const S&) const {
        return std::numeric_limits<double>::infinity();
    }
};
struct NoVeto {
    template <class S>
    double operator()(double, const S&, double, const S&) const {
        return 1.0;
    }
};
struct NoObserver {
    template <class S>
    void operator()(double, const S&) const {}
};
} // namespace detail

// Integrate dy/dt = rhs(t, y) from (t0, y0) to t1. N is the state dimension;
// rhs has signature void(double t, const std::array<double,N>& y,
// std::array<double,N>& dydt). on_step fires after every accepted step
// (including the final one) and may return bool to stop early. Returns the
// state at t1, or at the stopping point; *t_reached receives that time.
template <std::size_t N, class Rhs, class OnStep = detail::NoObserver,
          class MaxH = detail::NoCap, class Veto = detail::NoVeto>
std::array<double, N> integrate_ode(Rhs&& rhs, double t0, std::array<double, N> y,
                                    double t1, const OdeOptions& opt = {},
                                    OdeStats* stats = nullptr,
                                    OnStep&& on_step = OnStep{}, MaxH&& max_h = MaxH{},
                                    Veto&& veto = Veto{}, double* t_reached = nullptr) {
    if (!(opt.rtol > 0.0) || !(opt.atol > 0.0))
        throw PreconditionViolation("integrate_ode: tolerances must be positive");
    if (t1 == t0) {
        if (t_reached) *t_reached = t0;
        return y;
    }
    const double dir = t1 > t0 ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);

    OdeStats local;
    OdeStats& st = stats ? *stats : local;

    std::array<double, N> k1, k2, k3, k4, k5, k6, k7, tmp, ynew;
    double t = t0;
    rhs(t, y, k1);
    ++st.rhs_evals;

    // Initial step from the slope at t0 (a crude Hairer-style guess; the
    // controller corrects it within a couple of steps).
    double h;
    if (opt.h_init > 0.0) {
        h = opt.h_init;
    } else {
        double d0 = 0.0, d1 = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            double sc = opt.atol + opt.rtol * std::abs(y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1 += (k1[i] / sc) * (k1[i] / sc);
        }
        d0 = std::sqrt(d0 / N);
        d1 = std::sqrt(d1 / N);
        h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
        h = std::min(h, 0.1 * span);
    }
    h = std::min(h, opt.h_max);
    // Never start below the representability floor: a span of a few ulp is
    // then taken as a single landing step instead of tripping the underflow
    // guard before the controller has seen a single error estimate.
    h = std::max(h, 16.0 * std::numeric_limits<double>::epsilon() *
                        std::max({std::abs(t0), std::abs(t1), 1.0}));

    double err_prev = 1.0;
    bool just_rejected = false;

    while (true) {
        double remaining = std::abs(t1 - t);
        if (remaining <= 0.0) break;
        const double h_floor = 16.0 * std::numeric_limits<double>::epsilon() *
                               std::max({std::abs(t), std::abs(t1), 1.0});
        if (st.accepted + st.rejected >= opt.max_steps)
            throw ToleranceFailure("integrate_ode: step budget exhausted");

        double cap = max_h(t, y);
        if (cap < h) h = std::max(cap, h_floor);
        bool last = false;
        if (h >= remaining) {
            h = remaining;
            last = true;
        }
        // An under-floor step is fine when it is the landing step (it sets
        // t = t1 exactly); anywhere else it signals a death spiral.
        if (!last && h < h_floor)
            throw ToleranceFailure("integrate_ode: step size underflow at t=" +
                                   std::to_string(t));
        const double hd = dir * h;

        using namespace dp5;
        for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + hd * a21 * k1[i];
        rhs(t + c2 * hd, tmp, k2);
        for (std::size_t i = 0; i < N; ++i)
            tmp[i] = y[i] + hd * (a31 * k1[i] + a32 * k2[i]);
        rhs(t + c3 * hd, tmp, k3);
        for (std::size_t i = 0; i < N; ++i)
            tmp[i] = y[i] + hd * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs(t + c4 * hd, tmp, k4);
        for (std::size_t i = 0; i < N; ++i)
            tmp[i] = y[i] + hd * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs(t + c5 * hd, tmp, k5);
        for (std::size_t i = 0; i < N; ++i)
            tmp[i] = y[i] + hd * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                                  a64 * k4[i] + a65 * k5[i]);
        rhs(t + hd, tmp, k6);
        for (std::size_t i = 0; i < N; ++i)
            ynew[i] = y[i] + hd * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                                   b6 * k6[i]);
        rhs(t + hd, ynew, k7);
        st.rhs_evals += 6;

        double err = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            double e = hd * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                             e6 * k6[i] + e7 * k7[i]);
            double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err += (e / sc) * (e / sc);
        }
        err = std::sqrt(err / N);

        if (err <= 1.0) {
            double frac = veto(t, y, t + hd, ynew);
            if (frac < 1.0) {
                ++st.rejected;
                h = std::max(h * std::clamp(frac, 1e-6, 0.9999), h_floor);
                continue;
            }
            t = last ? t1 : t + hd;
            y = ynew;
            k1 = k7; // FSAL
            ++st.accepted;
            bool keep_going = true;
            if constexpr (std::is_same_v<
                              std::invoke_result_t<OnStep&, double,
                                                   const std::array<double, N>&>,
                              bool>) {
                keep_going = on_step(t, y);
            } else {
                on_step(t, y);
            }
            if (!keep_going) break;
            if (last) break;
            double e_clamped = std::max(err, 1e-10);
            double fac = 0.9 * std::pow(e_clamped, -0.17) * std::pow(err_prev, 0.04);
            fac = std::min(just_rejected ? 1.0 : 6.0, std::max(0.2, fac));
            err_prev = e_clamped;
            just_rejected = false;
            h = std::min(h * fac, opt.h_max);
        } else {
            ++st.rejected;
            just_rejected = true;
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
        }
    }
    if (t_reached) *t_reached = t;
    return y;
}

} // namespace spikewave
