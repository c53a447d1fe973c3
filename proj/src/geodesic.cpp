#include "spikewave/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "spikewave/ode.hpp"
#include "spikewave/quadrature.hpp"

namespace spikewave {

namespace {

// One spike support with the quantities the segment integrator needs. The
// dead band is the margin inside the support where the bump underflows to
// exactly zero (it does so below ~3.4e-4 of the width), so a state parked
// there sees V = -x^4 exactly while still lying inside the closed support.
inline double sq(double v) { return v * v; }

struct Support {
    double lo = 0, hi = 0;
    double width = 0;
    double dead = 0; // 1e-4 * width
    double peak = 0; // argmax of V over the support
    double sup = 0;  // calibrated max of V: (n + 1) + residual
};

// Supports on both sides of the origin, sorted by lower edge.
struct SupportIndex {
    std::vector<Support> v;

    explicit SupportIndex(const SpikeFamily& fam, double reach) {
        for (const ActiveSpike& s : fam.active_spikes(-reach, reach)) {
            Support u;
            u.lo = s.lo;
            u.hi = s.hi;
            // Keep the calibrated width, not hi - lo: the roundoff between the
            // two (~1 ulp of the center) shifts the bump parametrization, and
            // the bump's log-slope amplifies that into ~1e-5 of potential on
            // the flanks of the large spikes.
            u.width = s.spec.width;
            u.dead = 1e-4 * u.width;
            u.peak = s.mirrored ? -s.spec.peak_x : s.spec.peak_x;
            u.sup = static_cast<double>(s.spec.index + 1) + s.spec.sup_residual;
            v.push_back(u);
        }
        std::sort(v.begin(), v.end(),
                  [](const Support& a, const Support& b) { return a.lo < b.lo; });
    }

    // Index of the support whose closed interval contains x, else -1.
    int inside(double x) const {
        auto it = std::upper_bound(v.begin(), v.end(), x,
                                   [](double xv, const Support& s) { return xv < s.lo; });
        if (it == v.begin()) return -1;
        int i = static_cast<int>(it - v.begin()) - 1;
        return x <= v[static_cast<size_t>(i)].hi ? i : -1;
    }

    // First support met when moving from x0 toward x1 whose interval the step
    // overlaps, excluding the one containing x0. Returns -1 if none.
    int first_crossed(double x0, double x1) const {
        double a = std::min(x0, x1), b = std::max(x0, x1);
        int skip = inside(x0);
        int best = -1;
        double best_dist = 0;
        for (size_t i = 0; i < v.size(); ++i) {
            if (v[i].hi <= a || v[i].lo >= b) continue;
            if (static_cast<int>(i) == skip) continue;
            double edge = x1 > x0 ? v[i].lo : v[i].hi;
            double dist = std::abs(edge - x0);
            if (best < 0 || dist < best_dist) {
                best = static_cast<int>(i);
                best_dist = dist;
            }
        }
        return best;
    }
};

struct StepPolicy {
    const SupportIndex& supports;

    // Hard cap inside a support: limit x travel per step to width/8 against
    // both the current velocity and the current force.
    double max_h(double x, double vx, double force) const {
        int i = supports.inside(x);
        if (i < 0) return std::numeric_limits<double>::infinity();
        double w = supports.v[static_cast<size_t>(i)].width;
        double by_v = (w / 8.0) / std::max(std::abs(vx), 1e-300);
        double by_a = std::sqrt((w / 4.0) / std::max(std::abs(force), 1e-300));
        return std::min(by_v, by_a);
    }

    // Veto for steps that would cross a support edge: re-aim the step at the
    // middle of the dead band just inside the edge. Retries converge secant
    // style, so the entering step keeps the natural gap-scale size instead of
    // collapsing toward the step-size floor.
    double veto(double x0, double x1) const {
        if (x1 == x0) return 1.0;
        int i = supports.first_crossed(x0, x1);
        if (i < 0) return 1.0;
        const Support& s = supports.v[static_cast<size_t>(i)];
        bool forward = x1 > x0;
        if (forward ? x1 <= s.lo + s.dead : x1 >= s.hi - s.dead) return 1.0;
        double target = forward ? s.lo + 0.5 * s.dead : s.hi - 0.5 * s.dead;
        double frac = (target - x0) / (x1 - x0);
        return std::clamp(frac, 1e-6, 0.9999);
    }
};

// Cancellation-free evaluation of h - V(x) around an anchor point inside one
// support. fam.value forms V = -x^4 + A b(t) from two terms of the peak's
// magnitude, so h - V read off it carries ~1e-14 of absolute noise; near a
// turning point h - V itself is far smaller than that. Anchored at x_ref,
//   h - V(x) = f0 + (xi^4 - xi_ref^4) - A b(t_ref) expm1(dphi)
// with xi = |x| stays well conditioned everywhere: the quartic difference is
// a polynomial in the displacement d = xi - xi_ref (exact by Sterbenz), and
// dphi is the algebraic increment of log b,
//   dphi = tau (1 - 2 t_ref - tau) / (4 t (1-t) t_ref (1-t_ref)),  tau = d/w,
// whose factors are all individually accurate.
struct SpikeFrame {
    double f0 = 0; // h - V(x_ref); any sign, the anchor need not be a root
    double h = 0;
    double x1 = 0, x2 = 0, x3 = 0; // xi_ref and its powers
    double w = 0, t_ref = 0, omt_ref = 0, one_m2t = 0, den_ref = 0;
    double Ab = 0; // A b(t_ref), recovered as V(x_ref) + xi_ref^4

    SpikeFrame(const SpikeFamily& fam, const Support& sp, double x_ref, double h_loc) {
        h = h_loc;
        x1 = std::abs(x_ref);
        x2 = x1 * x1;
        x3 = x2 * x1;
        w = sp.width;
        double xi_lo = sp.lo < 0 ? -sp.hi : sp.lo;
        t_ref = (x1 - xi_lo) / w;
        omt_ref = 1.0 - t_ref;
        one_m2t = 1.0 - 2.0 * t_ref;
        den_ref = 4.0 * t_ref * omt_ref;
        double V_ref = fam.value(x_ref);
        f0 = h - V_ref;
        Ab = V_ref + x2 * x2;
    }

    // Frame with a prescribed f0, typically carried over from another frame
    // so the two describe the same surface without a second noisy V lookup.
    SpikeFrame(const Support& sp, double x_ref, double h_loc, double f0_given) {
        h = h_loc;
        x1 = std::abs(x_ref);
        x2 = x1 * x1;
        x3 = x2 * x1;
        w = sp.width;
        double xi_lo = sp.lo < 0 ? -sp.hi : sp.lo;
        t_ref = (x1 - xi_lo) / w;
        omt_ref = 1.0 - t_ref;
        one_m2t = 1.0 - 2.0 * t_ref;
        den_ref = 4.0 * t_ref * omt_ref;
        f0 = f0_given;
        Ab = (h + x2 * x2) - f0;
    }

    // h - V at displacement d = xi - xi_ref.
    double hmV(double d) const {
        double poly = d * (4.0 * x3 + d * (6.0 * x2 + d * (4.0 * x1 + d)));
        double tau = d / w;
        double t = t_ref + tau, omt = omt_ref - tau;
        if (t <= 0.0 || omt <= 0.0) return f0 + poly + Ab; // past the bump support
        double dphi = tau * (one_m2t - tau) / (den_ref * t * omt);
        return f0 + poly - Ab * std::expm1(dphi);
    }

    // (h - V - f0)/d: the same expression with the leading factor of d taken
    // out analytically, for legs that start exactly at a rest point (f0 = 0).
    double slope(double d) const {
        double P = 4.0 * x3 + d * (6.0 * x2 + d * (4.0 * x1 + d));
        double tau = d / w;
        double t = t_ref + tau, omt = omt_ref - tau;
        if (t <= 0.0 || omt <= 0.0) return (hmV(d) - f0) / d; // d is large here
        double dphi = tau * (one_m2t - tau) / (den_ref * t * omt);
        double e = dphi == 0.0 ? 1.0 : std::expm1(dphi) / dphi;
        double dphi_over_d = (one_m2t - tau) / (w * den_ref * t * omt);
        return P - Ab * dphi_over_d * e;
    }

    double V(double d) const { return h - hmV(d); }

    // Spike frames work in xi = |x| (supports mirror in pairs).
    double disp(double x) const { return std::abs(x) - x1; }
};

// Frame for quartic-exact stretches: between supports, and inside their
// dead bands, V = -x^4 with no bump term at all, so traversals there can
// use the same quadrature maps as the spikes. Anchoring at a signed
// reference position keeps h - V = f0 + d P(d) cancellation-free where it
// matters: at the origin for crossings (both terms of h + x^4 are then
// nonnegative) and at the turning radius for reflections.
struct GapFrame {
    double f0 = 0, h = 0;
    double x1 = 0, x2 = 0, x3 = 0; // signed anchor and its powers

    GapFrame(double x_ref, double h_loc) {
        h = h_loc;
        x1 = x_ref;
        x2 = x1 * x1;
        x3 = x2 * x1;
        f0 = h + x2 * x2;
    }

    double slope(double d) const {
        return 4.0 * x3 + d * (6.0 * x2 + d * (4.0 * x1 + d));
    }
    double hmV(double d) const { return f0 + d * slope(d); }
    double V(double d) const { return h - hmV(d); }
    double disp(double x) const { return x - x1; }
};

// Forward-in-lambda integration of one branch with momenta already flipped
// for the backward direction. Spike and gap traversals alike advance by
// quadrature maps built on the conserved C = p_x^2 + V p_z^2: p_x is
// recovered pointwise from h - V and lambda, z pick up the integrals of
// 1/p_x and V/p_x (one complex quadrature per node pair). Turning points
// use x = x* - s u^2, which turns the 1/sqrt(h - V) endpoint singularity
// into a smooth integrand in u. A DP5 stepper with the aiming veto remains
// for lambda slivers and a few degenerate corners (frozen rest states,
// creep toward the origin, turnings inside a flushed band beyond a bump).
struct BranchRunner {
    const SpikeFamily& fam;
    const SupportIndex& supports;
    StepPolicy policy;
    double pe, pz, py; // effective (possibly flipped) constant momenta
    double lambda_max;
    OdeOptions opt;

    std::vector<TrajectorySample>& branch;
    std::size_t max_samples;
    DriftReport& drift;
    double refC, refH;

    using S = std::array<double, 5>; // eta, z, x, y, p_x

    S y{};
    double tau = 0, tau_comp = 0;
    std::size_t stride = 1, since = 0;

    // Map tolerances govern only the lambda parametrization (node momenta
    // come from the invariant surface directly), so they can sit well above
    // the stepper's local tolerance without touching conservation.
    static constexpr double kQuadRtol = 1e-9;
    static constexpr double kQuadAtol = 1e-17;
    static constexpr int kNodes = 10; // emitted map nodes per traversal piece

    // C = p_x^2 + V p_z^2 is exact on the true flow, so the energy driving
    // the support maps is a branch constant. Rebasing it on the incoming p_x
    // would compound stepper noise; using the constant instead projects the
    // state back onto the invariant surface at every traversal.
    double h_branch() const { return refC / (pz * pz); }

    double force_at(double x) const { return -0.5 * fam.eval(x, 1) * pz * pz; }

    void add_tau(double d) { // Kahan: traversal times can be << ulp(tau)
        double yk = d - tau_comp;
        double t = tau + yk;
        tau_comp = (t - tau) - yk;
        tau = t;
    }

    TrajectorySample make_sample(double t, const S& yy) const {
        TrajectorySample smp;
        smp.lambda = t;
        smp.point = {yy[0], yy[1], yy[2], yy[3]};
        smp.momentum = {pe, pz, yy[4], py};
        double V = fam.value(yy[2]);
        smp.velocity = {pz, pe + V * pz, yy[4], py};
        smp.H = pe * pz + 0.5 * V * pz * pz + 0.5 * yy[4] * yy[4] + 0.5 * py * py;
        smp.C = yy[4] * yy[4] + V * pz * pz;
        return smp;
    }

    void emit(double t, const S& yy) {
        TrajectorySample smp = make_sample(t, yy);
        drift.C = std::max(drift.C, std::abs(smp.C - refC) / std::max(1.0, std::abs(refC)));
        drift.H = std::max(drift.H, std::abs(smp.H - refH) / std::max(1.0, std::abs(refH)));
        drift.max_abs_x = std::max(drift.max_abs_x, std::abs(yy[2]));
        drift.max_abs_zdot = std::max(drift.max_abs_zdot, std::abs(smp.velocity.z));
        ++drift.steps;
        if (++since >= stride) {
            since = 0;
            branch.push_back(smp);
            if (branch.size() > max_samples) { // thin: keep every other one
                std::size_t k = 0;
                for (std::size_t i = 1; i < branch.size(); i += 2) branch[k++] = branch[i];
                branch.resize(k);
                stride *= 2;
            }
        }
    }

    // Flight integrals over [a, b] (signed) while p_x keeps the sign dir:
    // real part = elapsed lambda, imaginary part = integral of V d lambda.
    template <class Frame>
    std::complex<double> flight(const Frame& fr, double a, double b, double dir) const {
        const double apz = std::abs(pz);
        auto f = [&](double x) {
            double d = fr.disp(x);
            double g = fr.hmV(d);
            double px = dir * apz * std::sqrt(std::max(g, 0.0));
            return std::complex<double>(1.0, fr.V(d)) / px;
        };
        return integrate<std::complex<double>>(f, a, b, kQuadRtol, kQuadAtol);
    }

    // Same integrals along a turning leg x = x_star - dir u^2, u in
    // [u_lo, u_hi]; always a positive lambda span. dsign maps u^2 to the
    // frame displacement (the sign flips on mirrored supports).
    template <class Frame>
    std::complex<double> leg(const Frame& fr, double u_lo, double u_hi,
                             double dsign) const {
        const double apz = std::abs(pz);
        auto f = [&](double u) {
            double d = dsign * u * u;
            double g = fr.hmV(d);
            double apx = apz * std::sqrt(std::max(g, 0.0));
            return std::complex<double>(2.0 * u, 2.0 * u * fr.V(d)) / apx;
        };
        return integrate<std::complex<double>>(f, u_lo, u_hi, kQuadRtol, kQuadAtol);
    }

    // Leg variant for releases from rest: there f0 = 0 and the integrand's
    // u/sqrt(u^2 ...) is cancelled analytically via the factored slope.
    template <class Frame>
    std::complex<double> rest_leg(const Frame& fr, double u_lo, double u_hi,
                                  double dsign) const {
        const double apz = std::abs(pz);
        auto f = [&](double u) {
            double d = dsign * u * u;
            double q = dsign * fr.slope(d); // (h - V)/u^2
            double root = apz * std::sqrt(std::max(q, 0.0));
            return std::complex<double>(2.0, 2.0 * fr.V(d)) / root;
        };
        return integrate<std::complex<double>>(f, u_lo, u_hi, kQuadRtol, kQuadAtol);
    }

    // Apply one map increment; false means the lambda budget ran out and the
    // branch was finished exactly at lambda_max by a plain capped stepper.
    bool apply(const std::complex<double>& Q, double x_next, double px_next) {
        double dl = Q.real();
        if (tau + dl > lambda_max) return sliver_finish();
        y[0] += pz * dl;
        y[1] += pe * dl + pz * Q.imag();
        y[3] += py * dl;
        y[2] = x_next;
        y[4] = px_next;
        add_tau(dl);
        emit(tau, y);
        return true;
    }

    // Finish the branch with the DP5 stepper under the interior caps. Used
    // when lambda_max lands inside a support traversal; the remaining span is
    // at most one map subinterval.
    bool sliver_finish() {
        // A sub-ulp remainder cannot be stepped (and moves nothing): the gap
        // to lambda_max is then below one rounding of every coordinate.
        if (lambda_max - tau > 4.0 * std::numeric_limits<double>::epsilon() * lambda_max) {
            auto rhs = [this](double, const S& yy, S& dy) {
                double Vp = fam.eval(yy[2], 1);
                double V = fam.value(yy[2]);
                dy[0] = pz;
                dy[1] = pe + V * pz;
                dy[2] = yy[4];
                dy[3] = py;
                dy[4] = -0.5 * Vp * pz * pz;
            };
            auto obs = [&](double t, const S& yy) { emit(t, yy); };
            auto cap = [&](double, const S& yy) {
                return policy.max_h(yy[2], yy[4], force_at(yy[2]));
            };
            y = integrate_ode<5>(rhs, tau, y, lambda_max, opt, nullptr, obs, cap);
        }
        tau = lambda_max;
        tau_comp = 0;
        return false;
    }

    // DP5 between supports (and for rest states). Stops after landing inside
    // a support other than the one the segment started in; returns true in
    // that case, false once lambda_max is reached.
    bool gap() {
        auto rhs = [this](double, const S& yy, S& dy) {
            double Vp = fam.eval(yy[2], 1);
            double V = fam.value(yy[2]);
            dy[0] = pz;
            dy[1] = pe + V * pz;
            dy[2] = yy[4];
            dy[3] = py;
            dy[4] = -0.5 * Vp * pz * pz;
        };
        bool stopped = false;
        int start_sup = supports.inside(y[2]);
        bool left = start_sup < 0;
        auto obs = [&](double t, const S& yy) -> bool {
            emit(t, yy);
            int c = supports.inside(yy[2]);
            if (!left && c != start_sup) left = true;
            if (left && c >= 0) {
                stopped = true;
                return false;
            }
            return true;
        };
        auto cap = [&](double, const S& yy) {
            return policy.max_h(yy[2], yy[4], force_at(yy[2]));
        };
        auto vet = [&](double, const S& y0, double, const S& y1) {
            return policy.veto(y0[2], y1[2]);
        };
        double reached = tau;
        y = integrate_ode<5>(rhs, tau, y, lambda_max, opt, nullptr, obs, cap, vet,
                             &reached);
        tau = reached;
        tau_comp = 0;
        return stopped;
    }

    // Locate the first root of h = V along the path from x_in to x_exit, if
    // any, using the traversal's own frame so the sign decisions agree with
    // the quadrature integrands. The scan includes the stored argmax of V, so
    // a barely-supercritical ridge cannot slip between scan nodes.
    bool find_turning(const SpikeFrame& fr, double x_in, double x_exit,
                      const Support& sp, double* x_star) const {
        auto f = [&](double x) { return fr.hmV(fr.disp(x)); };
        double t_peak = (sp.peak - x_in) / (x_exit - x_in);
        double prev = x_in;
        for (int k = 1; k <= 64; ++k) {
            double tk = k / 64.0;
            if (t_peak > (k - 1) / 64.0 && t_peak < tk) {
                double xp = sp.peak;
                if (f(xp) <= 0.0) {
                    *x_star = bisect_root(fr, prev, xp);
                    return true;
                }
                prev = xp;
            }
            double xk = x_in + (x_exit - x_in) * tk;
            if (f(xk) <= 0.0) {
                *x_star = bisect_root(fr, prev, xk);
                return true;
            }
            prev = xk;
        }
        return false;
    }

    // Bisection keeping the side where h - V > 0; returns that side, so the
    // leg integrand never sees a negative radicand.
    double bisect_root(const SpikeFrame& fr, double a, double b) const {
        for (int it = 0; it < 200; ++it) {
            double m = 0.5 * (a + b);
            if (m == a || m == b) break;
            (fr.hmV(fr.disp(m)) > 0.0 ? a : b) = m;
        }
        return a;
    }

    // Node count per traversal, scaled to the x-span: nodes only set the
    // emission density (the quadrature between them is adaptive and the
    // momenta at them are exact), so thin spikes need no more than a couple
    // while long flights keep the sampling of the curve reasonable.
    static int node_count(double span) {
        if (span >= 1.0) return kNodes;
        return span >= 1e-2 ? 4 : 2;
    }

    // Cross from x_in to x_exit without a turning point in between.
    template <class Frame>
    bool crossing(const Frame& fr, double x_in, double x_exit, double dir) {
        const int nn = node_count(std::abs(x_exit - x_in));
        double x0 = x_in;
        for (int k = 1; k <= nn; ++k) {
            double x1 = k == nn ? x_exit : x_in + (x_exit - x_in) * k / nn;
            std::complex<double> Q = flight(fr, x0, x1, dir);
            if (!apply(Q, x1, node_px(fr, x1, dir))) return false;
            x0 = x1;
        }
        return true;
    }

    // Reflect inside the support: in-leg to the turning point, out-leg back
    // to the entry point with the momentum exactly negated. The leg frame is
    // re-anchored at the turning point (so its conditioning is best exactly
    // where h - V vanishes) with f0 carried over from the caller, which keeps
    // it nonnegative there and consistent with how the apex was chosen.
    bool reflection(const SpikeFrame& fp, const Support& sp, double x_in,
                    double px_in, double x_star, double dir, double f0_apex) {
        SpikeFrame fr(sp, x_star, fp.h, std::max(f0_apex, 0.0));
        if (fr.Ab < 1e-200) return gap(); // turning in the flushed tail: step it
        const double dsign = x_star < 0 ? dir : -dir; // d = dsign u^2
        const double u_max = std::sqrt(std::max((x_star - x_in) * dir, 0.0));
        const int m = std::max(1, node_count(u_max * u_max) / 2);
        for (int k = 0; k < m; ++k) { // in-leg: u descends to 0
            double u_hi = u_max * (m - k) / m;
            double u_lo = u_max * (m - k - 1) / m;
            std::complex<double> Q = leg(fr, u_lo, u_hi, dsign);
            double x1 = x_star - dir * u_lo * u_lo;
            if (!apply(Q, x1, node_px(fr, x1, dir))) return false;
        }
        for (int k = 0; k < m; ++k) { // out-leg: u climbs back
            double u_lo = u_max * k / m;
            double u_hi = u_max * (k + 1) / m;
            std::complex<double> Q = leg(fr, u_lo, u_hi, dsign);
            double x1, px1;
            if (k == m - 1) {
                x1 = x_in;
                px1 = -px_in;
            } else {
                x1 = x_star - dir * u_hi * u_hi;
                px1 = -node_px(fr, x1, dir);
            }
            if (!apply(Q, x1, px1)) return false;
        }
        return true;
    }

    // Momentum paired with an emitted node, evaluated at the displacement of
    // the stored double itself (exact for values near the anchor), so the
    // (x, p_x) pair sits on the frame's surface to roundoff. Evaluating at
    // the ideal pre-rounding position instead would cost |V'| ulp(x)/2,
    // which inside a thin spike is many orders above the drift budget.
    template <class Frame>
    double node_px(const Frame& fr, double x1, double dir) const {
        double d = fr.disp(x1);
        return dir * std::abs(pz) * std::sqrt(std::max(fr.hmV(d), 0.0));
    }

    // Released from rest inside a support (h = V here, nonzero slope): slide
    // downhill, either out of the support or into the in-support turning
    // point of a micro well between the bump and the quartic base.
    bool release(int i) {
        const Support& sp = supports.v[static_cast<size_t>(i)];
        double x_star = y[2];
        double s_out = fam.eval(x_star, 1) < 0 ? 1.0 : -1.0; // downhill of V
        double x_exit = s_out > 0 ? sp.hi - 0.5 * sp.dead : sp.lo + 0.5 * sp.dead;
        if ((x_exit - x_star) * s_out <= 0) return gap_segment();
        double h_loc = fam.value(x_star);
        SpikeFrame fr(fam, sp, x_star, h_loc); // f0 = 0 exactly
        if (fr.Ab < 1e-200) return gap_segment(); // rest in the flushed tail
        const double dsign = x_star < 0 ? -s_out : s_out;
        double u_end = std::sqrt((x_exit - x_star) * s_out);

        // The slide can hit h = V again before the exit; stop there instead.
        double u_prev = 0;
        bool turns = false;
        for (int k = 1; k <= 64 && !turns; ++k) {
            double uk = u_end * k / 64.0;
            if (fr.hmV(dsign * uk * uk) <= 0.0) {
                double a = u_prev, b = uk; // keep h - V > 0 at a
                for (int it = 0; it < 200; ++it) {
                    double mid = 0.5 * (a + b);
                    if (mid == a || mid == b) break;
                    (fr.hmV(dsign * mid * mid) > 0.0 ? a : b) = mid;
                }
                u_end = a;
                turns = true;
            }
            u_prev = uk;
        }

        const int m = std::max(1, node_count(u_end * u_end) / 2);
        for (int k = 0; k < m; ++k) {
            double u_lo = u_end * k / m;
            double u_hi = u_end * (k + 1) / m;
            std::complex<double> Q = rest_leg(fr, u_lo, u_hi, dsign);
            double x1 = (!turns && k == m - 1) ? x_exit : x_star + s_out * u_hi * u_hi;
            if (!apply(Q, x1, node_px(fr, x1, s_out))) return false;
        }
        return true;
    }

    // Advance a segment lying in quartic-exact territory (between supports,
    // or in the flushed dead band of one) by the same quadrature maps the
    // spikes use. The DP5 stepper remains only for states frozen at the
    // origin and for paths creeping toward it with vanishing energy.
    bool gap_segment() {
        double x0 = y[2], px0 = y[4];
        if (px0 == 0.0 && x0 == 0.0) return gap(); // force-free equilibrium
        double dir = px0 != 0.0 ? (px0 > 0 ? 1.0 : -1.0) : (x0 > 0 ? 1.0 : -1.0);
        double h = h_branch();

        // Destination: nearest dead-band aim point strictly ahead along dir.
        // When the state sits in a support's own flushed band, that support's
        // aim point lies behind the motion, so the scan lands one over.
        double dest = 0;
        bool have = false;
        for (const Support& s : supports.v) {
            double a = dir > 0 ? s.lo + 0.5 * s.dead : s.hi - 0.5 * s.dead;
            if ((a - x0) * dir <= 0.0) continue;
            if (!have || (a - dest) * dir < 0.0) {
                dest = a;
                have = true;
            }
        }
        if (!have) throw ToleranceFailure("integrate: path escaped the indexed barrier");

        if (px0 == 0.0) return gap_release(x0, dest, dir);

        bool inward = x0 * dir < 0.0;
        if (inward && h >= 0.0 && h < 1e-10 * (1.0 + sq(sq(x0))))
            return gap(); // creeping toward the origin equilibrium
        if (inward && h < 0.0) {
            double xt = std::copysign(std::pow(-h, 0.25), x0);
            if ((xt - dest) * dir < 0.0) // turning met before the far support
                return gap_reflection(x0, px0, xt, dir);
            return crossing(GapFrame(xt, h), x0, dest, dir);
        }
        double anchor = h < 0.0 ? std::copysign(std::pow(-h, 0.25), x0) : 0.0;
        return crossing(GapFrame(anchor, h), x0, dest, dir);
    }

    // Reflect at the quartic turning radius. The frame anchors at the
    // turning point, so the leg radicand is exact where it vanishes; the
    // out-leg exits at the entry point with the momentum exactly negated.
    bool gap_reflection(double x_in, double px_in, double xt, double dir) {
        GapFrame fr(xt, h_branch());
        fr.f0 = std::max(fr.f0, 0.0); // anchor rounding must not poison legs
        const double dsign = -dir;    // d = x - xt = dsign u^2 along the path
        const double u_max = std::sqrt(std::max((x_in - xt) * -dir, 0.0));
        const int m = std::max(1, node_count(u_max * u_max) / 2);
        for (int k = 0; k < m; ++k) { // in-leg: u descends to 0
            double u_hi = u_max * (m - k) / m;
            double u_lo = u_max * (m - k - 1) / m;
            std::complex<double> Q = leg(fr, u_lo, u_hi, dsign);
            double x1 = xt - dir * u_lo * u_lo;
            if (!apply(Q, x1, node_px(fr, x1, dir))) return false;
        }
        for (int k = 0; k < m; ++k) { // out-leg: u climbs back
            double u_lo = u_max * k / m;
            double u_hi = u_max * (k + 1) / m;
            std::complex<double> Q = leg(fr, u_lo, u_hi, dsign);
            double x1, px1;
            if (k == m - 1) {
                x1 = x_in;
                px1 = -px_in;
            } else {
                x1 = xt - dir * u_hi * u_hi;
                px1 = -node_px(fr, x1, dir);
            }
            if (!apply(Q, x1, px1)) return false;
        }
        return true;
    }

    // Released from rest between the bumps: the local energy is V(x0)
    // exactly, and the pure quartic can never recapture an outward slide,
    // so a single chain of rest legs reaches the destination aim point.
    bool gap_release(double x0, double dest, double dir) {
        GapFrame fr(x0, -sq(sq(x0))); // f0 = 0 exactly
        double u_end = std::sqrt((dest - x0) * dir);
        const int m = std::max(1, node_count(u_end * u_end) / 2);
        for (int k = 0; k < m; ++k) {
            double u_lo = u_end * k / m;
            double u_hi = u_end * (k + 1) / m;
            std::complex<double> Q = rest_leg(fr, u_lo, u_hi, dir);
            double x1 = k == m - 1 ? dest : x0 + dir * u_hi * u_hi;
            if (!apply(Q, x1, node_px(fr, x1, dir))) return false;
        }
        return true;
    }

    bool support_phase(int i) {
        const Support& sp = supports.v[static_cast<size_t>(i)];
        double dir = y[4] > 0 ? 1.0 : -1.0;
        double x_in = y[2], px_in = y[4];
        double x_exit = dir > 0 ? sp.hi - 0.5 * sp.dead : sp.lo + 0.5 * sp.dead;
        // Already in the far dead band: quartic territory from here on.
        if ((x_exit - x_in) * dir <= 0) return gap_segment();
        SpikeFrame fp(fam, sp, sp.peak, h_branch());
        // Classify against the calibrated supremum. crit is the floor below
        // which h and the ridge top cannot be told apart in doubles: the dip
        // of h - V under zero would be narrower than one grid step of x, so
        // no quadrature (and no scan) can resolve it. Curvature at the ridge
        // is -8 Ab / w^2 up to the quartic's small correction.
        double gap_est = fp.h - sp.sup;
        double kEps = std::numeric_limits<double>::epsilon();
        double crit = std::max(4000.0 * fp.Ab * sq(fp.x1 * kEps / fp.w),
                               100.0 * kEps * (std::abs(fp.h) + fp.x2 * fp.x2 + fp.Ab));
        if (gap_est >= crit) // strictly above the ridge: no turning exists
            return crossing(fp, x_in, x_exit, dir);
        double x_star = 0;
        if (find_turning(fp, x_in, x_exit, sp, &x_star))
            return reflection(fp, sp, x_in, px_in, x_star, dir,
                              fp.hmV(std::abs(x_star) - fp.x1));
        // h is at or within the floor of the supremum and no resolvable root
        // exists on the path: the turning point is indistinguishable from the
        // ridge itself. Reflect there; the lambda spent hugging the ridge
        // differs from the truth by a log-small, sub-resolution amount.
        if ((sp.peak - x_in) * dir > 0.0)
            return reflection(fp, sp, x_in, px_in, sp.peak, dir, crit);
        return crossing(fp, x_in, x_exit, dir); // ridge already behind
    }

    void run() {
        std::int64_t segments = 0;
        const double tail = 4.0 * std::numeric_limits<double>::epsilon() * lambda_max;
        while (lambda_max - tau > tail) {
            if (++segments > 100'000'000)
                throw ToleranceFailure("integrate: segment budget exhausted");
            int cur = supports.inside(y[2]);
            bool more;
            if (cur >= 0 && y[4] != 0.0)
                more = support_phase(cur);
            else if (cur >= 0 && fam.eval(y[2], 1) != 0.0)
                more = release(cur);
            else if (cur < 0)
                more = gap_segment();
            else
                more = gap(); // frozen at an interior critical point of V
            if (!more) break; // lambda_max reached
        }
    }
};

} // namespace

double GeodesicFlow::hamiltonian(const PhasePoint& s) const {
    const Covector& p = s.momentum;
    double V = fam_.value(s.point.x);
    return p.eta * p.z + 0.5 * V * p.z * p.z + 0.5 * p.x * p.x + 0.5 * p.y * p.y;
}

ConservedSet GeodesicFlow::conserved(const PhasePoint& s) const {
    ConservedSet c;
    c.p_eta = s.momentum.eta;
    c.p_z = s.momentum.z;
    c.p_y = s.momentum.y;
    double V = fam_.value(s.point.x);
    c.C = s.momentum.x * s.momentum.x + V * c.p_z * c.p_z;
    c.H = hamiltonian(s);
    return c;
}

ConfinementReport GeodesicFlow::predict_barrier(const PhasePoint& s) const {
    if (s.momentum.z == 0) throw ZeroPz("predict_barrier: p_z must be nonzero");
    ConservedSet c = conserved(s);
    double height = c.C / (c.p_z * c.p_z);
    double x0 = std::abs(s.point.x);

    int n = 1;
    while (!(n + 1.0 > height && spike_center(n) >= x0)) {
        ++n;
        if (n > 100000)
            throw NoBarrier("predict_barrier: spike search exceeded internal cap");
    }

    ConfinementReport rep;
    rep.barrier_spikes = {n, n};
    rep.D = spike_center(n) + spike_width(n);
    double quartic_end = rep.D * rep.D * rep.D * rep.D;
    double peak = 0;
    for (int k = 1; k <= n; ++k)
        peak = std::max(peak, k + 1.0 + fam_.spike(k).sup_residual);
    rep.E = std::max(quartic_end, peak);
    rep.zdot_bound = std::abs(c.p_eta) + rep.E * std::abs(c.p_z);
    return rep;
}

Trajectory GeodesicFlow::integrate(const PhasePoint& s0, double lambda_max, double tol,
                                   std::size_t max_samples) const {
    if (!(tol > 0)) throw PreconditionViolation("integrate: tol must be positive");
    if (!(lambda_max > 0)) throw PreconditionViolation("integrate: lambda_max must be positive");

    const double p_eta = s0.momentum.eta, p_z = s0.momentum.z, p_y = s0.momentum.y;

    double reach;
    if (p_z != 0) {
        reach = predict_barrier(s0).D + 1.0;
    } else {
        reach = std::abs(s0.point.x) + std::abs(s0.momentum.x) * lambda_max + 1.0;
    }
    fam_.prepare_x(reach);
    SupportIndex supports(fam_, reach);

    Trajectory traj;
    ConservedSet ref = conserved(s0);
    traj.drift.max_abs_x = std::abs(s0.point.x);
    traj.drift.max_abs_zdot = std::abs(p_eta + fam_.value(s0.point.x) * p_z);

    OdeOptions opt;
    // The caller's tol is a drift budget over the whole run, not a local
    // step tolerance; integrate tighter so accumulated error stays well
    // inside 100*tol across thousands of inter-spike flights.
    opt.rtol = tol * 0.005;
    opt.atol = tol * 0.005;
    opt.h_max = std::max(lambda_max / 16.0, 1e-6);

    using S = std::array<double, 5>;

    // Each branch integrates forward in lambda with every momentum flipped
    // for the backward one (the flow is invariant under p -> -p together
    // with lambda -> -lambda), then transforms back.
    auto run_branch = [&](double sign) {
        std::vector<TrajectorySample> branch;
        BranchRunner run{fam_,
                         supports,
                         StepPolicy{supports},
                         sign * p_eta,
                         sign * p_z,
                         sign * p_y,
                         lambda_max,
                         opt,
                         branch,
                         max_samples,
                         traj.drift,
                         ref.C,
                         ref.H};
        run.y = S{s0.point.eta, s0.point.z, s0.point.x, s0.point.y, sign * s0.momentum.x};

        if (p_z == 0) {
            // Free motion: V never feeds back into the flow.
            auto rhs = [&](double, const S& yy, S& dy) {
                dy[0] = run.pz;
                dy[1] = run.pe;
                dy[2] = yy[4];
                dy[3] = run.py;
                dy[4] = 0.0;
            };
            auto obs = [&](double t, const S& yy) { run.emit(t, yy); };
            run.y = integrate_ode<5>(rhs, 0.0, run.y, lambda_max, opt, nullptr, obs);
            run.tau = lambda_max;
        } else {
            run.run();
        }
        if (branch.empty() || branch.back().lambda != lambda_max)
            branch.push_back(run.make_sample(lambda_max, run.y));

        for (TrajectorySample& smp : branch) {
            smp.lambda = s0.lambda + sign * smp.lambda;
            smp.momentum = {sign * smp.momentum.eta, sign * smp.momentum.z,
                            sign * smp.momentum.x, sign * smp.momentum.y};
            smp.velocity = {sign * smp.velocity.eta, sign * smp.velocity.z,
                            sign * smp.velocity.x, sign * smp.velocity.y};
        }
        return branch;
    };

    std::vector<TrajectorySample> back = run_branch(-1.0);
    std::reverse(back.begin(), back.end());
    traj.samples = std::move(back);
    TrajectorySample anchor;
    anchor.lambda = s0.lambda;
    anchor.point = s0.point;
    anchor.momentum = s0.momentum;
    double V0 = fam_.value(s0.point.x);
    anchor.velocity = {p_z, p_eta + V0 * p_z, s0.momentum.x, p_y};
    anchor.H = ref.H;
    anchor.C = ref.C;
    traj.samples.push_back(anchor);
    std::vector<TrajectorySample> fwd = run_branch(1.0);
    traj.samples.insert(traj.samples.end(), fwd.begin(), fwd.end());
    return traj;
}

double GeodesicFlow::christoffel_crosscheck(const PhasePoint& s0, double lambda_max,
                                            double tol, int checkpoints) const {
    if (checkpoints < 1) throw PreconditionViolation("christoffel_crosscheck: checkpoints >= 1");
    const double p_eta = s0.momentum.eta, p_z = s0.momentum.z, p_y = s0.momentum.y;

    double reach;
    if (p_z != 0) {
        reach = predict_barrier(s0).D + 1.0;
    } else {
        reach = std::abs(s0.point.x) + std::abs(s0.momentum.x) * lambda_max + 1.0;
    }
    fam_.prepare_x(reach);
    SupportIndex supports(fam_, reach);

    using SH = std::array<double, 5>;
    auto rhs_h = [&](double, const SH& y, SH& dy) {
        double Vp = fam_.eval(y[2], 1);
        dy[0] = p_z;
        dy[1] = p_eta + fam_.value(y[2]) * p_z;
        dy[2] = y[4];
        dy[3] = p_y;
        dy[4] = -0.5 * Vp * p_z * p_z;
    };

    // Second-order form: the only curvature terms are
    //   xddot = -(1/2) V' etadot^2,   zddot = V' xdot etadot.
    using SL = std::array<double, 8>;
    auto rhs_l = [&](double, const SL& y, SL& dy) {
        double Vp = fam_.eval(y[2], 1);
        dy[0] = y[4];
        dy[1] = y[5];
        dy[2] = y[6];
        dy[3] = y[7];
        dy[4] = 0.0;
        dy[5] = Vp * y[6] * y[4];
        dy[6] = -0.5 * Vp * y[4] * y[4];
        dy[7] = 0.0;
    };

    OdeOptions opt;
    opt.rtol = tol * 0.005;
    opt.atol = tol * 0.005;

    double dev = 0;
    for (double dir : {-1.0, 1.0}) {
        StepPolicy policy{supports};
        auto cap_h = [&](double, const SH& y) {
            double force = -0.5 * fam_.eval(y[2], 1) * p_z * p_z;
            return policy.max_h(y[2], y[4], force);
        };
        auto veto_h = [&](double, const SH& y0, double, const SH& y1) {
            return policy.veto(y0[2], y1[2]);
        };
        auto cap_l = [&](double, const SL& y) {
            double force = -0.5 * fam_.eval(y[2], 1) * y[4] * y[4];
            return policy.max_h(y[2], y[6], force);
        };
        auto veto_l = [&](double, const SL& y0, double, const SL& y1) {
            return policy.veto(y0[2], y1[2]);
        };

        double V0 = fam_.value(s0.point.x);
        SH yh{s0.point.eta, s0.point.z, s0.point.x, s0.point.y, s0.momentum.x};
        SL yl{s0.point.eta, s0.point.z,           s0.point.x, s0.point.y,
              p_z,          p_eta + V0 * p_z,     s0.momentum.x, p_y};

        double lam = s0.lambda;
        for (int k = 1; k <= checkpoints; ++k) {
            double lam_next = s0.lambda + dir * lambda_max * k / checkpoints;
            yh = integrate_ode<5>(rhs_h, lam, yh, lam_next, opt, nullptr,
                                  detail::NoObserver{}, cap_h, veto_h);
            yl = integrate_ode<8>(rhs_l, lam, yl, lam_next, opt, nullptr,
                                  detail::NoObserver{}, cap_l, veto_l);
            for (int c = 0; c < 4; ++c) dev = std::max(dev, std::abs(yh[c] - yl[c]));
            lam = lam_next;
        }
    }
    return dev;
}

std::vector<CurveSample> to_curve_samples(const Trajectory& traj) {
    std::vector<CurveSample> out;
    out.reserve(traj.samples.size());
    for (const TrajectorySample& s : traj.samples) out.push_back({s.point, s.velocity});
    return out;
}

} // namespace spikewave
