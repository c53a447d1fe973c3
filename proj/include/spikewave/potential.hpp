// potential.hpp -- the one-dimensional potential V(x) = -x^4 + sum of
// calibrated bump spikes, mirrored about x = 0.
//
// Spike n (n >= 1) sits on [c_n, c_n + w_n] with
//   c_n = (n+1)/2 + (3/2) sqrt(n+1),   w_n = min(0.4, (n+1)^{-3.5}/4),
// and its amplitude A_n is calibrated so that
//   sup_x (sigma_n(x) - x^4) = n + 1.
// The supports are pairwise disjoint and the widths are summable against n^2,
// which is what keeps the metric geodesically complete while the spikes grow.
#pragma once

#include <vector>

#include "spikewave/errors.hpp"

namespace spikewave {

// Smooth bump supported on [0,1]: b(t) = exp(1 - 1/(4t(1-t))), max b = b(1/2) = 1.
struct BumpProfile {
    static double value(double t);
    static double deriv1(double t);
    static double deriv2(double t);
    // Extended-precision value used by amplitude calibration, where
    // A_n * b(t) - x^4 suffers catastrophic cancellation at large n.
    static long double value_l(long double t);
};

double spike_center(int n); // valid for n >= 0; the family itself uses n >= 1
double spike_width(int n);

struct SpikeSpec {
    int index = 0;
    double center = 0;
    double width = 0;
    double amplitude = 0;     // display rounding of the calibrated amplitude
    double peak_x = 0;        // argmax of sigma_n(x) - x^4 over the support
    double sup_residual = 0;  // sup(sigma_n - x^4) - (n+1), extended precision
};

struct ActiveSpike {
    SpikeSpec spec;
    bool mirrored = false; // true: support is [-center-width, -center]
    double lo = 0, hi = 0; // actual support interval on this side
};

struct SummabilityReport {
    std::vector<double> partial_sums; // cumulative eps_n * n^2, n = 1..N
    double bound = 0;                 // zeta(3/2)/4, the width-rule bound
    bool within_bound = false;
};

// Calibrated spike table with lazy extension.
//
// Concurrency: eval() and active_spikes() extend the table when asked about
// x beyond the prepared range, which mutates internal state. Call prepare_x /
// prepare_count up front before sharing a family across threads; after that
// every accessor is const and lock-free.
class SpikeFamily {
  public:
    explicit SpikeFamily(double calibration_tol = 1e-10);

    void prepare_x(double x_max) const;
    void prepare_count(int n_max) const;
    int prepared_count() const { return static_cast<int>(table_.size()); }

    // V and its first two derivatives. order in {0,1,2}.
    double eval(double x, int order = 0) const;
    double value(double x) const { return eval(x, 0); }

    // Spike term of V alone (the mirrored bump sum, without -x^4).
    double spike_part(double x, int order = 0) const;

    // By value: the table may reallocate when a later call extends it.
    SpikeSpec spike(int n) const;

    // All spikes, on either side of the origin, whose support meets [a, b].
    std::vector<ActiveSpike> active_spikes(double a, double b) const;

    // Sorted support endpoints inside [a, b]; integrators split panels here.
    std::vector<double> support_edges(double a, double b) const;

    SummabilityReport summability(int n_terms) const;

    // Fresh extended-precision maximization of sigma_n(x) - x^4 - (n+1).
    double sup_residual(int n) const;

    double calibration_tol() const { return cal_tol_; }

  private:
    void extend_to_cover(double s) const;
    void calibrate_next() const;
    // -1 if s is not inside any positive-side support, else the table slot.
    int locate(double s) const;

    double cal_tol_;
    mutable std::vector<SpikeSpec> table_;      // slot i holds spike n = i+1
    mutable std::vector<long double> amps_;     // calibrated amplitudes
    mutable std::vector<double> centers_;       // search index
};

// Calibrate a single amplitude from scratch; returns the extended-precision
// value. Used by SpikeFamily and by tests that want an independent run.
long double calibrate_amplitude(int n, double tol);

} // namespace spikewave
