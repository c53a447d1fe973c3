// geometry.hpp -- the plane-wave metric built on the spike potential:
//
//   ds^2 = -V(x) deta^2 + 2 deta dz + dx^2 + dy^2
//
// with its causal classification, the cone inequalities that confine causal
// directions wherever V <= n, the causal-order check along sampled curves,
// and a priori bounds on causal diamonds.
#pragma once

#include <array>
#include <optional>
#include <vector>

#include "spikewave/errors.hpp"
#include "spikewave/potential.hpp"
#include "spikewave/util.hpp"

namespace spikewave {

// Coordinate order everywhere: (eta, z, x, y).
struct SpacetimePoint {
    double eta = 0, z = 0, x = 0, y = 0;
    friend bool operator==(const SpacetimePoint&, const SpacetimePoint&) = default;
};

// Contravariant components X^mu.
struct TangentVector {
    double eta = 0, z = 0, x = 0, y = 0;
};

// Covariant components p_mu.
struct Covector {
    double eta = 0, z = 0, x = 0, y = 0;
};

enum class CausalKind { Timelike, Null, Spacelike, Zero };
enum class Orientation { Future, Past, NA };

struct CausalClass {
    CausalKind kind = CausalKind::Zero;
    Orientation orientation = Orientation::NA;
};

// Residuals of the four cone inequalities at a point with |x| <= x_n.
// pass means slack1 > 0 and slack2..slack4 >= 0.
struct ConeReport {
    double slack1 = 0; // sqrt(n) X^eta - X^z / sqrt(n)
    double slack2 = 0; // slack1 - |X^x|
    double slack3 = 0; // slack1 - |X^y|
    double slack4 = 0; // (n X^eta - X^z) - |X^z|
    bool pass = false;
};

struct CurveSample {
    SpacetimePoint point;
    TangentVector velocity;
};

struct CausalOrderReport {
    bool eta_nondecreasing = false;
    bool z_decreasing_when_eta_flat = false; // vacuously true unless eta is flat
    bool endpoints_distinct = false;         // or the curve is trivial
    bool nontrivial = false;
    bool pass = false;
};

// A priori bounds on J^+(p) cap J^-(q): every point of the diamond satisfies
// |x| <= x_max, |y - y0| <= y_span, |z - z0| <= z_span, eta in [eta_min, eta_max].
struct DiamondBound {
    int N = 0;
    double x_max = 0;  // spike_center(N)
    double y_span = 0; // N + 1
    double z_span = 0; // (N + 1) sqrt(N)
    double eta_min = 0, eta_max = 0;
};

class Geometry {
  public:
    explicit Geometry(const SpikeFamily& family) : fam_(family) {}

    double metric_eval(const SpacetimePoint& p, const TangentVector& X,
                       const TangentVector& Y) const;
    double inverse_metric_eval(const SpacetimePoint& p, const Covector& pm,
                               const Covector& qm) const;

    std::array<std::array<double, 4>, 4> metric_matrix(const SpacetimePoint& p) const;
    std::array<std::array<double, 4>, 4> inverse_metric_matrix(const SpacetimePoint& p) const;

    // Coordinate determinant of the metric; -1 identically by block structure.
    double metric_determinant(const SpacetimePoint& p) const;

    CausalClass classify_vector(const SpacetimePoint& p, const TangentVector& X) const;

    // Requires |p.x| <= spike_center(n) and X causal future at p.
    ConeReport cone_inequalities(const SpacetimePoint& p, const TangentVector& X,
                                 int n) const;

    // Draw a strictly timelike future-directed vector at p. The z component
    // is placed below the null bound solved from the quadratic in X^z; no
    // uniformity is claimed.
    TangentVector sample_causal_future(const SpacetimePoint& p, Rng& rng) const;

    const SpikeFamily& family() const { return fam_; }

  private:
    const SpikeFamily& fam_;
};

// Verify causal ordering along a sampled curve from p to q: every velocity
// must classify causal future (else NotCausal); eta must be nondecreasing;
// if eta ends where it started, z must strictly decrease; a nontrivial curve
// must not return to its start.
CausalOrderReport check_causal_order(const Geometry& geom, const SpacetimePoint& p,
                                     const SpacetimePoint& q,
                                     const std::vector<CurveSample>& curve);

// Bounds on the causal diamond, or nullopt when it is provably empty
// (eta1 < eta0, or eta1 == eta0 with z1 >= z0 and p != q).
std::optional<DiamondBound> diamond_bounds(const SpacetimePoint& p,
                                           const SpacetimePoint& q);

} // namespace spikewave
