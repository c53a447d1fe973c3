#include "spikewave/geometry.hpp"

#include <cmath>

namespace spikewave {

double Geometry::metric_eval(const SpacetimePoint& p, const TangentVector& X,
                             const TangentVector& Y) const {
    double V = fam_.value(p.x);
    return -V * X.eta * Y.eta + X.eta * Y.z + X.z * Y.eta + X.x * Y.x + X.y * Y.y;
}

double Geometry::inverse_metric_eval(const SpacetimePoint& p, const Covector& pm,
                                     const Covector& qm) const {
    double V = fam_.value(p.x);
    return pm.eta * qm.z + pm.z * qm.eta + V * pm.z * qm.z + pm.x * qm.x + pm.y * qm.y;
}

std::array<std::array<double, 4>, 4> Geometry::metric_matrix(const SpacetimePoint& p) const {
    double V = fam_.value(p.x);
    return {{{-V, 1, 0, 0}, {1, 0, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}};
}

std::array<std::array<double, 4>, 4> Geometry::inverse_metric_matrix(
    const SpacetimePoint& p) const {
    double V = fam_.value(p.x);
    return {{{0, 1, 0, 0}, {1, V, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}};
}

double Geometry::metric_determinant(const SpacetimePoint& p) const {
    // The (eta, z) block is [[-V, 1], [1, 0]] with determinant -1; the x and
    // y directions contribute factors of 1. Spelled out so the sign is a
    // computation, not a constant.
    double V = fam_.value(p.x);
    return (-V * 0.0 - 1.0) * 1.0 * 1.0;
}

CausalClass Geometry::classify_vector(const SpacetimePoint& p, const TangentVector& X) const {
    CausalClass out;
    bool zero = X.eta == 0 && X.z == 0 && X.x == 0 && X.y == 0;
    if (zero) return out; // kind Zero, orientation NA

    double q = metric_eval(p, X, X);
    if (q < 0)
        out.kind = CausalKind::Timelike;
    else if (q > 0)
        out.kind = CausalKind::Spacelike;
    else
        out.kind = CausalKind::Null;

    if (out.kind == CausalKind::Timelike || out.kind == CausalKind::Null) {
        if (X.eta > 0 || (X.eta == 0 && X.x == 0 && X.y == 0 && X.z < 0))
            out.orientation = Orientation::Future;
        else
            out.orientation = Orientation::Past;
    }
    return out;
}

ConeReport Geometry::cone_inequalities(const SpacetimePoint& p, const TangentVector& X,
                                       int n) const {
    if (n < 1) throw PreconditionViolation("cone_inequalities: n must be >= 1");
    if (std::abs(p.x) > spike_center(n))
        throw PreconditionViolation("cone_inequalities: |x| exceeds the level radius");
    CausalClass cc = classify_vector(p, X);
    bool causal_future = (cc.kind == CausalKind::Timelike || cc.kind == CausalKind::Null) &&
                         cc.orientation == Orientation::Future;
    if (!causal_future)
        throw PreconditionViolation("cone_inequalities: vector is not causal future");

    double rn = std::sqrt(static_cast<double>(n));
    ConeReport rep;
    rep.slack1 = rn * X.eta - X.z / rn;
    rep.slack2 = rep.slack1 - std::abs(X.x);
    rep.slack3 = rep.slack1 - std::abs(X.y);
    rep.slack4 = (n * X.eta - X.z) - std::abs(X.z);
    rep.pass = rep.slack1 > 0 && rep.slack2 >= 0 && rep.slack3 >= 0 && rep.slack4 >= 0;
    return rep;
}

TangentVector Geometry::sample_causal_future(const SpacetimePoint& p, Rng& rng) const {
    TangentVector X;
    X.eta = rng.uniform(0.1, 2.0);
    X.x = rng.uniform(-2.0, 2.0);
    X.y = rng.uniform(-2.0, 2.0);
    // g(X,X) = -V Xeta^2 + 2 Xeta Xz + Xx^2 + Xy^2 <= 0 solved for Xz, then
    // pushed strictly inside the cone.
    double V = fam_.value(p.x);
    double bound = (V * X.eta * X.eta - X.x * X.x - X.y * X.y) / (2.0 * X.eta);
    X.z = bound - rng.uniform(1e-9, 3.0);
    return X;
}

CausalOrderReport check_causal_order(const Geometry& geom, const SpacetimePoint& p,
                                     const SpacetimePoint& q,
                                     const std::vector<CurveSample>& curve) {
    if (curve.size() < 2) throw PreconditionViolation("check_causal_order: need >= 2 samples");

    for (const CurveSample& s : curve) {
        CausalClass cc = geom.classify_vector(s.point, s.velocity);
        bool ok = (cc.kind == CausalKind::Timelike || cc.kind == CausalKind::Null) &&
                  cc.orientation == Orientation::Future;
        if (!ok) throw NotCausal("check_causal_order: sampled velocity not causal future");
    }

    CausalOrderReport rep;
    rep.eta_nondecreasing = true;
    for (size_t i = 1; i < curve.size(); ++i)
        if (curve[i].point.eta < curve[i - 1].point.eta) rep.eta_nondecreasing = false;

    rep.z_decreasing_when_eta_flat = true;
    if (curve.back().point.eta == curve.front().point.eta) {
        for (size_t i = 1; i < curve.size(); ++i)
            if (curve[i].point.z >= curve[i - 1].point.z) rep.z_decreasing_when_eta_flat = false;
    }

    rep.nontrivial = false;
    for (const CurveSample& s : curve)
        if (!(s.point == curve.front().point)) rep.nontrivial = true;

    bool closed = curve.back().point == curve.front().point;
    rep.endpoints_distinct = !rep.nontrivial || !closed;

    bool anchored = curve.front().point == p && curve.back().point == q;
    rep.pass = anchored && rep.eta_nondecreasing && rep.z_decreasing_when_eta_flat &&
               rep.endpoints_distinct;
    return rep;
}

std::optional<DiamondBound> diamond_bounds(const SpacetimePoint& p, const SpacetimePoint& q) {
    double d_eta = q.eta - p.eta;
    double d_z = q.z - p.z;
    bool same = p == q;
    if (d_eta < 0) return std::nullopt;
    if (d_eta == 0 && d_z >= 0 && !same) return std::nullopt;

    int N = 1;
    while (true) {
        double r = std::sqrt(static_cast<double>(N));
        if (std::abs(p.x) <= r && std::abs(q.x) <= r && d_eta <= r && d_z >= -r) break;
        ++N;
        if (N > 100000000)
            throw PreconditionViolation("diamond_bounds: endpoints out of supported range");
    }

    DiamondBound b;
    b.N = N;
    b.x_max = spike_center(N);
    b.y_span = N + 1.0;
    b.z_span = (N + 1.0) * std::sqrt(static_cast<double>(N));
    b.eta_min = p.eta;
    b.eta_max = q.eta;
    return b;
}

} // namespace spikewave
