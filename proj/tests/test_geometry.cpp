#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "spikewave/geometry.hpp"

using namespace spikewave;

namespace {

struct Fixture {
    SpikeFamily fam;
    Geometry geom{fam};
    Fixture() { fam.prepare_x(8.0); }
};

// Minkowski-like comparison form with the potential frozen at the constant N.
double h_form(int N, const TangentVector& X) {
    double rn = std::sqrt(static_cast<double>(N));
    double a = rn * X.eta - X.z / rn;
    return -a * a + X.z * X.z / N + X.x * X.x + X.y * X.y;
}

} // namespace

TEST_CASE("metric values on coordinate directions") {
    Fixture f;
    SpacetimePoint origin;
    TangentVector d_eta{1, 0, 0, 0}, d_z{0, 1, 0, 0}, d_x{0, 0, 1, 0}, d_y{0, 0, 0, 1};

    CHECK(f.geom.metric_eval(origin, d_eta, d_eta) == 0.0); // V(0) = 0
    CHECK(f.geom.metric_eval(origin, d_z, d_z) == 0.0);
    CHECK(f.geom.metric_eval(origin, d_x, d_x) == 1.0);
    CHECK(f.geom.metric_eval(origin, d_y, d_y) == 1.0);
    CHECK(f.geom.metric_eval(origin, d_eta, d_z) == 1.0);

    SpacetimePoint p1{0, 0, 1.0, 0};
    CHECK(f.geom.metric_eval(p1, d_eta, d_eta) == 1.0); // -V(1) = 1
}

TEST_CASE("metric is symmetric and bilinear") {
    Fixture f;
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        SpacetimePoint p{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-7, 7),
                         rng.uniform(-2, 2)};
        TangentVector X{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3),
                        rng.uniform(-3, 3)};
        TangentVector Y{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3),
                        rng.uniform(-3, 3)};
        double gxy = f.geom.metric_eval(p, X, Y);
        double gyx = f.geom.metric_eval(p, Y, X);
        CHECK(gxy == doctest::Approx(gyx).epsilon(1e-14));

        double a = rng.uniform(-2, 2);
        TangentVector aX{a * X.eta, a * X.z, a * X.x, a * X.y};
        double lhs = f.geom.metric_eval(p, aX, Y);
        double rhs = a * f.geom.metric_eval(p, X, Y);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("inverse metric and determinant") {
    Fixture f;
    SpacetimePoint origin;
    Covector pm{1, 1, 0, 0};
    CHECK(f.geom.inverse_metric_eval(origin, pm, pm) == 2.0);

    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        SpacetimePoint p{0, 0, rng.uniform(-7, 7), 0};
        auto g = f.geom.metric_matrix(p);
        auto gi = f.geom.inverse_metric_matrix(p);
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                double acc = 0;
                for (int k = 0; k < 4; ++k) acc += g[r][k] * gi[k][c];
                CHECK(acc == doctest::Approx(r == c ? 1.0 : 0.0).epsilon(1e-14));
            }
        }
        CHECK(f.geom.metric_determinant(p) == -1.0);
        CHECK(std::abs(f.geom.metric_determinant(p)) == 1.0);
    }
}

TEST_CASE("causal classification") {
    Fixture f;
    SpacetimePoint origin;

    auto back_z = f.geom.classify_vector(origin, {0, -1, 0, 0});
    CHECK(back_z.kind == CausalKind::Null);
    CHECK(back_z.orientation == Orientation::Future);

    auto fwd_z = f.geom.classify_vector(origin, {0, 1, 0, 0});
    CHECK(fwd_z.kind == CausalKind::Null);
    CHECK(fwd_z.orientation == Orientation::Past);

    auto dx = f.geom.classify_vector(origin, {0, 0, 1, 0});
    CHECK(dx.kind == CausalKind::Spacelike);
    CHECK(dx.orientation == Orientation::NA);

    auto zero = f.geom.classify_vector(origin, {0, 0, 0, 0});
    CHECK(zero.kind == CausalKind::Zero);
    CHECK(zero.orientation == Orientation::NA);

    // d_eta is null at x = 0 (V = 0) and future by eta > 0
    auto de = f.geom.classify_vector(origin, {1, 0, 0, 0});
    CHECK(de.kind == CausalKind::Null);
    CHECK(de.orientation == Orientation::Future);

    // where V < 0 the eta direction turns spacelike
    auto de1 = f.geom.classify_vector({0, 0, 1.0, 0}, {1, 0, 0, 0});
    CHECK(de1.kind == CausalKind::Spacelike);

    // inside spike 1 the potential is positive and d_eta is timelike
    SpikeSpec s1 = f.fam.spike(1);
    SpacetimePoint in_spike{0, 0, s1.peak_x, 0};
    auto de2 = f.geom.classify_vector(in_spike, {1, 0, 0, 0});
    CHECK(de2.kind == CausalKind::Timelike);
    CHECK(de2.orientation == Orientation::Future);
}

TEST_CASE("negation flips orientation, keeps kind") {
    Fixture f;
    Rng rng(23);
    for (int i = 0; i < 300; ++i) {
        SpacetimePoint p{0, 0, rng.uniform(-6, 6), 0};
        TangentVector X = f.geom.sample_causal_future(p, rng);
        auto c1 = f.geom.classify_vector(p, X);
        auto c2 = f.geom.classify_vector(p, {-X.eta, -X.z, -X.x, -X.y});
        CHECK(c1.kind == c2.kind);
        CHECK(c1.orientation == Orientation::Future);
        CHECK(c2.orientation == Orientation::Past);
    }
}

TEST_CASE("cone inequalities on exact and sampled vectors") {
    Fixture f;
    SpacetimePoint origin;

    for (int n : {1, 2, 5}) {
        auto rep = f.geom.cone_inequalities(origin, {0, -1, 0, 0}, n);
        CHECK(rep.pass);
        CHECK(rep.slack1 == doctest::Approx(1.0 / std::sqrt(double(n))).epsilon(1e-14));
        CHECK(rep.slack4 == 0.0); // |X^z| <= n X^eta - X^z is tight here
    }

    auto rep_eta = f.geom.cone_inequalities(origin, {1, 0, 0, 0}, 1);
    CHECK(rep_eta.pass);
    CHECK(rep_eta.slack1 == 1.0);
    CHECK(rep_eta.slack2 == 1.0);
    CHECK(rep_eta.slack3 == 1.0);
    CHECK(rep_eta.slack4 == 1.0);

    Rng rng(5);
    for (int n : {1, 2, 3}) {
        double xn = spike_center(n);
        for (int i = 0; i < 10000; ++i) {
            SpacetimePoint p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-xn, xn),
                             rng.uniform(-1, 1)};
            TangentVector X = f.geom.sample_causal_future(p, rng);
            CHECK(f.geom.cone_inequalities(p, X, n).pass);
        }
    }

    // preconditions
    CHECK_THROWS_AS(f.geom.cone_inequalities(origin, {0, 0, 1, 0}, 1), PreconditionViolation);
    CHECK_THROWS_AS(f.geom.cone_inequalities(origin, {0, 1, 0, 0}, 1), PreconditionViolation);
    CHECK_THROWS_AS(f.geom.cone_inequalities({0, 0, 4.0, 0}, {0, -1, 0, 0}, 1),
                    PreconditionViolation);
    CHECK_THROWS_AS(f.geom.cone_inequalities(origin, {0, -1, 0, 0}, 0), PreconditionViolation);
}

TEST_CASE("metric dominates the frozen-potential comparison form") {
    Fixture f;
    Rng rng(31);
    for (int N : {1, 3}) {
        double xn = spike_center(N);
        for (int i = 0; i < 2000; ++i) {
            SpacetimePoint p{0, 0, rng.uniform(-xn, xn), 0};
            TangentVector X{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3),
                            rng.uniform(-3, 3)};
            double g = f.geom.metric_eval(p, X, X);
            double h = h_form(N, X);
            double gap = g - h;
            double expect = (N - f.fam.value(p.x)) * X.eta * X.eta;
            CHECK(gap >= -1e-12 * (std::abs(g) + std::abs(h) + 1));
            CHECK(gap == doctest::Approx(expect).epsilon(1e-9).scale(1.0));

            // causal for g implies causal for the comparison form
            if (g <= 0) CHECK(h <= 1e-12 * (std::abs(g) + 1));
        }
    }
}

TEST_CASE("causal order along sampled curves") {
    Fixture f;

    // integral curve of -d_z: eta flat, z strictly decreasing
    std::vector<CurveSample> back;
    for (int i = 0; i <= 10; ++i)
        back.push_back({{0, -0.1 * i, 0, 0}, {0, -1, 0, 0}});
    auto rep = check_causal_order(f.geom, back.front().point, back.back().point, back);
    CHECK(rep.pass);
    CHECK(rep.eta_nondecreasing);
    CHECK(rep.z_decreasing_when_eta_flat);
    CHECK(rep.nontrivial);

    // timelike line with increasing eta
    std::vector<CurveSample> tl;
    for (int i = 0; i <= 10; ++i)
        tl.push_back({{0.1 * i, -0.05 * i, 0, 0}, {1, -0.5, 0, 0}});
    CHECK(check_causal_order(f.geom, tl.front().point, tl.back().point, tl).pass);

    // a spacelike velocity anywhere raises
    std::vector<CurveSample> bad = tl;
    bad[4].velocity = {0, 0, 1, 0};
    CHECK_THROWS_AS(check_causal_order(f.geom, bad.front().point, bad.back().point, bad),
                    NotCausal);

    // fabricated closed loop: flat eta forces strictly decreasing z, so the
    // return leg both breaks monotonicity and collapses the endpoints
    std::vector<CurveSample> loop = {{{0, 0, 0, 0}, {0, -1, 0, 0}},
                                     {{0, -1, 0, 0}, {0, -1, 0, 0}},
                                     {{0, 0, 0, 0}, {0, -1, 0, 0}}};
    auto closed = check_causal_order(f.geom, loop.front().point, loop.back().point, loop);
    CHECK_FALSE(closed.pass);
    CHECK_FALSE(closed.z_decreasing_when_eta_flat);
    CHECK_FALSE(closed.endpoints_distinct);

    CHECK_THROWS_AS(check_causal_order(f.geom, {}, {}, {}), PreconditionViolation);
}

TEST_CASE("diamond bounds") {
    auto b = diamond_bounds({0, 0, 0, 0}, {1, 0, 0, 0});
    REQUIRE(b.has_value());
    CHECK(b->N == 1);
    CHECK(b->x_max == doctest::Approx(3.1213203435596424).epsilon(1e-14));
    CHECK(b->y_span == 2.0);
    CHECK(b->z_span == 2.0);
    CHECK(b->eta_min == 0.0);
    CHECK(b->eta_max == 1.0);

    // degenerate diamond {p}
    auto s = diamond_bounds({2, 3, 0.5, 1}, {2, 3, 0.5, 1});
    REQUIRE(s.has_value());
    CHECK(s->N == 1);
    CHECK(s->eta_min == s->eta_max);

    // provably empty cases
    CHECK_FALSE(diamond_bounds({0, 0, 0, 0}, {-1, 0, 0, 0}).has_value());
    CHECK_FALSE(diamond_bounds({0, 0, 0, 0}, {0, 1, 0, 0}).has_value());

    // flat eta with decreasing z is allowed; N grows to cover the z gap
    auto flat = diamond_bounds({0, 5, 0, 0}, {0, 3, 0, 0});
    REQUIRE(flat.has_value());
    CHECK(flat->N == 4);
    CHECK(flat->x_max == doctest::Approx(spike_center(4)).epsilon(1e-14));
    CHECK(flat->y_span == 5.0);
    CHECK(flat->z_span == 10.0);

    // wide x demands a bigger N
    auto wide = diamond_bounds({0, 0, 3.0, 0}, {0.5, 0, 0, 0});
    REQUIRE(wide.has_value());
    CHECK(wide->N == 9);
}
