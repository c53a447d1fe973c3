#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "spikewave/potential.hpp"

using namespace spikewave;

namespace {

// Independent sup oracle: dense long-double grid over the support, sharpened
// by a parabolic fit through the best node and its neighbours.
long double grid_sup(long double amp, long double c, long double w) {
    const int m = 400000;
    int best = 1;
    long double fb = -1e30L;
    auto f = [&](int i) {
        long double t = static_cast<long double>(i) / m;
        long double x = c + w * t;
        long double q = x * x;
        return amp * BumpProfile::value_l(t) - q * q;
    };
    for (int i = 1; i < m; ++i) {
        long double v = f(i);
        if (v > fb) {
            fb = v;
            best = i;
        }
    }
    long double fl = f(best - 1), fr = f(best + 1);
    long double den = fl - 2.0L * fb + fr;
    if (den < 0.0L) {
        long double corr = (fl - fr) * (fl - fr) / (-8.0L * den);
        return fb + corr;
    }
    return fb;
}

} // namespace

TEST_CASE("bump profile basics") {
    CHECK(BumpProfile::value(0.5) == 1.0);
    CHECK(BumpProfile::deriv1(0.5) == 0.0);
    CHECK(BumpProfile::deriv2(0.5) == doctest::Approx(-8.0).epsilon(1e-14));
    CHECK(BumpProfile::value(0.0) == 0.0);
    CHECK(BumpProfile::value(1.0) == 0.0);
    CHECK(BumpProfile::value(-0.3) == 0.0);
    CHECK(BumpProfile::value(1.7) == 0.0);
    // symmetric about t = 1/2
    for (double t : {0.1, 0.23, 0.4, 0.47}) {
        CHECK(BumpProfile::value(t) == doctest::Approx(BumpProfile::value(1.0 - t)).epsilon(1e-15));
        CHECK(BumpProfile::deriv1(t) == doctest::Approx(-BumpProfile::deriv1(1.0 - t)).epsilon(1e-13));
    }
    // derivative sign: rising on (0, 1/2), falling on (1/2, 1)
    CHECK(BumpProfile::value(0.2) > 0.0);
    CHECK(BumpProfile::deriv1(0.2) > 0.0);
    CHECK(BumpProfile::deriv1(0.8) < 0.0);
    // finite-difference agreement in the interior
    for (double t : {0.15, 0.33, 0.5, 0.61, 0.86}) {
        double h = 1e-6;
        double fd1 = (BumpProfile::value(t + h) - BumpProfile::value(t - h)) / (2 * h);
        CHECK(BumpProfile::deriv1(t) == doctest::Approx(fd1).epsilon(1e-7));
        double fd2 =
            (BumpProfile::value(t + h) - 2 * BumpProfile::value(t) + BumpProfile::value(t - h)) /
            (h * h);
        CHECK(BumpProfile::deriv2(t) == doctest::Approx(fd2).epsilon(1e-4));
    }
    // vanishes smoothly at the edges: tiny t gives tiny values, not garbage
    CHECK(BumpProfile::value(1e-4) >= 0.0);
    CHECK(BumpProfile::value(1e-4) < 1e-300 + 1e-200);
}

TEST_CASE("placement rules") {
    CHECK(spike_center(0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(spike_center(1) == doctest::Approx(1.0 + 1.5 * std::sqrt(2.0)).epsilon(1e-15));
    CHECK(spike_center(1) == doctest::Approx(3.1213203435596424).epsilon(1e-15));
    CHECK(spike_center(2) == doctest::Approx(1.5 + 1.5 * std::sqrt(3.0)).epsilon(1e-15));
    CHECK(spike_center(3) == doctest::Approx(5.0).epsilon(1e-15));

    CHECK(spike_width(1) == doctest::Approx(std::sqrt(2.0) / 64.0).epsilon(1e-14));
    CHECK(spike_width(1) == doctest::Approx(0.022097086912079611).epsilon(1e-14));
    CHECK(spike_width(3) == doctest::Approx(0.001953125).epsilon(1e-13)); // = 1/512

    CHECK_THROWS_AS(spike_center(-1), PreconditionViolation);
    CHECK_THROWS_AS(spike_width(-2), PreconditionViolation);

    // supports are pairwise disjoint with a gap of at least 1/2
    for (int n = 1; n <= 400; ++n) {
        double gap = spike_center(n + 1) - (spike_center(n) + spike_width(n));
        CHECK(gap > 0.5);
    }
}

TEST_CASE("amplitude calibration hits the target sup") {
    SpikeFamily fam;
    // first amplitude lands near quartic(center) + target
    const SpikeSpec& s1 = fam.spike(1);
    CHECK(s1.amplitude > 98.2);
    CHECK(s1.amplitude < 98.4);
    CHECK(s1.peak_x > s1.center);
    CHECK(s1.peak_x < s1.center + s1.width);

    for (int n : {1, 2, 3, 7, 20, 50}) {
        const SpikeSpec& sp = fam.spike(n);
        CHECK(std::abs(sp.sup_residual) <= 1e-8);
        CHECK(std::abs(fam.sup_residual(n)) <= 1e-8);
        // independent dense-grid sup of amp*b - x^4 against the target n+1
        long double sup =
            grid_sup(calibrate_amplitude(n, fam.calibration_tol()), spike_center(n), spike_width(n));
        CHECK(std::abs(static_cast<double>(sup) - (n + 1.0)) <= 1e-8);
    }

    CHECK_THROWS_AS(calibrate_amplitude(0, 1e-10), PreconditionViolation);
    CHECK_THROWS_AS(SpikeFamily(-1.0), PreconditionViolation);
}

TEST_CASE("potential values in the quartic-only region") {
    SpikeFamily fam;
    CHECK(fam.value(0.0) == 0.0);
    CHECK(fam.value(1.0) == -1.0);
    CHECK(fam.value(-1.0) == -1.0);
    CHECK(fam.value(2.5) == doctest::Approx(-39.0625).epsilon(1e-15));
    // no spike below the first support: pure quartic there
    for (double x = 0.0; x < 3.12; x += 0.013) {
        double q = x * x;
        CHECK(fam.value(x) == -(q * q));
        CHECK(fam.spike_part(x) == 0.0);
    }
}

TEST_CASE("potential tops out near n+1 over each spike support") {
    SpikeFamily fam;
    for (int n : {1, 2, 5}) {
        const SpikeSpec& sp = fam.spike(n);
        double best = -1e300;
        for (int i = 0; i <= 20000; ++i) {
            double x = sp.center + sp.width * i / 20000.0;
            best = std::max(best, fam.value(x));
        }
        // grid sampling misses the true peak by O((w/20000)^2 * A / w^2)
        CHECK(best == doctest::Approx(n + 1.0).epsilon(1e-4));
        CHECK(best <= n + 1.0 + 1e-8);
    }
}

TEST_CASE("derivatives match finite differences") {
    SpikeFamily fam;
    fam.prepare_x(10.0);
    const SpikeSpec& s1 = fam.spike(1);
    std::vector<double> pts = {0.3, 1.7, 2.9,
                               s1.center + 0.21 * s1.width,
                               s1.center + 0.52 * s1.width,
                               s1.center + 0.83 * s1.width,
                               -(s1.center + 0.37 * s1.width),
                               spike_center(2) + 0.44 * spike_width(2)};
    for (double x : pts) {
        double h = 1e-6;
        double fd1 = (fam.value(x + h) - fam.value(x - h)) / (2 * h);
        double fd2 = (fam.value(x + h) - 2 * fam.value(x) + fam.value(x - h)) / (h * h);
        double scale1 = std::abs(fam.eval(x, 1)) + 1.0;
        double scale2 = std::abs(fam.eval(x, 2)) + 1.0;
        CHECK(std::abs(fam.eval(x, 1) - fd1) / scale1 < 1e-4);
        CHECK(std::abs(fam.eval(x, 2) - fd2) / scale2 < 1e-3);
    }
}

TEST_CASE("potential is even, derivative odd") {
    SpikeFamily fam;
    fam.prepare_x(12.0);
    for (double x = 0.05; x < 12.0; x += 0.377) {
        CHECK(fam.value(x) == fam.value(-x));
        CHECK(fam.eval(x, 1) == -fam.eval(-x, 1));
        CHECK(fam.eval(x, 2) == fam.eval(-x, 2));
    }
}

TEST_CASE("active spikes and support edges") {
    SpikeFamily fam;

    auto act = fam.active_spikes(3.0, 4.0);
    REQUIRE(act.size() == 1);
    CHECK(act[0].spec.index == 1);
    CHECK_FALSE(act[0].mirrored);
    CHECK(act[0].lo == doctest::Approx(3.1213203435596424).epsilon(1e-15));
    CHECK(act[0].hi == doctest::Approx(3.1213203435596424 + 0.022097086912079611).epsilon(1e-15));

    auto both = fam.active_spikes(-4.0, 4.0);
    REQUIRE(both.size() == 2);
    CHECK(both[0].mirrored);
    CHECK(both[0].lo == doctest::Approx(-act[0].hi).epsilon(1e-15));
    CHECK(both[1].lo < both[1].hi);
    CHECK_FALSE(both[1].mirrored);

    // edges are strictly interior and sorted
    auto edges = fam.support_edges(3.0, 4.0);
    REQUIRE(edges.size() == 2);
    CHECK(edges[0] == doctest::Approx(act[0].lo));
    CHECK(edges[1] == doctest::Approx(act[0].hi));
    auto one = fam.support_edges(3.12, 3.13);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == doctest::Approx(act[0].lo));
    CHECK(fam.support_edges(0.0, 3.0).empty());

    // wide window: spikes 1..4 on both sides (centers 3.12, 4.10, 5.0, 5.85)
    auto wide = fam.active_spikes(-6.0, 6.0);
    REQUIRE(wide.size() == 8);
    for (size_t i = 1; i < wide.size(); ++i) CHECK(wide[i - 1].lo < wide[i].lo);
}

TEST_CASE("width summability stays under the bound") {
    SpikeFamily fam;
    auto rep = fam.summability(5000);
    REQUIRE(rep.partial_sums.size() == 5000);
    CHECK(rep.bound == doctest::Approx(0.6530938371713721).epsilon(1e-15));
    for (size_t i = 1; i < rep.partial_sums.size(); ++i)
        CHECK(rep.partial_sums[i] > rep.partial_sums[i - 1]);
    CHECK(rep.partial_sums.back() < 0.30);
    CHECK(rep.within_bound);
    CHECK_THROWS_AS(fam.summability(0), PreconditionViolation);
}

TEST_CASE("family argument validation") {
    SpikeFamily fam;
    CHECK_THROWS_AS(fam.eval(0.5, 3), PreconditionViolation);
    CHECK_THROWS_AS(fam.spike(0), PreconditionViolation);
    CHECK_THROWS_AS(fam.sup_residual(-2), PreconditionViolation);
    fam.prepare_count(4);
    CHECK(fam.prepared_count() >= 4);
}
