#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "spikewave/ode.hpp"

using namespace spikewave;

namespace {
using S1 = std::array<double, 1>;
using S2 = std::array<double, 2>;
}

TEST_CASE("exponential growth") {
    auto rhs = [](double, const S1& y, S1& dy) { dy[0] = y[0]; };
    OdeOptions opt;
    opt.rtol = 1e-10;
    opt.atol = 1e-12;
    OdeStats st;
    S1 y = integrate_ode<1>(rhs, 0.0, S1{1.0}, 1.0, opt, &st);
    CHECK(y[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-9));
    CHECK(st.accepted > 0);
    CHECK(st.rhs_evals >= 6 * st.accepted);
}

TEST_CASE("backward integration") {
    auto rhs = [](double, const S1& y, S1& dy) { dy[0] = y[0]; };
    S1 y = integrate_ode<1>(rhs, 5.0, S1{1.0}, 0.0);
    CHECK(y[0] == doctest::Approx(std::exp(-5.0)).epsilon(1e-8));
}

TEST_CASE("harmonic oscillator over many periods") {
    auto rhs = [](double, const S2& y, S2& dy) {
        dy[0] = y[1];
        dy[1] = -y[0];
    };
    OdeOptions opt;
    opt.rtol = 1e-11;
    opt.atol = 1e-13;
    S2 y = integrate_ode<2>(rhs, 0.0, S2{1.0, 0.0}, 10 * M_PI, opt);
    CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(y[1]) < 1e-7);
    double energy = y[0] * y[0] + y[1] * y[1];
    CHECK(energy == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("endpoint is hit exactly and steps are observable") {
    auto rhs = [](double t, const S1&, S1& dy) { dy[0] = std::cos(t); };
    double t_last = -1;
    std::vector<double> ts;
    auto watch = [&](double t, const S1&) {
        t_last = t;
        ts.push_back(t);
    };
    S1 y = integrate_ode<1>(rhs, 0.0, S1{0.0}, 10.0, {}, nullptr, watch);
    CHECK(t_last == 10.0); // exact landing, bitwise
    CHECK(y[0] == doctest::Approx(std::sin(10.0)).epsilon(1e-8));
    for (size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] > ts[i - 1]);
}

TEST_CASE("bool observer stops the integration early") {
    auto rhs = [](double, const S1& y, S1& dy) { dy[0] = y[0]; };
    double t_stop = 0;
    auto watch = [&](double t, const S1& y) {
        t_stop = t;
        return y[0] < 2.0; // stop once y crosses 2
    };
    double reached = -1;
    S1 y = integrate_ode<1>(rhs, 0.0, S1{1.0}, 10.0, {}, nullptr, watch,
                            detail::NoCap{}, detail::NoVeto{}, &reached);
    CHECK(reached == t_stop);
    CHECK(reached < 10.0);
    CHECK(y[0] >= 2.0);
    CHECK(y[0] == doctest::Approx(std::exp(reached)).epsilon(1e-8));
}

TEST_CASE("max-step hook caps the step size") {
    auto rhs = [](double, const S1& y, S1& dy) { dy[0] = -y[0]; };
    double prev = 0.0, widest = 0.0;
    auto watch = [&](double t, const S1&) {
        widest = std::max(widest, t - prev);
        prev = t;
    };
    auto cap = [](double, const S1&) { return 0.01; };
    integrate_ode<1>(rhs, 0.0, S1{1.0}, 2.0, {}, nullptr, watch, cap);
    CHECK(widest <= 0.01 + 1e-12);
}

TEST_CASE("veto hook forces a retry with a smaller step") {
    auto rhs = [](double, const S1& y, S1& dy) { dy[0] = y[0]; };
    double prev = 0.0, widest = 0.0;
    auto watch = [&](double t, const S1&) {
        widest = std::max(widest, t - prev);
        prev = t;
    };
    auto veto = [](double t0, const S1&, double t1, const S1&) {
        return (t1 - t0) > 0.05 ? 0.5 : 1.0;
    };
    OdeOptions loose;
    loose.rtol = 1e-6;
    loose.atol = 1e-8;
    OdeStats st;
    S1 y = integrate_ode<1>(rhs, 0.0, S1{1.0}, 1.0, loose, &st,
                            watch, detail::NoCap{}, veto);
    CHECK(widest <= 0.05 + 1e-12);
    CHECK(st.rejected > 0);
    CHECK(y[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-5));
}

TEST_CASE("degenerate and invalid inputs") {
    auto rhs = [](double, const S1& y, S1& dy) { dy[0] = y[0]; };
    S1 y = integrate_ode<1>(rhs, 3.0, S1{2.0}, 3.0);
    CHECK(y[0] == 2.0);

    OdeOptions bad;
    bad.rtol = 0.0;
    CHECK_THROWS_AS(integrate_ode<1>(rhs, 0.0, S1{1.0}, 1.0, bad), PreconditionViolation);

    OdeOptions tiny;
    tiny.max_steps = 3;
    CHECK_THROWS_AS(integrate_ode<1>(rhs, 0.0, S1{1.0}, 50.0, tiny), ToleranceFailure);
}

TEST_CASE("accuracy tracks the tolerance") {
    // moderately stiff relaxation toward cos(t)
    auto rhs = [](double t, const S1& y, S1& dy) { dy[0] = -50.0 * (y[0] - std::cos(t)); };
    OdeOptions hi;
    hi.rtol = 1e-12;
    hi.atol = 1e-14;
    S1 ref = integrate_ode<1>(rhs, 0.0, S1{0.0}, 4.0, hi);
    OdeOptions lo;
    lo.rtol = 1e-8;
    lo.atol = 1e-10;
    S1 got = integrate_ode<1>(rhs, 0.0, S1{0.0}, 4.0, lo);
    CHECK(std::abs(got[0] - ref[0]) < 1e-6);
}
