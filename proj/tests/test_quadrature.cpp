#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "spikewave/quadrature.hpp"

using namespace spikewave;
using cplx = std::complex<double>;

TEST_CASE("single panel is exact on high-degree polynomials") {
    auto p = [](double x) { return std::pow(x, 20); };
    CHECK(gl15_panel<double>(p, 0.0, 1.0) == doctest::Approx(1.0 / 21.0).epsilon(1e-14));
    auto q = [](double x) { return 3 * x * x - 2 * x + 7; };
    CHECK(gl15_panel<double>(q, -2.0, 3.0) == doctest::Approx(35.0 + (-5.0) + 35.0).epsilon(1e-14));
    // x^3 - 2x^2 + ... simple known: int_{-2}^{3} (3x^2-2x+7) = [x^3 - x^2 + 7x] = (27-9+21)-(-8-4-14) = 39+26 = 65
    CHECK(gl15_panel<double>(q, -2.0, 3.0) == doctest::Approx(65.0).epsilon(1e-14));
}

TEST_CASE("adaptive integration against closed forms") {
    CHECK(integrate<double>([](double x) { return x * x; }, 0, 1) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-13));
    CHECK(integrate<double>([](double x) { return std::sin(x); }, 0, M_PI) ==
          doctest::Approx(2.0).epsilon(1e-12));
    CHECK(integrate<double>([](double x) { return std::exp(x); }, 0, 1) ==
          doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-13));
    // orientation flips the sign
    CHECK(integrate<double>([](double x) { return std::exp(x); }, 1, 0) ==
          doctest::Approx(1.0 - std::exp(1.0)).epsilon(1e-13));
    // degenerate interval
    CHECK(integrate<double>([](double x) { return std::exp(x); }, 2, 2) == 0.0);
}

TEST_CASE("oscillatory integrand") {
    double a = 0.0, b = 2 * M_PI + 0.7;
    double got = integrate<double>([](double x) { return std::sin(100 * x); }, a, b, 1e-11, 1e-13);
    double want = (1.0 - std::cos(100 * b)) / 100.0;
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("narrow feature is resolved by bisection") {
    double s = 1e-3;
    auto g = [s](double x) {
        double u = (x - 0.5) / s;
        return std::exp(-0.5 * u * u) / (s * std::sqrt(2 * M_PI));
    };
    CHECK(integrate<double>(g, 0, 1, 1e-10) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("complex-valued integrands") {
    cplx got = integrate<cplx>([](double x) { return std::exp(cplx(0, 1) * x); }, 0, 1, 1e-12);
    CHECK(got.real() == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
    CHECK(got.imag() == doctest::Approx(1.0 - std::cos(1.0)).epsilon(1e-12));
}

TEST_CASE("non-integrable behaviour trips the recursion limit") {
    auto step = [](double x) { return x < 1.0 / M_PI ? 0.0 : 1.0; };
    CHECK_THROWS_AS(integrate<double>(step, 0, 1, 1e-12, 1e-15), QuadratureFailure);
}
