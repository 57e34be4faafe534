#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "icescope/rng.hpp"
#include "icescope/smoother.hpp"

using namespace icescope;

TEST_CASE("supersmoother reproduces a line") {
    Rng rng(1);
    std::vector<double> x(100), y(100);
    for (std::size_t i = 0; i < 100; ++i) {
        x[i] = rng.uniform01();
        y[i] = 3 * x[i] + 1;
    }
    const auto fit = supersmooth(x, y);
    const auto s = fit.in_input_order();
    for (std::size_t i = 0; i < 100; ++i) CHECK(std::abs(s[i] - y[i]) <= 1e-6);
}

TEST_CASE("supersmoother on constant data") {
    std::vector<double> x(30), y(30, 2.5);
    std::iota(x.begin(), x.end(), 0.0);
    for (double bass : {0.0, 5.0, 10.0}) {
        const auto fit = supersmooth(x, y, {bass, std::nullopt});
        for (double v : fit.smoothed) CHECK(std::abs(v - 2.5) < 1e-12);
    }
}

TEST_CASE("supersmoother recovers a sine") {
    Rng rng(2024);
    const std::size_t n = 500;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform01();
        y[i] = std::sin(2 * std::numbers::pi * x[i]) + rng.normal(0.0, 0.1);
    }
    const auto fit = supersmooth(x, y);
    double sse = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double e = fit.smoothed[k] - std::sin(2 * std::numbers::pi * fit.x_sorted[k]);
        sse += e * e;
    }
    CHECK(std::sqrt(sse / n) < 0.05);
}

TEST_CASE("supersmoother is invariant to input order") {
    Rng rng(5);
    std::vector<double> x(200), y(200);
    for (std::size_t i = 0; i < 200; ++i) {
        x[i] = std::round(rng.uniform01() * 50) / 50;  // ties on purpose
        y[i] = x[i] * x[i] + rng.normal(0.0, 0.2);
    }
    const auto a = supersmooth(x, y).in_input_order();
    std::vector<std::size_t> perm(200);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<double> xp(200), yp(200);
    for (std::size_t k = 0; k < 200; ++k) {
        xp[k] = x[perm[k]];
        yp[k] = y[perm[k]];
    }
    const auto b = supersmooth(xp, yp).in_input_order();
    for (std::size_t k = 0; k < 200; ++k) CHECK(std::abs(b[k] - a[perm[k]]) <= 1e-10);
}

TEST_CASE("bass pushes span choices up") {
    Rng rng(8);
    std::vector<double> x(300), y(300);
    for (std::size_t i = 0; i < 300; ++i) {
        x[i] = rng.uniform01();
        y[i] = std::sin(6 * x[i]) + rng.normal(0.0, 0.5);
    }
    const auto plain = supersmooth(x, y, {0.0, std::nullopt});
    const auto bassy = supersmooth(x, y, {10.0, std::nullopt});
    const double m0 = std::accumulate(plain.spans_used.begin(), plain.spans_used.end(), 0.0);
    const double m1 = std::accumulate(bassy.spans_used.begin(), bassy.spans_used.end(), 0.0);
    CHECK(m1 >= m0);
    CHECK(bassy.bass == 10.0);
}

TEST_CASE("fixed-span fallback") {
    std::vector<double> x(50), y(50);
    for (std::size_t i = 0; i < 50; ++i) {
        x[i] = i;
        y[i] = -2.0 * i + 4;
    }
    const auto fit = supersmooth(x, y, {0.0, 0.3});
    for (std::size_t i = 0; i < 50; ++i) CHECK(std::abs(fit.smoothed[i] - y[i]) < 1e-9);
    for (double s : fit.spans_used) CHECK(s == 0.3);
}

TEST_CASE("supersmoother errors") {
    std::vector<double> four{1, 2, 3, 4};
    CHECK_THROWS(supersmooth(four, four));
    std::vector<double> same(10, 1.0), y(10, 0.0);
    CHECK_THROWS(supersmooth(same, y));
    std::vector<double> x(10);
    std::iota(x.begin(), x.end(), 0.0);
    CHECK_THROWS(supersmooth(x, y, {11.0, std::nullopt}));
    CHECK_THROWS(supersmooth(x, y, {0.0, 0.0}));
    CHECK_THROWS(supersmooth(x, std::vector<double>(9, 0.0)));
}

TEST_CASE("evaluate interpolates between fitted points") {
    std::vector<double> x{0, 1, 2, 3, 4, 5, 6, 7};
    std::vector<double> y{1, 3, 5, 7, 9, 11, 13, 15};
    const auto fit = supersmooth(x, y);
    CHECK(fit.evaluate(2.5) == doctest::Approx(6.0));
    CHECK(fit.evaluate(-10) == doctest::Approx(1.0));
    CHECK(fit.evaluate(100) == doctest::Approx(15.0));
}
