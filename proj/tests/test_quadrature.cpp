#include <cmath>
#include <vector>

#include "doctest.h"
#include "splinedeconv/errors.hpp"
#include "splinedeconv/quadrature.hpp"

using namespace splinedeconv;

TEST_CASE("Gauss-Legendre rules") {
  for (int n : {1, 2, 5, 10, 24, 40}) {
    CAPTURE(n);
    const auto& g = gauss_legendre(n);
    double sw = 0.0;
    for (double w : g.weights) sw += w;
    CHECK(sw == doctest::Approx(2.0).epsilon(1e-14));
    // Exact for polynomials of degree 2n - 1.
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        s += g.weights[static_cast<std::size_t>(i)] * std::pow(g.nodes[static_cast<std::size_t>(i)], k);
      const double exact = k % 2 == 1 ? 0.0 : 2.0 / (k + 1);
      CHECK(s == doctest::Approx(exact).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(gauss_legendre(0), ConfigError);
}

TEST_CASE("composite rules") {
  const auto kv = KnotVector::uniform(5, 4);
  const auto grid = unit_grid(kv, 10);
  CHECK(grid.nodes.size() == 60);
  double s = 0.0;
  double e = 0.0;
  for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
    CHECK(grid.nodes[i] > 0.0);
    CHECK(grid.nodes[i] < 1.0);
    s += grid.weights[i];
    e += grid.weights[i] * std::exp(grid.nodes[i]);
  }
  CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(e == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-14));

  const std::vector<double> br{0.0, 0.2, 0.2, 1.0};
  const auto c = composite_gauss(br, 4);
  CHECK(c.nodes.size() == 8);  // the zero-length panel is skipped
  CHECK_THROWS_AS(composite_gauss(br, 1), ConfigError);
}

TEST_CASE("trapezoid axis and plane grid") {
  const auto ax = trapezoid_axis(-1.0, 2.0, 31);
  CHECK(ax.nodes.front() == -1.0);
  CHECK(ax.nodes.back() == 2.0);
  double s = 0.0;
  for (double w : ax.weights) s += w;
  CHECK(s == doctest::Approx(3.0));
  CHECK_THROWS_AS(trapezoid_axis(1.0, 1.0, 10), ConfigError);

  const std::vector<double> w{0.1, 0.5, 0.9};
  const std::vector<double> y{-1.0, 0.0, 2.0};
  const auto law = ErrorLaw::normal(0.01);
  const auto noise = NoiseLaw::normal(0.25);
  const auto g = plane_grid(w, std::span<const double>(y), law, &noise, {61, 4.0});
  CHECK(g.w.lo == doctest::Approx(0.1 - 0.4));
  CHECK(g.w.hi == doctest::Approx(0.9 + 0.4));
  REQUIRE(g.y.has_value());
  CHECK(g.y->lo == doctest::Approx(-1.0 - 2.0));
  CHECK(g.y->hi == doctest::Approx(2.0 + 2.0));
  const auto gu = plane_grid(w, std::nullopt, ErrorLaw::uniform(0.125), nullptr, {61, 4.0});
  CHECK(gu.w.lo == doctest::Approx(0.1 - 0.125));
  CHECK_FALSE(gu.y.has_value());
  CHECK_THROWS_AS(plane_grid(w, std::span<const double>(y), law, nullptr, {61, 4.0}), ConfigError);
  CHECK_THROWS_AS(plane_grid({}, std::nullopt, law, nullptr, {61, 4.0}), DataError);
}
