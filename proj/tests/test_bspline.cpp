#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/QR>

#include "doctest.h"
#include "splinedeconv/bspline.hpp"
#include "splinedeconv/errors.hpp"
#include "splinedeconv/quadrature.hpp"

using namespace splinedeconv;

TEST_CASE("knot vectors") {
  SUBCASE("no interior knots") {
    const auto kv = KnotVector::uniform(0, 4);
    CHECK(kv.basis_dim() == 4);
    const std::vector<double> expect{0, 0, 0, 0, 1, 1, 1, 1};
    CHECK(std::vector<double>(kv.full().begin(), kv.full().end()) == expect);
  }
  SUBCASE("one interior knot at the midpoint") {
    const auto kv = KnotVector::uniform(1, 4);
    CHECK(kv.basis_dim() == 5);
    CHECK(kv.interior()[0] == 0.5);
  }
  SUBCASE("equal spacing") {
    for (int n = 1; n <= 200; ++n) {
      const auto kv = KnotVector::uniform(n, 4);
      CHECK(kv.mesh_ratio() == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(kv.max_spacing() == doctest::Approx(1.0 / (n + 1)));
      const auto full = kv.full();
      for (std::size_t i = 1; i < full.size(); ++i) CHECK(full[i] >= full[i - 1]);
    }
  }
  SUBCASE("invalid interior knots") {
    CHECK_THROWS_AS(KnotVector({0.5, 0.3}, 4), ConfigError);
    CHECK_THROWS_AS(KnotVector({0.0}, 4), ConfigError);
    CHECK_THROWS_AS(KnotVector::uniform(-1, 4), ConfigError);
    CHECK_THROWS_AS(KnotVector::uniform(3, 0), ConfigError);
  }
}

TEST_CASE("knot rule") {
  CHECK(knots_for_sample_size(500) == 5);
  CHECK(knots_for_sample_size(1000) == 6);
  CHECK(knots_for_sample_size(2000) == 6);
  // 1.3 n^{1/5} is exactly 1.3 at n = 1; the rule wants a strictly larger integer.
  CHECK(knots_for_sample_size(1) == 2);
  CHECK(KnotVector::uniform(knots_for_sample_size(500)).max_spacing() ==
        doctest::Approx(1.0 / 6.0));
}

TEST_CASE("partition of unity and range") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int order : {1, 2, 3, 4, 5}) {
    const auto kv = KnotVector::uniform(7, order);
    for (int i = 0; i < 10000; ++i) {
      const double x = unif(rng);
      const auto b = eval_basis(kv, x);
      CHECK(std::abs(b.values.sum() - 1.0) < 1e-12);
      CHECK(b.values.minCoeff() >= 0.0);
      CHECK(b.values.maxCoeff() <= 1.0 + 1e-15);
    }
  }
}

TEST_CASE("end points and knots") {
  const auto kv = KnotVector::uniform(4, 4);
  const auto at0 = eval_basis(kv, 0.0);
  CHECK(at0.values[0] == 1.0);
  const auto at1 = eval_basis(kv, 1.0);
  CHECK(at1.values[kv.basis_dim() - 1] == 1.0);
  CHECK(at1.values.sum() == doctest::Approx(1.0));
  for (double t : kv.interior()) CHECK(eval_basis(kv, t).values.sum() == doctest::Approx(1.0));
  CHECK_THROWS_AS(eval_basis(kv, -0.1), ConfigError);
  CHECK_THROWS_AS(eval_basis(kv, 1.1), ConfigError);
}

TEST_CASE("local support") {
  const auto kv = KnotVector::uniform(6, 4);
  const auto full = kv.full();
  for (int i = 0; i <= 1000; ++i) {
    const double x = i / 1000.0;
    const auto b = eval_basis(kv, x);
    for (int k = 0; k < kv.basis_dim(); ++k) {
      const double lo = full[static_cast<std::size_t>(k)];
      const double hi = full[static_cast<std::size_t>(k + kv.order())];
      const bool inside = (x >= lo && x < hi) || (x == 1.0 && hi == 1.0);
      if (!inside) CHECK(b.values[k] == 0.0);
    }
  }
}

TEST_CASE("cubic splines reproduce cubics") {
  // Least squares on a fine grid recovers a cubic exactly.
  const auto kv = KnotVector::uniform(5, 4);
  std::vector<double> xs;
  for (int i = 0; i <= 400; ++i) xs.push_back(i / 400.0);
  const Eigen::MatrixXd b = basis_matrix(kv, xs);
  Eigen::VectorXd y(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = xs[i];
    y[static_cast<Eigen::Index>(i)] = 1.0 - 2.0 * x + 3.0 * x * x * x;
  }
  const Eigen::VectorXd beta = b.colPivHouseholderQr().solve(y);
  CHECK((b * beta - y).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("Gram matrix scales with the mesh") {
  // s_i = int B(x) g_i(x) dx with g_i a narrow normal bump at a uniform
  // centre; the second-moment matrix then has eigenvalues of order h_b.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> ratios;
  for (int n_int : {5, 10, 20, 40}) {
    const auto kv = KnotVector::uniform(n_int, 4);
    const auto grid = unit_grid(KnotVector::uniform(199, 4), 10);
    const Eigen::MatrixXd b = basis_matrix(kv, grid.nodes);
    const double sd = 0.002;
    std::vector<Eigen::VectorXd> samples;
    for (int i = 0; i < 4000; ++i) {
      const double c = unif(rng);
      Eigen::VectorXd s = Eigen::VectorXd::Zero(kv.basis_dim());
      for (std::size_t g = 0; g < grid.nodes.size(); ++g) {
        const double z = (grid.nodes[g] - c) / sd;
        s += grid.weights[g] * std::exp(-0.5 * z * z) / (sd * std::sqrt(2 * M_PI)) *
             b.row(static_cast<Eigen::Index>(g)).transpose();
      }
      samples.push_back(s);
    }
    const auto e = gram_eigen_bounds(kv, samples);
    const double h = kv.max_spacing();
    CHECK(e.min_eig > 0.0);
    // Exact bound max_k int B_k = h, plus Monte Carlo noise.
    CHECK(e.max_eig / h < 1.1);
    CHECK(e.min_eig / h > 0.005);
    ratios.push_back(e.max_eig / e.min_eig);
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  CHECK(*hi / *lo < 2.0);
}
