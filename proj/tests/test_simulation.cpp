#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "splinedeconv/bspline.hpp"
#include "splinedeconv/deconv_baseline.hpp"
#include "splinedeconv/errors.hpp"
#include "splinedeconv/simulation.hpp"

using namespace splinedeconv;

namespace {

double var_of(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("data generation") {
  SUBCASE("pure function of design and replicate") {
    SimDesign d;
    d.n = 300;
    const auto a = generate(d, 5);
    const auto b = generate(d, 5);
    const auto c = generate(d, 6);
    CHECK(a.w == b.w);
    CHECK(a.w != c.w);
    for (std::size_t i = 0; i < a.w.size(); ++i) CHECK(a.w[i] == a.x[i] + a.u[i]);
    CHECK(a.y.empty());
  }
  SUBCASE("model I.a variances add") {
    SimDesign d;
    d.model = ErrorModel::Ia;
    d.n = 100000;
    const auto data = generate(d, 0);
    CHECK(var_of(data.u) == doctest::Approx(0.25).epsilon(0.02));
    CHECK(var_of(data.w) == doctest::Approx(0.25 + 1.0 / 36.0).epsilon(0.02));
  }
  SUBCASE("model II.c errors are bounded") {
    SimDesign d;
    d.model = ErrorModel::IIc;
    d.n = 5000;
    for (double u : generate(d, 1).u) CHECK(std::abs(u) <= 0.125);
  }
  SUBCASE("regression responses") {
    SimDesign d;
    d.task = Task::regression;
    d.n = 2000;
    const auto data = generate(d, 2);
    REQUIRE(data.y.size() == data.w.size());
    for (std::size_t i = 0; i < data.y.size(); ++i)
      CHECK(data.y[i] == doctest::Approx(std::sin(2 * M_PI * data.x[i]) + data.eps[i]).epsilon(1e-14));
    CHECK(var_of(data.eps) == doctest::Approx(0.25).epsilon(0.1));
    const auto g = generate_with_mean(d, 2, [](double x) { return 3.0 * x; });
    CHECK(g.x == data.x);
    for (std::size_t i = 0; i < g.y.size(); ++i)
      CHECK(g.y[i] == doctest::Approx(3.0 * g.x[i] + g.eps[i]).epsilon(1e-14));
  }
  CHECK(error_law_for(ErrorModel::IIb).variance() == doctest::Approx(0.0025));
  CHECK(error_law_for(ErrorModel::Ic).variance() == doctest::Approx(0.25));
  CHECK(parse_error_model("II.b") == ErrorModel::IIb);
  CHECK(to_string(ErrorModel::Ic) == "I.c");
  CHECK_THROWS_AS(parse_error_model("III"), ConfigError);
  CHECK(true_curve(Task::density, 0.5) == doctest::Approx(beta_density(4.0, 0.5)));
}

TEST_CASE("knots and reporting scale") {
  SimDesign d;
  d.n = 500;
  d.replicates = 0;
  CHECK(d.interior_knots() == 5);
  const auto rep = run_table1(d, Method::bspline);
  CHECK(rep.replicates.empty());
  CHECK(rep.failures == 0);
  CHECK(rep.h_b == doctest::Approx(1.0 / 6.0));
  d.n_interior = 9;
  CHECK(d.interior_knots() == 9);
  d.replicates = -1;
  CHECK_THROWS_AS(run_table1(d, Method::bspline), ConfigError);
}

TEST_CASE("replicates are independent of scheduling") {
  SimDesign d;
  d.n = 200;
  d.replicates = 6;
  d.seed = 11;
  const auto one = run_table1(d, Method::deconv, {}, 1);
  const auto three = run_table1(d, Method::deconv, {}, 3);
  REQUIRE(one.replicates.size() == 6);
  for (std::size_t r = 0; r < 6; ++r) {
    CHECK(one.replicates[r].replicate == static_cast<int>(r));
    CHECK(one.replicates[r].sup_mae == three.replicates[r].sup_mae);
    CHECK(one.replicates[r].sup_mae == replicate_sup_mae(d, Method::deconv, {}, static_cast<int>(r)));
  }
  CHECK(one.mean_mae == three.mean_mae);
  CHECK(one.scaled_mean_mae == doctest::Approx(std::sqrt(200.0 * one.h_b) * one.mean_mae));
}

TEST_CASE("rate curve") {
  const std::vector<int> bad{1000, 500};
  CHECK_THROWS_AS(run_rate_curve(Task::density, ErrorModel::IIa, bad, 2, 1), ConfigError);
  const std::vector<int> single{200};
  EstimatorSettings s;
  s.bandwidth = 0.1;
  const auto pts = run_rate_curve(Task::density, ErrorModel::IIa, single, 2, 1, s);
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].n == 200);
  CHECK(pts[0].scaled_mae == doctest::Approx(std::sqrt(200.0 * pts[0].h_b) * pts[0].mean_mae));
}

TEST_CASE("empirical quantile") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  CHECK(empirical_quantile(v, 0.0) == 1.0);
  CHECK(empirical_quantile(v, 0.25) == 1.0);
  CHECK(empirical_quantile(v, 0.26) == 2.0);
  CHECK(empirical_quantile(v, 0.5) == 2.0);
  CHECK(empirical_quantile(v, 1.0) == 4.0);
}

TEST_CASE("bootstrap bands") {
  SimDesign d;
  d.n = 300;
  const auto data = generate(d, 0);
  const auto grid = unit_eval_grid(21);
  const CurveEstimator est = [](std::span<const double> w, std::span<const double>,
                                std::span<const double> g) {
    return naive_kernel_density(w, 0.08, g);
  };
  SUBCASE("two resamples give min and max") {
    const auto b = bootstrap_bands(data.w, {}, est, 2, 0.9, 3, grid);
    REQUIRE(b.lo.size() == grid.size());
    CHECK(b.resamples == 2);
    for (std::size_t g = 0; g < grid.size(); ++g) CHECK(b.lo[g] <= b.hi[g]);
    const auto again = bootstrap_bands(data.w, {}, est, 2, 0.9, 3, grid, 1);
    CHECK(again.lo == b.lo);
    CHECK(again.hi == b.hi);
  }
  SUBCASE("invalid B") { CHECK_THROWS_AS(bootstrap_bands(data.w, {}, est, 1, 0.9, 3, grid), ConfigError); }
  SUBCASE("bands narrow with n") {
    double widths[2];
    int k = 0;
    for (int n : {250, 4000}) {
      SimDesign dn;
      dn.n = n;
      const auto w = generate(dn, 0).w;
      const auto b = bootstrap_bands(w, {}, est, 40, 0.9, 5, grid);
      double s = 0.0;
      for (std::size_t g = 0; g < grid.size(); ++g) s += b.hi[g] - b.lo[g];
      widths[k++] = s;
    }
    // Fixed bandwidth: width scales as n^{-1/2}, a factor of 4 here.
    CHECK(widths[0] / widths[1] == doctest::Approx(4.0).epsilon(0.35));
  }
}
