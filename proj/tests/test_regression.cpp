#include <cmath>
#include <vector>

#include "doctest.h"
#include "splinedeconv/errors.hpp"
#include "splinedeconv/random_variates.hpp"
#include "splinedeconv/rng.hpp"
#include "splinedeconv/semipar_regression.hpp"

using namespace splinedeconv;

namespace {

Eigen::VectorXd random_vec(int d, std::uint64_t seed, double scale = 1.0) {
  auto rng = make_stream(seed, 1, StreamRole::theta);
  Eigen::VectorXd v(d);
  for (int k = 0; k < d; ++k) v[k] = scale * (2.0 * uniform_open(rng) - 1.0);
  return v;
}

double log_mix(const KnotVector& kv, const Eigen::VectorXd& beta, const NoiseLaw& noise,
               const ErrorLaw& law, const WorkingDensity& work, double w, double y) {
  const RegressionModel m(kv, beta);
  double s = 0.0;
  for (int j = 0; j < work.size(); ++j) {
    const double x = work.points()[static_cast<std::size_t>(j)];
    s += noise.density(y - m.eval_m(x)) * law.density(w - x) * work.weights()[static_cast<std::size_t>(j)];
  }
  return std::log(s);
}

}  // namespace

TEST_CASE("working densities") {
  const auto u = WorkingDensity::uniform(25);
  CHECK(u.size() == 25);
  CHECK(u.points()[0] == doctest::Approx(0.02));
  CHECK(u.points()[24] == doctest::Approx(0.98));
  const auto t = WorkingDensity::triangular(25);
  double su = 0.0, st = 0.0;
  for (int j = 0; j < 25; ++j) {
    su += u.weights()[static_cast<std::size_t>(j)];
    st += t.weights()[static_cast<std::size_t>(j)];
  }
  CHECK(su == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(st == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.weights()[12] > t.weights()[0]);
  CHECK_THROWS_AS(WorkingDensity({0.5, 0.2}, {0.5, 0.5}), ConfigError);
  CHECK_THROWS_AS(WorkingDensity({0.2, 0.5}, {0.6, 0.6}), ConfigError);
  CHECK_THROWS_AS(WorkingDensity::uniform(0), ConfigError);
}

TEST_CASE("spline mean function") {
  const auto kv = KnotVector::uniform(5, 4);
  const int d = kv.basis_dim();
  const RegressionModel zero(kv, Eigen::VectorXd::Zero(d));
  const RegressionModel c(kv, Eigen::VectorXd::Constant(d, 2.5));
  for (double x : {0.0, 0.33, 1.0}) {
    CHECK(zero.eval_m(x) == 0.0);
    CHECK(c.eval_m(x) == doctest::Approx(2.5).epsilon(1e-12));
  }
  // Noiseless sin(2 pi x) is approximated at the h_b^4 scale.
  std::vector<double> xs, ys;
  for (int i = 0; i <= 1000; ++i) {
    xs.push_back(i / 1000.0);
    ys.push_back(std::sin(2 * M_PI * xs.back()));
  }
  const Eigen::VectorXd beta = naive_spline_fit(kv, xs, ys);
  const RegressionModel m(kv, beta);
  double sup = 0.0;
  for (double x : xs) sup = std::max(sup, std::abs(m.eval_m(x) - std::sin(2 * M_PI * x)));
  const double h = kv.max_spacing();
  CHECK(sup < 20.0 * std::pow(h, 4) * std::pow(2 * M_PI, 4) / 384.0);
}

TEST_CASE("working-model score") {
  const auto kv = KnotVector::uniform(4, 4);
  const int d = kv.basis_dim();
  const auto noise = NoiseLaw::normal(0.25);
  const auto law = ErrorLaw::laplace(0.05);
  const auto work = WorkingDensity::uniform(25);

  SUBCASE("flat truth with y at the mode") {
    const RegressionModel flat(kv, Eigen::VectorXd::Constant(d, 0.3));
    const auto s = score_sstar(flat, noise, law, work, 0.4, 0.3);
    REQUIRE(s.has_value());
    CHECK(s->lpNorm<Eigen::Infinity>() < 1e-15);
  }
  SUBCASE("single atom") {
    const WorkingDensity one({0.4}, {1.0});
    const RegressionModel m(kv, random_vec(d, 2));
    const double y = 0.7;
    const double e = y - m.eval_m(0.4);
    const auto s = score_sstar(m, noise, law, one, 0.9, y);
    REQUIRE(s.has_value());
    const Eigen::VectorXd expect =
        -eval_basis(kv, 0.4).values * noise.density_deriv(e) / noise.density(e);
    CHECK((*s - expect).lpNorm<Eigen::Infinity>() < 1e-12);
    // Independent of f_U.
    const auto s2 = score_sstar(m, noise, ErrorLaw::normal(0.01), one, 0.1, y);
    CHECK((*s2 - expect).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  SUBCASE("gradient of the working log-likelihood") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const Eigen::VectorXd beta = random_vec(d, seed);
      const auto r = random_vec(2, seed + 100);
      const double w = 0.5 + 0.5 * r[0];
      const double y = 1.5 * r[1];
      const auto s = score_sstar(RegressionModel(kv, beta), noise, law, work, w, y);
      REQUIRE(s.has_value());
      for (int k = 0; k < d; ++k) {
        const double h = 1e-6;
        Eigen::VectorXd bp = beta, bm = beta;
        bp[k] += h;
        bm[k] -= h;
        const double fd = (log_mix(kv, bp, noise, law, work, w, y) -
                           log_mix(kv, bm, noise, law, work, w, y)) /
                          (2 * h);
        CHECK(std::abs((*s)[k] - fd) <= 1e-5 * std::max(1e-3, std::abs(fd)));
      }
    }
  }
  SUBCASE("degenerate observation") {
    const RegressionModel m(kv, Eigen::VectorXd::Zero(d));
    CHECK_FALSE(score_sstar(m, noise, ErrorLaw::uniform(0.01), work, 5.0, 0.0).has_value());
  }
}

TEST_CASE("A and H") {
  const auto kv = KnotVector::uniform(3, 4);
  const int d = kv.basis_dim();
  const auto noise = NoiseLaw::normal(0.25);

  SUBCASE("single atom has unit mass") {
    const WorkingDensity one({0.5}, {1.0});
    const RegressionModel m(kv, random_vec(d, 3));
    for (const auto& law : {ErrorLaw::normal(0.01), ErrorLaw::uniform(0.2)}) {
      const std::vector<double> w{0.5};
      const std::vector<double> y{m.eval_m(0.5)};
      const auto grid = plane_grid(w, std::span<const double>(y), law, &noise, {121, 6.0});
      const auto ah = build_AH(m, noise, law, one, grid);
      CHECK(ah.A(0, 0) == doctest::Approx(1.0).epsilon(2e-3));
      const auto pp = build_AH_per_point(m, noise, law, one);
      CHECK(pp.A(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
      CHECK(std::abs(pp.H(0, 0)) < 1e-10);
    }
  }
  SUBCASE("flat mean gives H = 0") {
    const auto work = WorkingDensity::uniform(7);
    const RegressionModel flat(kv, Eigen::VectorXd::Zero(d));
    const auto law = ErrorLaw::laplace(0.1);
    const std::vector<double> w{0.0, 1.0};
    const std::vector<double> y{-1.0, 1.0};
    const auto grid = plane_grid(w, std::span<const double>(y), law, &noise, {61, 4.0});
    CHECK(build_AH(flat, noise, law, work, grid).H.lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(build_AH_per_point(flat, noise, law, work).H.lpNorm<Eigen::Infinity>() < 1e-12);
  }
  SUBCASE("rows of A sum to one") {
    // sum_j p_j = 1, so each row integrates the joint density of (W, Y) given x_i.
    const auto work = WorkingDensity::uniform(9);
    const RegressionModel m(kv, random_vec(d, 5));
    const auto law = ErrorLaw::uniform(0.125);
    const auto pp = build_AH_per_point(m, noise, law, work);
    for (int i = 0; i < work.size(); ++i) CHECK(pp.A.row(i).sum() == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("plane and per-point schemes agree") {
    const auto work = WorkingDensity::uniform(9);
    const RegressionModel m(kv, random_vec(d, 6));
    const auto law = ErrorLaw::normal(0.04);
    std::vector<double> w, y;
    for (int i = 0; i <= 20; ++i) {
      w.push_back(i / 20.0);
      y.push_back(m.eval_m(i / 20.0));
    }
    const auto grid = plane_grid(w, std::span<const double>(y), law, &noise, {241, 7.0});
    const auto a = build_AH(m, noise, law, work, grid);
    const auto b = build_AH_per_point(m, noise, law, work, {32, 7.0});
    CHECK((a.A - b.A).lpNorm<Eigen::Infinity>() < 2e-3);
    CHECK((a.H - b.H).lpNorm<Eigen::Infinity>() < 2e-3);
  }
}

TEST_CASE("correction solve") {
  const auto kv = KnotVector::uniform(3, 4);
  const int d = kv.basis_dim();

  SUBCASE("single atom") {
    const WorkingDensity one({0.3}, {1.0});
    Eigen::MatrixXd A(1, 1), H(1, 1);
    A(0, 0) = 0.8;
    H(0, 0) = 0.2;
    const auto s = solve_correction(A, H, kv, one);
    const Eigen::VectorXd b = eval_basis(kv, 0.3).values * 0.2;
    CHECK((s.a.col(0) - b / 0.8).lpNorm<Eigen::Infinity>() < 1e-15);
  }
  SUBCASE("identity A") {
    const auto work = WorkingDensity::uniform(6);
    const Eigen::MatrixXd H = Eigen::MatrixXd::Random(6, 6);
    const auto s = solve_correction(Eigen::MatrixXd::Identity(6, 6), H, kv, work);
    for (int j = 0; j < 6; ++j) {
      Eigen::VectorXd expect = Eigen::VectorXd::Zero(d);
      for (int k = 0; k < 6; ++k) expect += eval_basis(kv, work.points()[static_cast<std::size_t>(k)]).values * H(j, k);
      CHECK((s.a.col(j) - expect).lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }
  SUBCASE("random well-conditioned system") {
    const auto work = WorkingDensity::uniform(12);
    const Eigen::MatrixXd A = Eigen::MatrixXd::Random(12, 12) + 6.0 * Eigen::MatrixXd::Identity(12, 12);
    const Eigen::MatrixXd H = Eigen::MatrixXd::Random(12, 12);
    const auto s = solve_correction(A, H, kv, work);
    CHECK(s.ridge == 0.0);
    CHECK(s.residual < 1e-10);
    CHECK((s.a * A.transpose() - s.b).lpNorm<Eigen::Infinity>() < 1e-10);
  }
  SUBCASE("ridge for a zero row and column") {
    const auto work = WorkingDensity::uniform(4);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(4, 4);
    A(3, 3) = 0.0;
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(4, 4);
    H(3, 3) = 0.0;
    const auto s = solve_correction(A, H, kv, work);
    CHECK(s.ridge > 0.0);
    CHECK(s.a.allFinite());
  }
  SUBCASE("size mismatch") {
    CHECK_THROWS_AS(solve_correction(Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Identity(3, 3),
                                     kv, WorkingDensity::uniform(4)),
                    ConfigError);
  }
}

TEST_CASE("posterior correction and estimating equation") {
  const auto kv = KnotVector::uniform(3, 4);
  const int d = kv.basis_dim();
  const auto noise = NoiseLaw::normal(0.25);
  const auto law = ErrorLaw::laplace(0.05);
  const auto work = WorkingDensity::uniform(8);
  const RegressionModel m(kv, random_vec(d, 9));

  CorrectionSolve s;
  s.a = Eigen::MatrixXd::Random(d, work.size());

  SUBCASE("common a_j") {
    CorrectionSolve c;
    c.a = Eigen::VectorXd::LinSpaced(d, 1.0, 2.0).replicate(1, work.size());
    const auto p = posterior_correction(c, m, noise, law, work, 0.4, 0.1);
    REQUIRE(p.has_value());
    CHECK((*p - Eigen::VectorXd::LinSpaced(d, 1.0, 2.0)).lpNorm<Eigen::Infinity>() < 1e-13);
  }
  SUBCASE("brute-force weights") {
    const double w = 0.37, y = -0.2;
    double den = 0.0;
    Eigen::VectorXd num = Eigen::VectorXd::Zero(d);
    for (int j = 0; j < work.size(); ++j) {
      const double x = work.points()[static_cast<std::size_t>(j)];
      const double p = noise.density(y - m.eval_m(x)) * law.density(w - x) *
                       work.weights()[static_cast<std::size_t>(j)];
      num += p * s.a.col(j);
      den += p;
    }
    const auto p = posterior_correction(s, m, noise, law, work, w, y);
    REQUIRE(p.has_value());
    CHECK((*p - num / den).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  SUBCASE("single atom") {
    const WorkingDensity one({0.6}, {1.0});
    CorrectionSolve c;
    c.a = Eigen::VectorXd::LinSpaced(d, -1.0, 1.0);
    for (double w : {0.1, 0.9}) {
      const auto p = posterior_correction(c, m, noise, law, one, w, 0.5);
      REQUIRE(p.has_value());
      CHECK((*p - c.a.col(0)).lpNorm<Eigen::Infinity>() < 1e-15);
    }
  }
  SUBCASE("zero correction gives the mean score") {
    CorrectionSolve z;
    z.a = Eigen::MatrixXd::Zero(d, work.size());
    const std::vector<double> w{0.1, 0.5, 0.8};
    const std::vector<double> y{0.3, -0.4, 1.0};
    const auto v = estimating_equation(m, noise, law, work, z, w, y);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < w.size(); ++i) mean += *score_sstar(m, noise, law, work, w[i], y[i]);
    mean /= 3.0;
    CHECK(v.excluded == 0);
    CHECK((v.value - mean).lpNorm<Eigen::Infinity>() < 1e-13);
  }
  SUBCASE("single-atom reduction") {
    // L = 1: F = mean_i S*_i - a_1 with a_1 = B(x_1) H_11 / A_11.
    const WorkingDensity one({0.6}, {1.0});
    const auto ah = build_AH_per_point(m, noise, law, one);
    const auto c = solve_correction(ah.A, ah.H, kv, one);
    const std::vector<double> w{0.2, 0.7};
    const std::vector<double> y{0.0, 0.9};
    const auto v = estimating_equation(m, noise, law, one, c, w, y);
    const Eigen::VectorXd b1 = eval_basis(kv, 0.6).values;
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < 2; ++i) {
      const double e = y[i] - m.eval_m(0.6);
      expect += -b1 * noise.density_deriv(e) / noise.density(e);
    }
    expect = expect / 2.0 - b1 * ah.H(0, 0) / ah.A(0, 0);
    CHECK((v.value - expect).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("regression fits") {
  const auto kv = KnotVector::uniform(3, 4);
  const auto noise = NoiseLaw::normal(0.25);

  SUBCASE("too few observations") {
    const std::vector<double> w{0.1, 0.2};
    const std::vector<double> y{0.0, 1.0};
    CHECK_THROWS_AS(fit_regression(kv, noise, ErrorLaw::normal(0.01), WorkingDensity::uniform(25), w, y),
                    DataError);
  }
  SUBCASE("vanishing error recovers least squares") {
    // X on the working points, so a tiny uniform error keeps every
    // observation next to its atom.
    const auto work = WorkingDensity::uniform(25);
    const auto law = ErrorLaw::uniform(1e-6);
    auto rx = make_stream(4, 0, StreamRole::x);
    auto ru = make_stream(4, 0, StreamRole::u);
    auto re = make_stream(4, 0, StreamRole::eps);
    const int n = 600;
    const auto u = sample(law, ru, n);
    const auto eps = sample(noise, re, n);
    std::vector<double> w(n), y(n);
    for (int i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(rx() % 25);
      const double x = work.points()[j];
      w[static_cast<std::size_t>(i)] = x + u[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(i)] = std::sin(2 * M_PI * x) + eps[static_cast<std::size_t>(i)];
    }
    const auto fit = fit_regression(kv, noise, law, work, w, y);
    REQUIRE(fit.converged);
    const RegressionModel naive(kv, naive_spline_fit(kv, w, y));
    double sup = 0.0;
    for (int g = 0; g <= 200; ++g)
      sup = std::max(sup, std::abs(fit.model.eval_m(g / 200.0) - naive.eval_m(g / 200.0)));
    CHECK(sup < 1e-2);
    CHECK(fit.max_solve_residual < 1e-8);
  }
}
