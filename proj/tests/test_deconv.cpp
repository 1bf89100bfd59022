#include <cmath>
#include <vector>

#include "doctest.h"
#include "splinedeconv/deconv_baseline.hpp"
#include "splinedeconv/errors.hpp"
#include "splinedeconv/random_variates.hpp"
#include "splinedeconv/rng.hpp"
#include "splinedeconv/simulation.hpp"

using namespace splinedeconv;

namespace {

std::vector<double> grid01(int points) {
  std::vector<double> g;
  for (int i = 0; i < points; ++i) g.push_back(static_cast<double>(i) / (points - 1));
  return g;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

}  // namespace

TEST_CASE("base kernel") {
  // Mass one and K(0) = (1/pi) int_0^1 (1 - t^2)^3 dt = 16 / (35 pi).
  CHECK(base_kernel(0.0) == doctest::Approx(16.0 / (35.0 * M_PI)).epsilon(1e-14));
  double mass = 0.0;
  const double h = 0.01;
  for (int i = -200000; i <= 200000; ++i) mass += base_kernel(i * h) * h;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-4));
  // Series and closed form agree across the switch at |z| = 2.
  CHECK(base_kernel(1.999999) == doctest::Approx(base_kernel(2.000001)).epsilon(1e-5));
  CHECK(base_kernel(3.0) == base_kernel(-3.0));
  CHECK(base_kernel_ft(0.5) == doctest::Approx(std::pow(0.75, 3)));
  CHECK(base_kernel_ft(1.0) == 0.0);
}

TEST_CASE("Fourier inversion without an error law") {
  KernelSpec spec;
  spec.bandwidth = 0.1;
  spec.fourier_nodes = 4096;
  const DeconvKernel k(spec);
  CHECK_FALSE(k.truncated());
  for (double z = -20.0; z <= 20.0; z += 0.37) CHECK(std::abs(k(z) - base_kernel(z)) < 1e-7);
}

TEST_CASE("zero-error limits") {
  auto rng = make_stream(2, 0, StreamRole::x);
  std::vector<double> w(400), y(400);
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = beta_variate(rng, 2.0, 2.0);
    y[i] = std::sin(2 * M_PI * w[i]) + 0.1 * standard_normal(rng);
  }
  const auto grid = grid01(101);
  KernelSpec spec;
  spec.bandwidth = 0.06;
  spec.error = ErrorLaw::uniform(1e-6);
  CHECK(sup_diff(deconv_density(w, spec, grid), naive_kernel_density(w, 0.06, grid)) < 1e-3);
  const auto dr = deconv_regression(w, y, spec, grid);
  const auto nr = naive_kernel_regression(w, y, 0.06, grid);
  for (std::size_t g = 10; g + 10 < grid.size(); ++g) {
    REQUIRE_FALSE(dr.masked[g]);
    CHECK(std::abs(dr.values[g] - nr.values[g]) < 1e-3);
  }
}

TEST_CASE("deconvolution density") {
  SimDesign d;
  d.model = ErrorModel::IIb;
  d.n = 2000;
  const auto data = generate(d, 0);
  const ErrorLaw law = error_law_for(d.model);
  KernelSpec spec;
  spec.bandwidth = data_bandwidth(data.w, &law);
  spec.error = law;
  const double lo = -0.5, hi = 1.5;
  std::vector<double> grid;
  for (int i = 0; i <= 800; ++i) grid.push_back(lo + (hi - lo) * i / 800.0);
  const auto f = deconv_density(data.w, spec, grid);
  double mass = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) mass += ((i == 0 || i + 1 == f.size()) ? 0.5 : 1.0) * f[i];
  mass *= (hi - lo) / 800.0;
  CHECK(mass == doctest::Approx(1.0).epsilon(0.02));

  SUBCASE("symmetric data") {
    std::vector<double> ws;
    for (double v : data.w) {
      ws.push_back(v);
      ws.push_back(1.0 - v);
    }
    const auto g = grid01(201);
    const auto fs = deconv_density(ws, spec, g);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(fs[i] == doctest::Approx(fs[g.size() - 1 - i]).epsilon(1e-9));
  }
}

TEST_CASE("deconvolution regression") {
  SimDesign d;
  d.task = Task::regression;
  d.n = 500;
  const auto data = generate(d, 0);
  KernelSpec spec;
  spec.bandwidth = 0.08;
  spec.error = error_law_for(d.model);
  const std::vector<double> yc(data.w.size(), 2.5);
  const auto r = deconv_regression(data.w, yc, spec, grid01(101));
  int unmasked = 0;
  for (std::size_t g = 0; g < r.values.size(); ++g) {
    if (r.masked[g]) continue;
    ++unmasked;
    CHECK(r.values[g] == doctest::Approx(2.5).epsilon(1e-9));
  }
  CHECK(unmasked > 50);
}

TEST_CASE("bandwidths and truncation") {
  CHECK_THROWS_AS(naive_kernel_density(std::vector<double>{0.5}, 0.0, grid01(3)), ConfigError);
  // Without the floor phi_U(t/h) of this uniform law crosses zero on [0,1].
  KernelSpec spec;
  spec.bandwidth = 0.02;
  spec.error = ErrorLaw::uniform(0.125);
  CHECK(DeconvKernel(spec).truncated());
  std::vector<double> w;
  for (int i = 0; i < 2000; ++i) w.push_back(0.5 + 0.1 * std::sin(i));
  const double h = data_bandwidth(w, &*spec.error);
  CHECK(h >= 1.2 * 0.125 / M_PI);
  spec.bandwidth = h;
  CHECK_FALSE(DeconvKernel(spec).truncated());
  // Normal reference rule without error law.
  CHECK(data_bandwidth(w, nullptr) > 0.0);
}
