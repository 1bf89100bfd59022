#include "splinedeconv/random_variates.hpp"

#include <cmath>

namespace splinedeconv {

double standard_normal(Rng& rng) {
  for (;;) {
    const double a = 2.0 * uniform_open(rng) - 1.0;
    const double b = 2.0 * uniform_open(rng) - 1.0;
    const double s = a * a + b * b;
    if (s > 0.0 && s < 1.0) return a * std::sqrt(-2.0 * std::log(s) / s);
  }
}

double gamma_variate(Rng& rng, double shape) {
  if (shape < 1.0) {
    // Boost the shape and correct with a uniform power.
    const double g = gamma_variate(rng, shape + 1.0);
    return g * std::pow(uniform_open(rng), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = standard_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double beta_variate(Rng& rng, double a, double b) {
  const double ga = gamma_variate(rng, a);
  const double gb = gamma_variate(rng, b);
  return ga / (ga + gb);
}

}  // namespace splinedeconv
