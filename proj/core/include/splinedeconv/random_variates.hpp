#pragma once

#include "splinedeconv/rng.hpp"

namespace splinedeconv {

/// Standard normal draw (polar Box-Muller, one value per call).
double standard_normal(Rng& rng);

/// Gamma(shape, 1) draw by Marsaglia-Tsang.
double gamma_variate(Rng& rng, double shape);

/// Beta(a, b) draw as G_a / (G_a + G_b).
double beta_variate(Rng& rng, double a, double b);

}  // namespace splinedeconv
