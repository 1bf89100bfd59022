#pragma once

#include <optional>
#include <span>
#include <vector>

#include "splinedeconv/bspline.hpp"
#include "splinedeconv/error_laws.hpp"

namespace splinedeconv {

/// Gauss-Legendre rule with n nodes on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussRule& gauss_legendre(int n);

/// Composite quadrature rule on an interval.
struct UnitGrid {
  std::vector<double> nodes;
  std::vector<double> weights;
  int nodes_per_panel = 0;
};

/// Composite Gauss-Legendre rule with one panel per knot interval of [0,1].
UnitGrid unit_grid(const KnotVector& kv, int nodes_per_panel = 10);

/// Composite Gauss-Legendre rule over consecutive sorted breakpoints.
/// Zero-length panels are skipped.
UnitGrid composite_gauss(std::span<const double> breakpoints, int nodes_per_panel);

/// Trapezoid rule on [lo, hi] with `points` equally spaced nodes.
struct AxisGrid {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> nodes;
  std::vector<double> weights;
};
AxisGrid trapezoid_axis(double lo, double hi, int points);

/// Tensor trapezoid grid over (w, y). `y` is absent for one-dimensional use.
struct PlaneGrid {
  AxisGrid w;
  std::optional<AxisGrid> y;
};

struct PlaneGridOptions {
  int points = 61;
  double tail_sigmas = 4.0;
};

/// Each axis covers [min(data) - margin, max(data) + margin], where margin is
/// tail_sigmas standard deviations of the law on that axis (the exact
/// half-width for a uniform law).
PlaneGrid plane_grid(std::span<const double> w_data, std::optional<std::span<const double>> y_data,
                     const ErrorLaw& law, const NoiseLaw* noise, PlaneGridOptions opts = {});

}  // namespace splinedeconv
