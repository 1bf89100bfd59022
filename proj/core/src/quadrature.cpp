#include "splinedeconv/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "splinedeconv/errors.hpp"

namespace splinedeconv {

namespace {

GaussRule compute_gauss_legendre(int n) {
  GaussRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // Recompute derivative at the converged root.
    double p0 = 1.0;
    double p1 = 0.0;
    for (int j = 0; j < n; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = -z;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = z;
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
  if (n < 1) throw ConfigError("gauss_legendre: need at least one node");
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
  return it->second;
}

UnitGrid composite_gauss(std::span<const double> breakpoints, int nodes_per_panel) {
  if (nodes_per_panel < 2) throw ConfigError("quad.nodes_per_panel must be >= 2");
  const GaussRule& g = gauss_legendre(nodes_per_panel);
  UnitGrid grid;
  grid.nodes_per_panel = nodes_per_panel;
  for (std::size_t p = 1; p < breakpoints.size(); ++p) {
    const double a = breakpoints[p - 1];
    const double b = breakpoints[p];
    if (!(b > a)) continue;
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (int k = 0; k < nodes_per_panel; ++k) {
      grid.nodes.push_back(mid + half * g.nodes[static_cast<std::size_t>(k)]);
      grid.weights.push_back(half * g.weights[static_cast<std::size_t>(k)]);
    }
  }
  return grid;
}

UnitGrid unit_grid(const KnotVector& kv, int nodes_per_panel) {
  const auto b = kv.breakpoints();
  return composite_gauss(b, nodes_per_panel);
}

AxisGrid trapezoid_axis(double lo, double hi, int points) {
  if (points < 2) throw ConfigError("trapezoid_axis: need at least two points");
  if (!(hi > lo)) throw ConfigError("trapezoid_axis: empty range");
  AxisGrid ax;
  ax.lo = lo;
  ax.hi = hi;
  ax.nodes.resize(static_cast<std::size_t>(points));
  ax.weights.resize(static_cast<std::size_t>(points));
  const double h = (hi - lo) / (points - 1);
  for (int i = 0; i < points; ++i) {
    ax.nodes[static_cast<std::size_t>(i)] = i == points - 1 ? hi : lo + i * h;
    ax.weights[static_cast<std::size_t>(i)] = (i == 0 || i == points - 1) ? 0.5 * h : h;
  }
  return ax;
}

PlaneGrid plane_grid(std::span<const double> w_data, std::optional<std::span<const double>> y_data,
                     const ErrorLaw& law, const NoiseLaw* noise, PlaneGridOptions opts) {
  if (w_data.empty()) throw DataError("plane_grid: empty w data");
  if (opts.points < 20) throw ConfigError("quad.plane_points must be >= 20");
  if (!(opts.tail_sigmas > 0.0)) throw ConfigError("quad.tail_sigmas must be positive");

  PlaneGrid grid;
  const auto [wmin, wmax] = std::minmax_element(w_data.begin(), w_data.end());
  const double wm = law.tail_margin(opts.tail_sigmas);
  grid.w = trapezoid_axis(*wmin - wm, *wmax + wm, opts.points);

  if (y_data) {
    if (y_data->empty()) throw DataError("plane_grid: empty y data");
    if (noise == nullptr) throw ConfigError("plane_grid: y axis requires a noise law");
    const auto [ymin, ymax] = std::minmax_element(y_data->begin(), y_data->end());
    const double ym = noise->law().tail_margin(opts.tail_sigmas);
    grid.y = trapezoid_axis(*ymin - ym, *ymax + ym, opts.points);
  }
  return grid;
}

}  // namespace splinedeconv
