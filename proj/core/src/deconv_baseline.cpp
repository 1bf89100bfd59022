#include "splinedeconv/deconv_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "splinedeconv/errors.hpp"

namespace splinedeconv {

namespace {

// int_0^1 t^{2k} (1 - t^2)^3 dt = 1/(2k+1) - 3/(2k+3) + 3/(2k+5) - 1/(2k+7).
double moment(int k) {
  const double a = 2.0 * k;
  return 1.0 / (a + 1) - 3.0 / (a + 3) + 3.0 / (a + 5) - 1.0 / (a + 7);
}

void check_bandwidth(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("bandwidth must be positive");
}

template <class Kernel>
std::vector<double> density_sum(std::span<const double> w, double h, const Kernel& k,
                                std::span<const double> grid) {
  if (w.empty()) throw DataError("kernel density: no observations");
  std::vector<double> out(grid.size(), 0.0);
  const double scale = 1.0 / (static_cast<double>(w.size()) * h);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double s = 0.0;
    for (double wi : w) s += k((grid[g] - wi) / h);
    out[g] = s * scale;
  }
  return out;
}

MaskedCurve masked_ratio(const std::vector<double>& num, const std::vector<double>& den) {
  double dmax = 0.0;
  for (double v : den) dmax = std::max(dmax, v);
  MaskedCurve out;
  out.values.assign(den.size(), 0.0);
  out.masked.assign(den.size(), true);
  for (std::size_t g = 0; g < den.size(); ++g) {
    if (dmax > 0.0 && den[g] >= 1e-6 * dmax) {
      out.values[g] = num[g] / den[g];
      out.masked[g] = false;
    }
  }
  return out;
}

template <class Kernel>
MaskedCurve ratio_sum(std::span<const double> w, std::span<const double> y, double h,
                      const Kernel& k, std::span<const double> grid) {
  if (w.empty()) throw DataError("kernel regression: no observations");
  if (w.size() != y.size()) throw DataError("kernel regression: w and y differ in length");
  std::vector<double> num(grid.size(), 0.0);
  std::vector<double> den(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double kv = k((grid[g] - w[i]) / h);
      num[g] += kv * y[i];
      den[g] += kv;
    }
  }
  return masked_ratio(num, den);
}

}  // namespace

double base_kernel_ft(double t) {
  if (std::abs(t) >= 1.0) return 0.0;
  const double s = 1.0 - t * t;
  return s * s * s;
}

double base_kernel(double z) {
  const double x = std::abs(z);
  if (x < 2.0) {
    // (1/pi) sum_k (-1)^k x^{2k} / (2k)! * moment(k); avoids the
    // cancellation of the closed form near zero.
    double term = 1.0;
    double s = moment(0);
    for (int k = 1; k < 40; ++k) {
      term *= -x * x / ((2.0 * k - 1.0) * (2.0 * k));
      const double add = term * moment(k);
      s += add;
      if (std::abs(add) < 1e-18) break;
    }
    return s / std::numbers::pi;
  }
  const double x2 = x * x;
  return (48.0 * std::cos(x) * (1.0 - 15.0 / x2) / (x2 * x2) -
          144.0 * std::sin(x) * (2.0 - 5.0 / x2) / (x2 * x2 * x)) /
         std::numbers::pi;
}

DeconvKernel::DeconvKernel(const KernelSpec& spec) : h_(spec.bandwidth) {
  check_bandwidth(h_);
  if (spec.fourier_nodes < 2) throw ConfigError("fourier_nodes must be >= 2");
  const int m = spec.fourier_nodes;
  const double dt = 1.0 / (m - 1);
  t_.reserve(static_cast<std::size_t>(m));
  wt_.reserve(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    const double t = k * dt;
    double ratio = base_kernel_ft(t);
    if (spec.error) {
      const double phi = spec.error->char_fn(t / h_);
      if (!(phi >= 1e-12)) {
        truncated_ = true;
        break;
      }
      ratio /= phi;
    }
    t_.push_back(t);
    wt_.push_back(((k == 0 || k == m - 1) ? 0.5 * dt : dt) * ratio);
  }
}

double DeconvKernel::operator()(double z) const {
  double s = 0.0;
  for (std::size_t k = 0; k < t_.size(); ++k) s += wt_[k] * std::cos(t_[k] * z);
  return s / std::numbers::pi;
}

std::vector<double> DeconvKernel::weighted_sum(std::span<const double> w,
                                               std::span<const double> v,
                                               std::span<const double> grid) const {
  if (!v.empty() && v.size() != w.size())
    throw DataError("weighted_sum: weights and observations differ in length");
  const std::size_t m = t_.size();
  std::vector<double> c(m, 0.0);
  std::vector<double> s(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const double f = t_[k] / h_;
    double ck = 0.0;
    double sk = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double vi = v.empty() ? 1.0 : v[i];
      ck += vi * std::cos(f * w[i]);
      sk += vi * std::sin(f * w[i]);
    }
    c[k] = ck * wt_[k];
    s[k] = sk * wt_[k];
  }
  // cos(f (x - W)) = cos(f x) cos(f W) + sin(f x) sin(f W)
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double f = t_[k] / h_;
      acc += c[k] * std::cos(f * grid[g]) + s[k] * std::sin(f * grid[g]);
    }
    out[g] = acc / std::numbers::pi;
  }
  return out;
}

std::vector<double> deconv_density(std::span<const double> w, const KernelSpec& spec,
                                   std::span<const double> grid) {
  if (w.empty()) throw DataError("deconv_density: no observations");
  const DeconvKernel k(spec);
  auto out = k.weighted_sum(w, {}, grid);
  const double scale = 1.0 / (static_cast<double>(w.size()) * spec.bandwidth);
  for (auto& v : out) v *= scale;
  return out;
}

MaskedCurve deconv_regression(std::span<const double> w, std::span<const double> y,
                              const KernelSpec& spec, std::span<const double> grid) {
  if (w.empty()) throw DataError("deconv_regression: no observations");
  if (w.size() != y.size()) throw DataError("deconv_regression: w and y differ in length");
  const DeconvKernel k(spec);
  return masked_ratio(k.weighted_sum(w, y, grid), k.weighted_sum(w, {}, grid));
}

std::vector<double> naive_kernel_density(std::span<const double> w, double bandwidth,
                                         std::span<const double> grid) {
  check_bandwidth(bandwidth);
  return density_sum(w, bandwidth, base_kernel, grid);
}

MaskedCurve naive_kernel_regression(std::span<const double> w, std::span<const double> y,
                                    double bandwidth, std::span<const double> grid) {
  check_bandwidth(bandwidth);
  return ratio_sum(w, y, bandwidth, base_kernel, grid);
}

}  // namespace splinedeconv
