#pragma once

#include <optional>
#include <span>
#include <vector>

#include "splinedeconv/error_laws.hpp"

namespace splinedeconv {

/// Base kernel K with Fourier transform phi_K(t) = (1 - t^2)^3 on [-1, 1].
/// Second order, symmetric, integrates to one.
double base_kernel(double z);
double base_kernel_ft(double t);

/// Kernel estimator settings. Without an error law the kernel is used as is
/// (the naive, error-ignoring estimators).
struct KernelSpec {
  double bandwidth = 0.05;
  std::optional<ErrorLaw> error;
  int fourier_nodes = 2048;
};

/// Deconvoluting kernel K_U(z) = (1/pi) int_0^1 cos(tz) phi_K(t) / phi_U(t/h) dt,
/// tabulated once per (bandwidth, error law) and evaluated by trapezoid over
/// the Fourier support.
class DeconvKernel {
 public:
  explicit DeconvKernel(const KernelSpec& spec);
  double operator()(double z) const;

  /// S(x_g) = sum_i v_i K_U((x_g - W_i)/h) for every grid point (v_i = 1 when
  /// `v` is empty). Computed through the empirical Fourier sums, which is the
  /// same trapezoid rule as operator() summed over observations.
  std::vector<double> weighted_sum(std::span<const double> w, std::span<const double> v,
                                   std::span<const double> grid) const;
  double bandwidth() const { return h_; }
  /// True when phi_U fell below 1e-12 (or changed sign) inside the support
  /// and the Fourier integral was cut at the first such frequency.
  bool truncated() const { return truncated_; }

 private:
  double h_;
  bool truncated_ = false;
  std::vector<double> t_;
  std::vector<double> wt_;  // trapezoid weight * phi_K / phi_U
};

/// Curve on a grid with points that could not be estimated masked out.
struct MaskedCurve {
  std::vector<double> values;
  std::vector<bool> masked;
};

/// n^{-1} sum_i K_U((x - W_i)/h) / h on the grid; may be negative.
std::vector<double> deconv_density(std::span<const double> w, const KernelSpec& spec,
                                   std::span<const double> grid);

/// Nadaraya-Watson ratio with the deconvoluting kernel. Points whose
/// denominator is below 1e-6 times the largest denominator are masked.
MaskedCurve deconv_regression(std::span<const double> w, std::span<const double> y,
                              const KernelSpec& spec, std::span<const double> grid);

/// Error-ignoring kernel density estimate with the same base kernel.
std::vector<double> naive_kernel_density(std::span<const double> w, double bandwidth,
                                         std::span<const double> grid);

/// Error-ignoring local-constant regression with the same base kernel.
MaskedCurve naive_kernel_regression(std::span<const double> w, std::span<const double> y,
                                    double bandwidth, std::span<const double> grid);

}  // namespace splinedeconv
