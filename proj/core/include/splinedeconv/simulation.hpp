#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splinedeconv/density_mle.hpp"
#include "splinedeconv/error_laws.hpp"
#include "splinedeconv/semipar_regression.hpp"

namespace splinedeconv {

enum class Task { density, regression };
enum class ErrorModel { Ia, Ib, Ic, IIa, IIb, IIc };
enum class Method { bspline, deconv };

Task parse_task(std::string_view s);
ErrorModel parse_error_model(std::string_view s);  // "I.a" ... "II.c"
Method parse_method(std::string_view s);
std::string to_string(Task t);
std::string to_string(ErrorModel m);
std::string to_string(Method m);

/// Measurement-error law of a simulation model. Model I laws have variance
/// 0.25 and model II laws are the reduced-variance versions.
ErrorLaw error_law_for(ErrorModel m);

/// Regression noise used by every regression design: N(0, 0.25).
NoiseLaw regression_noise();

/// True curve of a design on [0,1]: the Beta(4,4) density for the density
/// task, sin(2 pi x) for the regression task.
double true_curve(Task task, double x);

/// Beta(a, a) density.
double beta_density(double a, double x);

struct SimDesign {
  Task task = Task::density;
  ErrorModel model = ErrorModel::IIa;
  int n = 500;
  int replicates = 200;
  std::uint64_t seed = 7;
  int order = 4;
  std::optional<int> n_interior;  // empty: knots_for_sample_size(n)

  /// Shape of the symmetric Beta law of X: 4 for density, 2 for regression.
  double x_shape() const { return task == Task::density ? 4.0 : 2.0; }
  int interior_knots() const;
};

struct Dataset {
  std::vector<double> x;
  std::vector<double> u;
  std::vector<double> w;
  std::vector<double> eps;  // empty for the density task
  std::vector<double> y;    // empty for the density task
};

/// Dataset for one replicate; a pure function of (design, replicate).
Dataset generate(const SimDesign& design, int replicate);

/// Same as generate() but with a custom mean function for Y.
Dataset generate_with_mean(const SimDesign& design, int replicate,
                           const std::function<double(double)>& mean);

/// Evaluation grid of `points` equally spaced values on [0,1] including both ends.
std::vector<double> unit_eval_grid(int points = 201);

/// Normal-reference bandwidth for the (1 - t^2)^3 kernel: the AMISE rule for
/// a normal density with standard deviation sd, sd * (8 sqrt(pi) R(K) /
/// (3 mu_2^2 n))^{1/5}.
double reference_bandwidth(double sd, int n);

/// Reference bandwidth from data: sd^2 = max(var W - var U, 0.1 var W), or
/// var W without an error law. For uniform errors the result is at least
/// 1.2 c / pi so that phi_U(t/h) stays away from its first zero on [0, 1].
double data_bandwidth(std::span<const double> w, const ErrorLaw* law);

struct EstimatorSettings {
  DensityFitOptions density;
  RegressionFitOptions regression;
  int working_L = 25;
  std::optional<double> bandwidth;  // deconvolution; empty: reference rule
  int grid_points = 201;
};

struct ReplicateResult {
  int replicate = 0;
  double sup_mae = 0.0;
  bool ok = false;
  std::string note;
};

struct MetricReport {
  SimDesign design;
  Method method = Method::bspline;
  int n_interior = 0;
  double h_b = 0.0;
  int grid_points = 201;
  std::vector<ReplicateResult> replicates;
  int failures = 0;
  double mean_mae = 0.0;
  double mc_se = 0.0;
  double scaled_mean_mae = 0.0;  // sqrt(n h_b) * mean_mae
  double scaled_mc_se = 0.0;
};

/// Sup-norm error of one replicate (no failure handling).
double replicate_sup_mae(const SimDesign& design, Method method, const EstimatorSettings& settings,
                         int replicate);

/// All replicates of a cell with failures recorded; the mean and SE cover
/// the successful ones. Never fails on the failure count.
MetricReport run_replicates(const SimDesign& design, Method method,
                            const EstimatorSettings& settings = {}, int threads = 0);

/// Mean sup-norm error over design.replicates seeded replicates. Failed
/// replicates are recorded and excluded from the mean; more than 5% failures
/// raises ConvergenceError.
MetricReport run_table1(const SimDesign& design, Method method,
                        const EstimatorSettings& settings = {}, int threads = 0);

struct RatePoint {
  int n = 0;
  int n_interior = 0;
  double h_b = 0.0;
  double mean_mae = 0.0;
  double mc_se = 0.0;
  double scaled_mae = 0.0;
  double scaled_se = 0.0;
};

/// sqrt(n h_b(n)) * mean sup-MAE for each n with the default knot rule.
std::vector<RatePoint> run_rate_curve(Task task, ErrorModel model, std::span<const int> n_list,
                                      int replicates, std::uint64_t seed,
                                      const EstimatorSettings& settings = {}, int threads = 0);

/// Curve estimator used by the bootstrap: maps (w, y) to values on the grid;
/// y is empty for density estimators. Throws on failure.
using CurveEstimator = std::function<std::vector<double>(
    std::span<const double> w, std::span<const double> y, std::span<const double> grid)>;

struct Bands {
  std::vector<double> grid;
  std::vector<double> estimate;
  std::vector<double> lo;
  std::vector<double> hi;
  int resamples = 0;
  int failures = 0;
  double level = 0.0;
};

/// Pointwise bootstrap bands from B resamples of the observations (pairs
/// when y is given). Bounds are the type-1 empirical quantiles at
/// (1 - level)/2 and (1 + level)/2. More than 10% failed resamples raises
/// ConvergenceError.
Bands bootstrap_bands(std::span<const double> w, std::span<const double> y,
                      const CurveEstimator& estimator, int B, double level, std::uint64_t seed,
                      std::span<const double> grid, int threads = 0);

/// Type-1 empirical quantile (inverse of the empirical CDF) of sorted values.
double empirical_quantile(std::span<const double> sorted, double p);

}  // namespace splinedeconv
