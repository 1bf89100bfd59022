#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splinedeconv/deconv_baseline.hpp"
#include "splinedeconv/density_mle.hpp"
#include "splinedeconv/error_laws.hpp"
#include "splinedeconv/semipar_regression.hpp"
#include "splinedeconv/simulation.hpp"

namespace splinedeconv {

inline constexpr int kSchemaVersion = 1;

/// Run configuration. Keys are dotted names ("quad.plane_points"); a JSON
/// file may spell them flat or as nested objects.
struct Config {
  std::string input;
  std::string output;
  std::optional<ErrorLaw> error;
  NoiseLaw noise = NoiseLaw::normal(0.25);
  int order = 4;
  std::optional<int> knots;  // empty: knots_for_sample_size(n)
  int grid = 201;

  int quad_nodes_per_panel = 10;
  int quad_plane_points = 61;
  double quad_tail_sigmas = 4.0;
  AHScheme quad_scheme = AHScheme::per_point;
  int quad_point_nodes = 24;
  double quad_point_tail_sigmas = 6.0;

  int working_L = 25;
  std::string working_kind = "uniform";

  double density_tol = 1e-8;
  int density_max_iter = 500;
  double regression_tol = 1e-7;
  int regression_max_iter = 100;

  Task task = Task::density;
  ErrorModel model = ErrorModel::IIa;
  Method method = Method::bspline;
  int n = 500;
  std::vector<int> n_list{500, 1000, 2000};
  int replicates = 200;
  std::uint64_t seed = 7;
  int threads = 0;  // 0: SPLINEDECONV_THREADS or hardware concurrency

  std::string baseline = "deconv-density";
  std::optional<double> bandwidth;
  bool bandwidth_auto = false;  // "auto" given explicitly: reference rule

  int bootstrap_B = 0;  // 0 disables bands
  double bootstrap_level = 0.95;

  double ingest_lo = 0.0;
  double ingest_hi = 1.0;
  std::optional<double> ingest_bias;

  /// Sets one key from its text form. Throws ConfigError naming the key on
  /// unknown keys or invalid values.
  void set(std::string_view key, std::string_view value);
  /// Cross-field checks; throws ConfigError.
  void validate() const;

  DensityFitOptions density_options() const;
  RegressionFitOptions regression_options() const;
  EstimatorSettings estimator_settings() const;
  WorkingDensity working_density() const;
};

/// Every key accepted by Config::set.
const std::vector<std::string>& config_keys();

/// Reads a JSON config file. Nested objects are flattened to dotted keys.
Config load_config(const std::string& path);
/// Applies a JSON document given as text on top of `cfg`.
void apply_config_json(Config& cfg, std::string_view json_text);

/// Affine map of raw measurements onto [0,1]: (w + bias - lo) / (hi - lo).
struct IngestTransform {
  double lo = 0.0;
  double hi = 1.0;
  double bias = 0.0;

  IngestTransform() = default;
  IngestTransform(double lo_, double hi_, double bias_ = 0.0);
  double forward(double w) const { return (w + bias - lo) / (hi - lo); }
  /// Grid point on [0,1] back to the (bias-corrected) original scale.
  double inverse(double x) const { return lo + x * (hi - lo); }
  double scale() const { return hi - lo; }
};

/// Headered CSV of numbers, stored by column, with the file line of each row.
struct NumericTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> values;
  std::vector<std::size_t> lines;
  /// Column by name; throws DataError when absent.
  const std::vector<double>& column(const std::string& name) const;
  bool has(const std::string& name) const;
};

/// Parses a headered CSV of finite numbers. Throws DataError naming the line
/// and column of any bad cell.
NumericTable parse_numeric_csv(std::string_view text, const std::string& origin = "<input>");

struct IngestedData {
  std::vector<double> w;  // on [0,1]
  std::vector<double> y;  // empty when the file has no y column
  IngestTransform transform;
  int replicate_columns = 0;            // K when w1..wK were averaged
  std::optional<double> mean_error_var;  // var of averaged error, [0,1] scale
  std::optional<double> mean_error_var_raw;  // same on the original scale
  std::vector<std::string> columns;
};

/// Reads a headered CSV with column `w` or replicate columns w1..wK
/// (averaged), optional `y` and optional reference column `w0`. With
/// replicates and w0 present, the variance of the averaged error is estimated
/// as var(w0 - w) / (K + 1). Throws DataError with line numbers.
IngestedData ingest(const std::string& path, const IngestTransform& transform);
IngestedData ingest_text(std::string_view text, const IngestTransform& transform,
                         const std::string& origin = "<input>");

/// mean(w0) - mean(w).
double calibrate_bias(std::span<const double> w, std::span<const double> w0);

/// var(w0 - w) / (K + 1) with the n - 1 sample variance.
double averaged_error_variance(std::span<const double> w, std::span<const double> w0, int K);

/// Seventeen significant digits ("%.17g"); reads back bitwise.
std::string format_double(double v);

struct CurveTable {
  std::vector<double> x;
  std::vector<double> estimate;
  std::vector<double> band_lo;  // empty: no bands
  std::vector<double> band_hi;
};

std::string curve_csv(const CurveTable& t);
void write_curve_csv(const std::string& path, const CurveTable& t);
CurveTable read_curve_csv(const std::string& path);
CurveTable parse_curve_csv(std::string_view text, const std::string& origin = "<input>");

/// Density values on the original scale: x mapped affinely, values divided
/// by hi - lo.
CurveTable density_to_original(const CurveTable& scaled, const IngestTransform& t);
/// Regression values on the original scale: only x is mapped.
CurveTable regression_to_original(const CurveTable& scaled, const IngestTransform& t);

std::string density_fit_json(const DensityFit& fit, const ErrorLaw& law, const CurveTable& scaled,
                             const IngestTransform& t);
std::string regression_fit_json(const RegressionFit& fit, const NoiseLaw& noise,
                                const ErrorLaw& law, int working_L, const CurveTable& scaled,
                                const IngestTransform& t);
std::string baseline_json(const std::string& method, double bandwidth, bool truncated,
                          const CurveTable& scaled, const std::vector<bool>& masked,
                          bool density, const IngestTransform& t);

std::string metric_report_csv(std::span<const MetricReport> reports);
std::string replicate_csv(const MetricReport& report);
std::string rate_curve_csv(Task task, ErrorModel model, int replicates, std::uint64_t seed,
                           std::span<const RatePoint> points);

void write_text(const std::string& path, std::string_view text);
std::string read_text(const std::string& path);

}  // namespace splinedeconv
