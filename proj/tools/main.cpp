#include <algorithm>
#include <cstdio>
#include <limits>
#include <exception>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "splinedeconv/bspline.hpp"
#include "splinedeconv/deconv_baseline.hpp"
#include "splinedeconv/density_mle.hpp"
#include "splinedeconv/errors.hpp"
#include "splinedeconv/io.hpp"
#include "splinedeconv/semipar_regression.hpp"
#include "splinedeconv/simulation.hpp"

namespace sd = splinedeconv;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kConvergence = 4, kNumerical = 5 };

// Flag values collected as config overrides; applied after the config file.
struct Overrides {
  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;
};

void flag(CLI::App* app, Overrides& o, const std::string& name, const std::string& key,
          const std::string& help) {
  app->add_option_function<std::string>(
      name, [&o, key](const std::string& v) { o.flags[key] = v; }, help);
}

sd::Config resolve(const Overrides& o) {
  sd::Config cfg = o.config_path.empty() ? sd::Config{} : sd::load_config(o.config_path);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw sd::ConfigError("--set expects key=value, got '" + s + "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [k, v] : o.flags) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void require(bool ok, const std::string& key) {
  if (!ok) throw sd::ConfigError("config key '" + key + "' is required");
}

sd::IngestTransform transform_of(const sd::Config& cfg) {
  return sd::IngestTransform(cfg.ingest_lo, cfg.ingest_hi, cfg.ingest_bias.value_or(0.0));
}

// Error law on the [0,1] scale: the raw-scale law shrunk by the range.
sd::ErrorLaw scaled_law(const sd::ErrorLaw& law, const sd::IngestTransform& t) {
  const double s = t.scale();
  switch (law.kind()) {
    case sd::ErrorKind::normal: return sd::ErrorLaw::normal(law.param() / (s * s));
    case sd::ErrorKind::laplace: return sd::ErrorLaw::laplace(law.param() / s);
    case sd::ErrorKind::uniform: return sd::ErrorLaw::uniform(law.param() / s);
  }
  return law;
}

sd::KnotVector knots_for(const sd::Config& cfg, std::size_t n) {
  const int N = cfg.knots ? *cfg.knots : sd::knots_for_sample_size(static_cast<int>(n));
  return sd::KnotVector::uniform(N, cfg.order);
}

void emit_curve(const std::string& path, const sd::CurveTable& original) {
  if (path.empty() || path == "-")
    std::cout << sd::curve_csv(original);
  else
    sd::write_curve_csv(path, original);
}

void emit_json(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    sd::write_text(path, text);
}

void attach_bands(sd::CurveTable& t, const sd::Bands& b) {
  t.band_lo = b.lo;
  t.band_hi = b.hi;
}

int run_estimate_density(const sd::Config& cfg) {
  require(!cfg.input.empty(), "input");
  require(cfg.error.has_value(), "error");
  const auto tr = transform_of(cfg);
  const auto data = sd::ingest(cfg.input, tr);
  const auto law = scaled_law(*cfg.error, tr);
  const auto kv = knots_for(cfg, data.w.size());
  const auto grid = sd::unit_eval_grid(cfg.grid);
  const auto opts = cfg.density_options();

  const sd::DensityFit fit = sd::fit_density(kv, law, data.w, opts);
  if (!fit.converged)
    throw sd::ConvergenceError("density fit did not converge after " +
                               std::to_string(fit.iterations) + " iterations (gradient norm " +
                               sd::format_double(fit.grad_norm) + ")");
  sd::CurveTable t{grid, {}, {}, {}};
  for (double x : grid) t.estimate.push_back(fit.model.eval_fx(x));

  if (cfg.bootstrap_B > 0) {
    const sd::CurveEstimator est = [&](std::span<const double> w, std::span<const double>,
                                       std::span<const double> g) {
      const auto f = sd::fit_density(kv, law, w, opts);
      if (!f.converged) throw sd::ConvergenceError("resample fit did not converge");
      std::vector<double> v;
      for (double x : g) v.push_back(f.model.eval_fx(x));
      return v;
    };
    attach_bands(t, sd::bootstrap_bands(data.w, {}, est, cfg.bootstrap_B, cfg.bootstrap_level,
                                        cfg.seed, grid, cfg.threads));
  }
  if (ends_with(cfg.output, ".json"))
    emit_json(cfg.output, sd::density_fit_json(fit, law, t, tr));
  else
    emit_curve(cfg.output, sd::density_to_original(t, tr));
  return kOk;
}

int run_estimate_regression(const sd::Config& cfg) {
  require(!cfg.input.empty(), "input");
  require(cfg.error.has_value(), "error");
  const auto tr = transform_of(cfg);
  const auto data = sd::ingest(cfg.input, tr);
  if (data.y.empty()) throw sd::DataError(cfg.input + ": missing required column 'y'");
  const auto law = scaled_law(*cfg.error, tr);
  const auto& noise = cfg.noise;
  const auto kv = knots_for(cfg, data.w.size());
  const auto work = cfg.working_density();
  const auto grid = sd::unit_eval_grid(cfg.grid);
  const auto opts = cfg.regression_options();

  const sd::RegressionFit fit = sd::fit_regression(kv, noise, law, work, data.w, data.y, opts);
  if (!fit.converged)
    throw sd::ConvergenceError("regression fit did not converge after " +
                               std::to_string(fit.newton_iters) + " iterations (equation norm " +
                               sd::format_double(fit.eq_norm) + ")");
  sd::CurveTable t{grid, {}, {}, {}};
  for (double x : grid) t.estimate.push_back(fit.model.eval_m(x));

  if (cfg.bootstrap_B > 0) {
    const sd::CurveEstimator est = [&](std::span<const double> w, std::span<const double> y,
                                       std::span<const double> g) {
      const auto f = sd::fit_regression(kv, noise, law, work, w, y, opts);
      if (!f.converged) throw sd::ConvergenceError("resample fit did not converge");
      std::vector<double> v;
      for (double x : g) v.push_back(f.model.eval_m(x));
      return v;
    };
    attach_bands(t, sd::bootstrap_bands(data.w, data.y, est, cfg.bootstrap_B,
                                        cfg.bootstrap_level, cfg.seed, grid, cfg.threads));
  }
  if (ends_with(cfg.output, ".json"))
    emit_json(cfg.output, sd::regression_fit_json(fit, noise, law, cfg.working_L, t, tr));
  else
    emit_curve(cfg.output, sd::regression_to_original(t, tr));
  return kOk;
}

int run_baseline(const sd::Config& cfg) {
  require(!cfg.input.empty(), "input");
  const auto tr = transform_of(cfg);
  const auto data = sd::ingest(cfg.input, tr);
  const auto grid = sd::unit_eval_grid(cfg.grid);
  const std::string& m = cfg.baseline;
  const bool deconv = m.rfind("deconv", 0) == 0;
  const bool regression =
      m == "deconv-reg" || m == "naive-reg" || (m == "naive" && !data.y.empty());
  if (regression && data.y.empty())
    throw sd::DataError(cfg.input + ": missing required column 'y'");
  if (deconv) require(cfg.error.has_value(), "error");

  sd::KernelSpec spec;
  if (deconv) spec.error = scaled_law(*cfg.error, tr);
  if (cfg.bandwidth)
    spec.bandwidth = *cfg.bandwidth;
  else if (cfg.bandwidth_auto)
    spec.bandwidth = sd::data_bandwidth(data.w, spec.error ? &*spec.error : nullptr);

  sd::CurveTable t{grid, {}, {}, {}};
  std::vector<bool> masked;
  bool truncated = false;
  if (!regression) {
    t.estimate = deconv ? sd::deconv_density(data.w, spec, grid)
                        : sd::naive_kernel_density(data.w, spec.bandwidth, grid);
    if (deconv) truncated = sd::DeconvKernel(spec).truncated();
  } else {
    const sd::MaskedCurve c = deconv ? sd::deconv_regression(data.w, data.y, spec, grid)
                                     : sd::naive_kernel_regression(data.w, data.y, spec.bandwidth, grid);
    if (deconv) truncated = sd::DeconvKernel(spec).truncated();
    masked = c.masked;
    t.estimate = c.values;
    for (std::size_t g = 0; g < grid.size(); ++g)
      if (c.masked[g]) t.estimate[g] = std::numeric_limits<double>::quiet_NaN();
  }
  if (truncated)
    std::fprintf(stderr,
                 "warning: error characteristic function below 1e-12 on the kernel support; "
                 "Fourier integral truncated\n");
  const std::string method_name =
      m == "naive" ? (regression ? "naive-reg" : "naive-density") : m;
  if (ends_with(cfg.output, ".json"))
    emit_json(cfg.output,
              sd::baseline_json(method_name, spec.bandwidth, truncated, t, masked, !regression, tr));
  else
    emit_curve(cfg.output, regression ? sd::regression_to_original(t, tr)
                                      : sd::density_to_original(t, tr));
  return kOk;
}

sd::SimDesign design_of(const sd::Config& cfg) {
  sd::SimDesign d;
  d.task = cfg.task;
  d.model = cfg.model;
  d.n = cfg.n;
  d.replicates = cfg.replicates;
  d.seed = cfg.seed;
  d.order = cfg.order;
  d.n_interior = cfg.knots;
  return d;
}

int run_simulate(const sd::Config& cfg, const std::string& replicate_out) {
  const sd::MetricReport r =
      sd::run_table1(design_of(cfg), cfg.method, cfg.estimator_settings(), cfg.threads);
  const std::vector<sd::MetricReport> rows{r};
  emit_json(cfg.output, sd::metric_report_csv(rows));
  if (!replicate_out.empty()) sd::write_text(replicate_out, sd::replicate_csv(r));
  return kOk;
}

int run_rate_curve(const sd::Config& cfg) {
  sd::EstimatorSettings s = cfg.estimator_settings();
  const auto pts = sd::run_rate_curve(cfg.task, cfg.model, cfg.n_list, cfg.replicates, cfg.seed,
                                      s, cfg.threads);
  emit_json(cfg.output, sd::rate_curve_csv(cfg.task, cfg.model, cfg.replicates, cfg.seed, pts));
  return kOk;
}

int run_ingest_check(const sd::Config& cfg) {
  require(!cfg.input.empty(), "input");
  const auto tr = transform_of(cfg);
  const auto data = sd::ingest(cfg.input, tr);
  double lo = 1.0;
  double hi = 0.0;
  for (double w : data.w) {
    lo = std::min(lo, w);
    hi = std::max(hi, w);
  }
  std::printf("rows: %zu\n", data.w.size());
  std::printf("columns:");
  for (const auto& c : data.columns) std::printf(" %s", c.c_str());
  std::printf("\n");
  std::printf("transform: lo=%s hi=%s bias=%s\n", sd::format_double(tr.lo).c_str(),
              sd::format_double(tr.hi).c_str(), sd::format_double(tr.bias).c_str());
  std::printf("scaled w range: [%s, %s]\n", sd::format_double(lo).c_str(),
              sd::format_double(hi).c_str());
  if (data.replicate_columns > 0) std::printf("replicate columns averaged: %d\n", data.replicate_columns);
  if (data.mean_error_var_raw)
    std::printf("averaged error variance: %s (scaled %s)\n",
                sd::format_double(*data.mean_error_var_raw).c_str(),
                sd::format_double(*data.mean_error_var).c_str());
  if (!data.y.empty()) std::printf("y column: present\n");
  return kOk;
}

int run_calibrate(const std::string& path) {
  const auto t = sd::parse_numeric_csv(sd::read_text(path), path);
  if (!t.has("w") || !t.has("w0"))
    throw sd::DataError(path + ": calibration needs columns 'w' and 'w0'");
  std::printf("bias: %s\n", sd::format_double(sd::calibrate_bias(t.column("w"), t.column("w0"))).c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spline-assisted density and regression estimation under measurement error"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config_path, "JSON config file; flags override its values");
  app.add_option("--set", o.sets, "Override any config key: --set key=value");
  flag(&app, o, "--threads", "threads", "Worker threads (0: SPLINEDECONV_THREADS or all cores)");

  auto add_fit_flags = [&](CLI::App* sub) {
    flag(sub, o, "--input", "input", "Input CSV with column w (or w1..wK) and optional y");
    flag(sub, o, "--out", "output", "Output path: .json for the fit object, otherwise curve CSV");
    flag(sub, o, "--error", "error", "Measurement error law, e.g. normal:0.25");
    flag(sub, o, "--order", "order", "Spline order (4 = cubic)");
    flag(sub, o, "--knots", "knots", "Interior knots: auto or a count");
    flag(sub, o, "--grid", "grid", "Evaluation grid points on [0,1]");
    flag(sub, o, "--lo", "ingest.lo", "Rescale range lower end");
    flag(sub, o, "--hi", "ingest.hi", "Rescale range upper end");
    flag(sub, o, "--bias", "ingest.bias", "Instrument bias added before rescaling");
    flag(sub, o, "--bootstrap", "bootstrap.B", "Bootstrap resamples for bands (0: off)");
    flag(sub, o, "--level", "bootstrap.level", "Band level");
    flag(sub, o, "--seed", "seed", "Bootstrap seed");
  };

  auto* dens = app.add_subcommand("estimate-density", "Spline MLE of the density of X");
  add_fit_flags(dens);

  auto* reg = app.add_subcommand("estimate-regression", "Spline semiparametric regression of Y on X");
  add_fit_flags(reg);
  flag(reg, o, "--noise", "noise", "Regression error law (normal only)");
  reg->add_option_function<std::string>(
      "--working",
      [&o](const std::string& v) {
        o.flags["working.L"] = v.rfind("L=", 0) == 0 ? v.substr(2) : v;
      },
      "Working density support size, L=25");
  flag(reg, o, "--scheme", "quad.scheme", "A/H quadrature: plane or per-point");

  auto* base = app.add_subcommand("baseline", "Deconvolution and naive kernel estimators");
  flag(base, o, "--method", "baseline", "deconv-density | deconv-reg | naive");
  flag(base, o, "--bandwidth", "bandwidth", "Kernel bandwidth on the [0,1] scale, or auto for the reference rule (default 0.05)");
  flag(base, o, "--input", "input", "Input CSV");
  flag(base, o, "--out", "output", "Output path (.json or curve CSV)");
  flag(base, o, "--error", "error", "Measurement error law");
  flag(base, o, "--grid", "grid", "Evaluation grid points");
  flag(base, o, "--lo", "ingest.lo", "Rescale range lower end");
  flag(base, o, "--hi", "ingest.hi", "Rescale range upper end");
  flag(base, o, "--bias", "ingest.bias", "Instrument bias added before rescaling");

  std::string replicate_out;
  auto* sim = app.add_subcommand("simulate", "Mean sup-norm error for one simulation cell");
  flag(sim, o, "--task", "task", "density | regression");
  flag(sim, o, "--model", "model", "I.a | I.b | I.c | II.a | II.b | II.c");
  flag(sim, o, "--n", "n", "Sample size");
  flag(sim, o, "--replicates", "replicates", "Replicates");
  flag(sim, o, "--seed", "seed", "Seed");
  flag(sim, o, "--method", "method", "bspline | deconv");
  flag(sim, o, "--knots", "knots", "Interior knots: auto or a count");
  flag(sim, o, "--bandwidth", "bandwidth", "Deconvolution bandwidth: auto or a value");
  flag(sim, o, "--out", "output", "Output CSV (default stdout)");
  sim->add_option("--replicate-out", replicate_out, "Per-replicate CSV");

  auto* rate = app.add_subcommand("rate-curve", "sqrt(n h_b) scaled error across sample sizes");
  flag(rate, o, "--task", "task", "density | regression");
  flag(rate, o, "--model", "model", "Error model");
  flag(rate, o, "--n-list", "n_list", "Increasing sample sizes, comma separated");
  flag(rate, o, "--replicates", "replicates", "Replicates per sample size");
  flag(rate, o, "--seed", "seed", "Seed");
  flag(rate, o, "--out", "output", "Output CSV (default stdout)");

  auto* boot = app.add_subcommand("bootstrap", "Spline estimate with pointwise bootstrap bands");
  add_fit_flags(boot);
  flag(boot, o, "--task", "task", "density | regression");
  flag(boot, o, "--noise", "noise", "Regression error law");
  flag(boot, o, "--B", "bootstrap.B", "Bootstrap resamples");

  auto* check = app.add_subcommand("ingest-check", "Validate an input file and report the transform");
  flag(check, o, "--input", "input", "Input CSV");
  flag(check, o, "--lo", "ingest.lo", "Rescale range lower end");
  flag(check, o, "--hi", "ingest.hi", "Rescale range upper end");
  flag(check, o, "--bias", "ingest.bias", "Instrument bias added before rescaling");
  bool calibrate = false;
  check->add_flag("--calibrate", calibrate, "Print mean(w0) - mean(w) from columns w and w0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    sd::Config cfg = resolve(o);
    if (*dens) return run_estimate_density(cfg);
    if (*reg) return run_estimate_regression(cfg);
    if (*base) return run_baseline(cfg);
    if (*sim) return run_simulate(cfg, replicate_out);
    if (*rate) return run_rate_curve(cfg);
    if (*boot) {
      if (cfg.bootstrap_B == 0) cfg.bootstrap_B = 100;
      return cfg.task == sd::Task::density ? run_estimate_density(cfg)
                                           : run_estimate_regression(cfg);
    }
    if (*check) return calibrate ? run_calibrate(cfg.input) : run_ingest_check(cfg);
  } catch (const sd::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const sd::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const sd::ConvergenceError& e) {
    std::fprintf(stderr, "fit did not converge: %s\n", e.what());
    return kConvergence;
  } catch (const sd::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kNumerical;
  }
  return kOk;
}
