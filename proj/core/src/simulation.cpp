#include "splinedeconv/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "splinedeconv/deconv_baseline.hpp"
#include "splinedeconv/errors.hpp"
#include "splinedeconv/parallel.hpp"
#include "splinedeconv/random_variates.hpp"

namespace splinedeconv {

Task parse_task(std::string_view s) {
  if (s == "density") return Task::density;
  if (s == "regression") return Task::regression;
  throw ConfigError("unknown task '" + std::string(s) + "' (expected density or regression)");
}

ErrorModel parse_error_model(std::string_view s) {
  if (s == "I.a") return ErrorModel::Ia;
  if (s == "I.b") return ErrorModel::Ib;
  if (s == "I.c") return ErrorModel::Ic;
  if (s == "II.a") return ErrorModel::IIa;
  if (s == "II.b") return ErrorModel::IIb;
  if (s == "II.c") return ErrorModel::IIc;
  throw ConfigError("unknown model '" + std::string(s) + "' (expected I.a ... II.c)");
}

Method parse_method(std::string_view s) {
  if (s == "bspline") return Method::bspline;
  if (s == "deconv") return Method::deconv;
  throw ConfigError("unknown method '" + std::string(s) + "' (expected bspline or deconv)");
}

std::string to_string(Task t) { return t == Task::density ? "density" : "regression"; }

std::string to_string(ErrorModel m) {
  switch (m) {
    case ErrorModel::Ia: return "I.a";
    case ErrorModel::Ib: return "I.b";
    case ErrorModel::Ic: return "I.c";
    case ErrorModel::IIa: return "II.a";
    case ErrorModel::IIb: return "II.b";
    case ErrorModel::IIc: return "II.c";
  }
  return "?";
}

std::string to_string(Method m) { return m == Method::bspline ? "bspline" : "deconv"; }

ErrorLaw error_law_for(ErrorModel m) {
  switch (m) {
    case ErrorModel::Ia: return ErrorLaw::normal(0.25);
    case ErrorModel::Ib: return ErrorLaw::laplace(0.5 / std::numbers::sqrt2);
    case ErrorModel::Ic: return ErrorLaw::uniform(std::sqrt(0.75));
    case ErrorModel::IIa: return ErrorLaw::normal(0.0025);
    case ErrorModel::IIb: return ErrorLaw::laplace(0.05 / std::numbers::sqrt2);
    case ErrorModel::IIc: return ErrorLaw::uniform(0.125);
  }
  throw ConfigError("unknown error model");
}

NoiseLaw regression_noise() { return NoiseLaw::normal(0.25); }

double beta_density(double a, double x) {
  if (x < 0.0 || x > 1.0) return 0.0;
  const double log_b = 2.0 * std::lgamma(a) - std::lgamma(2.0 * a);
  if (x == 0.0 || x == 1.0) return a > 1.0 ? 0.0 : (a == 1.0 ? 1.0 : INFINITY);
  return std::exp((a - 1.0) * (std::log(x) + std::log1p(-x)) - log_b);
}

double true_curve(Task task, double x) {
  return task == Task::density ? beta_density(4.0, x) : std::sin(2.0 * std::numbers::pi * x);
}

int SimDesign::interior_knots() const { return n_interior ? *n_interior : knots_for_sample_size(n); }

Dataset generate_with_mean(const SimDesign& design, int replicate,
                           const std::function<double(double)>& mean) {
  if (design.n < 1) throw ConfigError("simulation n must be >= 1");
  const auto n = static_cast<std::size_t>(design.n);
  const auto rep = static_cast<std::uint64_t>(replicate);
  Dataset d;
  Rng rx = make_stream(design.seed, rep, StreamRole::x);
  Rng ru = make_stream(design.seed, rep, StreamRole::u);
  d.x.resize(n);
  const double shape = design.x_shape();
  for (auto& v : d.x) v = beta_variate(rx, shape, shape);
  d.u = sample(error_law_for(design.model), ru, n);
  d.w.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.w[i] = d.x[i] + d.u[i];
  if (design.task == Task::regression) {
    Rng re = make_stream(design.seed, rep, StreamRole::eps);
    d.eps = sample(regression_noise(), re, n);
    d.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.y[i] = mean(d.x[i]) + d.eps[i];
  }
  return d;
}

Dataset generate(const SimDesign& design, int replicate) {
  return generate_with_mean(design, replicate,
                            [](double x) { return std::sin(2.0 * std::numbers::pi * x); });
}

std::vector<double> unit_eval_grid(int points) {
  if (points < 2) throw ConfigError("grid must have at least 2 points");
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    g[static_cast<std::size_t>(i)] = i == points - 1 ? 1.0 : static_cast<double>(i) / (points - 1);
  return g;
}

double reference_bandwidth(double sd, int n) {
  // R(K) = (1/pi) int_0^1 (1 - t^2)^6 dt = 1024 / (3003 pi); mu_2 = -phi_K''(0) = 6.
  const double rk = 1024.0 / (3003.0 * std::numbers::pi);
  const double mu2 = 6.0;
  return sd * std::pow(8.0 * std::sqrt(std::numbers::pi) * rk / (3.0 * mu2 * mu2 * n), 0.2);
}

namespace {

double sample_variance(std::span<const double> v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

double deconv_bandwidth(const EstimatorSettings& settings, const Dataset& d, const ErrorLaw& law) {
  if (settings.bandwidth) return *settings.bandwidth;
  return data_bandwidth(d.w, &law);
}

}  // namespace

double data_bandwidth(std::span<const double> w, const ErrorLaw* law) {
  if (w.size() < 2) throw DataError("data_bandwidth: fewer than two observations");
  const double vw = sample_variance(w);
  const double vx = law ? std::max(vw - law->variance(), 0.1 * vw) : vw;
  double h = reference_bandwidth(std::sqrt(vx), static_cast<int>(w.size()));
  if (law && law->kind() == ErrorKind::uniform)
    h = std::max(h, 1.2 * law->param() / std::numbers::pi);
  return h;
}

double replicate_sup_mae(const SimDesign& design, Method method, const EstimatorSettings& settings,
                         int replicate) {
  const Dataset d = generate(design, replicate);
  const ErrorLaw law = error_law_for(design.model);
  const auto grid = unit_eval_grid(settings.grid_points);
  std::vector<double> est(grid.size());

  if (method == Method::bspline) {
    const KnotVector kv = KnotVector::uniform(design.interior_knots(), design.order);
    if (design.task == Task::density) {
      const DensityFit fit = fit_density(kv, law, d.w, settings.density);
      if (!fit.converged)
        throw ConvergenceError("density fit did not converge (gradient norm " +
                               std::to_string(fit.grad_norm) + ")");
      for (std::size_t g = 0; g < grid.size(); ++g) est[g] = fit.model.eval_fx(grid[g]);
    } else {
      const RegressionFit fit =
          fit_regression(kv, regression_noise(), law, WorkingDensity::uniform(settings.working_L),
                         d.w, d.y, settings.regression);
      if (!fit.converged)
        throw ConvergenceError("regression fit did not converge (equation norm " +
                               std::to_string(fit.eq_norm) + ")");
      for (std::size_t g = 0; g < grid.size(); ++g) est[g] = fit.model.eval_m(grid[g]);
    }
  } else {
    KernelSpec spec;
    spec.bandwidth = deconv_bandwidth(settings, d, law);
    spec.error = law;
    if (design.task == Task::density) {
      est = deconv_density(d.w, spec, grid);
    } else {
      const MaskedCurve c = deconv_regression(d.w, d.y, spec, grid);
      double sup = 0.0;
      bool any = false;
      for (std::size_t g = 0; g < grid.size(); ++g) {
        if (c.masked[g]) continue;
        any = true;
        sup = std::max(sup, std::abs(c.values[g] - true_curve(design.task, grid[g])));
      }
      if (!any) throw NumericalError("deconvolution regression masked every grid point");
      return sup;
    }
  }

  double sup = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g)
    sup = std::max(sup, std::abs(est[g] - true_curve(design.task, grid[g])));
  return sup;
}

MetricReport run_replicates(const SimDesign& design, Method method,
                            const EstimatorSettings& settings, int threads) {
  if (design.replicates < 0) throw ConfigError("replicates must be >= 0");
  MetricReport rep;
  rep.design = design;
  rep.method = method;
  rep.n_interior = design.interior_knots();
  rep.h_b = KnotVector::uniform(rep.n_interior, design.order).max_spacing();
  rep.grid_points = settings.grid_points;
  rep.replicates.resize(static_cast<std::size_t>(design.replicates));

  parallel_for(
      rep.replicates.size(),
      [&](std::size_t r) {
        ReplicateResult& out = rep.replicates[r];
        out.replicate = static_cast<int>(r);
        try {
          out.sup_mae = replicate_sup_mae(design, method, settings, static_cast<int>(r));
          out.ok = std::isfinite(out.sup_mae);
          if (!out.ok) out.note = "non-finite error";
        } catch (const std::exception& e) {
          out.ok = false;
          out.note = e.what();
        }
      },
      threads);

  std::vector<double> ok;
  for (const auto& r : rep.replicates) {
    if (r.ok)
      ok.push_back(r.sup_mae);
    else
      ++rep.failures;
  }
  if (!ok.empty()) {
    rep.mean_mae = std::accumulate(ok.begin(), ok.end(), 0.0) / static_cast<double>(ok.size());
    rep.mc_se = ok.size() > 1 ? std::sqrt(sample_variance(ok) / static_cast<double>(ok.size())) : 0.0;
  }
  const double scale = std::sqrt(design.n * rep.h_b);
  rep.scaled_mean_mae = scale * rep.mean_mae;
  rep.scaled_mc_se = scale * rep.mc_se;
  return rep;
}

MetricReport run_table1(const SimDesign& design, Method method, const EstimatorSettings& settings,
                        int threads) {
  MetricReport rep = run_replicates(design, method, settings, threads);
  if (rep.failures > 0.05 * design.replicates)
    throw ConvergenceError(std::to_string(rep.failures) + " of " +
                           std::to_string(design.replicates) + " replicates failed for " +
                           to_string(design.task) + " " + to_string(design.model) + " n=" +
                           std::to_string(design.n));
  return rep;
}

std::vector<RatePoint> run_rate_curve(Task task, ErrorModel model, std::span<const int> n_list,
                                      int replicates, std::uint64_t seed,
                                      const EstimatorSettings& settings, int threads) {
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (!(n_list[i - 1] < n_list[i])) throw ConfigError("rate curve: n values must increase");
  std::vector<RatePoint> out;
  for (int n : n_list) {
    SimDesign d;
    d.task = task;
    d.model = model;
    d.n = n;
    d.replicates = replicates;
    d.seed = seed;
    const MetricReport r = run_table1(d, Method::bspline, settings, threads);
    out.push_back({n, r.n_interior, r.h_b, r.mean_mae, r.mc_se, r.scaled_mean_mae, r.scaled_mc_se});
  }
  return out;
}

double empirical_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ConfigError("empirical_quantile: no values");
  const auto m = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(p * m - 1e-12));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

Bands bootstrap_bands(std::span<const double> w, std::span<const double> y,
                      const CurveEstimator& estimator, int B, double level, std::uint64_t seed,
                      std::span<const double> grid, int threads) {
  if (B < 2) throw ConfigError("bootstrap.B must be >= 2");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap.level must lie in (0,1)");
  if (w.empty()) throw DataError("bootstrap: no observations");
  if (!y.empty() && y.size() != w.size()) throw DataError("bootstrap: w and y differ in length");

  Bands bands;
  bands.grid.assign(grid.begin(), grid.end());
  bands.level = level;
  bands.resamples = B;
  bands.estimate = estimator(w, y, grid);

  std::vector<std::vector<double>> curves(static_cast<std::size_t>(B));
  std::vector<char> ok(static_cast<std::size_t>(B), 0);
  const std::size_t n = w.size();
  parallel_for(
      static_cast<std::size_t>(B),
      [&](std::size_t b) {
        Rng rng = make_stream(seed, b, StreamRole::bootstrap);
        std::vector<double> wb(n);
        std::vector<double> yb(y.empty() ? 0 : n);
        for (std::size_t i = 0; i < n; ++i) {
          const auto idx = static_cast<std::size_t>(rng() % n);
          wb[i] = w[idx];
          if (!y.empty()) yb[i] = y[idx];
        }
        try {
          auto c = estimator(wb, yb, grid);
          if (c.size() == grid.size() &&
              std::all_of(c.begin(), c.end(), [](double v) { return std::isfinite(v); })) {
            curves[b] = std::move(c);
            ok[b] = 1;
          }
        } catch (const std::exception&) {
          // counted below
        }
      },
      threads);

  bands.failures = static_cast<int>(std::count(ok.begin(), ok.end(), 0));
  if (bands.failures > 0.1 * B)
    throw ConvergenceError("bootstrap: " + std::to_string(bands.failures) + " of " +
                           std::to_string(B) + " resample fits failed");

  bands.lo.resize(grid.size());
  bands.hi.resize(grid.size());
  std::vector<double> col;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    col.clear();
    for (std::size_t b = 0; b < curves.size(); ++b)
      if (ok[b]) col.push_back(curves[b][g]);
    std::sort(col.begin(), col.end());
    bands.lo[g] = empirical_quantile(col, 0.5 * (1.0 - level));
    bands.hi[g] = empirical_quantile(col, 0.5 * (1.0 + level));
  }
  return bands;
}

}  // namespace splinedeconv
