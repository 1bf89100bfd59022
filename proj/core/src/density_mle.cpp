#include "splinedeconv/density_mle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "splinedeconv/errors.hpp"

namespace splinedeconv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double eta_at(const KnotVector& kv, const Eigen::VectorXd& theta, double x) {
  double local[32];
  const int first = eval_basis_nonzero(kv, x, std::span<double>(local, 32));
  double eta = 0.0;
  for (int a = 0; a < kv.order(); ++a) eta += local[a] * theta[first + a];
  return eta;
}

void check_theta(const KnotVector& kv, const Eigen::VectorXd& theta) {
  if (theta.size() != kv.basis_dim())
    throw ConfigError("theta has length " + std::to_string(theta.size()) + ", expected " +
                      std::to_string(kv.basis_dim()));
  if (!theta.allFinite()) throw NumericalError("theta has non-finite entries");
}

}  // namespace

double log_partition(const KnotVector& kv, const Eigen::VectorXd& theta, const UnitGrid& grid) {
  check_theta(kv, theta);
  std::vector<double> eta(grid.nodes.size());
  double mx = kNegInf;
  for (std::size_t g = 0; g < grid.nodes.size(); ++g) {
    eta[g] = eta_at(kv, theta, grid.nodes[g]);
    mx = std::max(mx, eta[g]);
  }
  double s = 0.0;
  for (std::size_t g = 0; g < grid.nodes.size(); ++g) s += grid.weights[g] * std::exp(eta[g] - mx);
  return mx + std::log(s);
}

double eval_fx(const KnotVector& kv, const Eigen::VectorXd& theta, double x, int nodes_per_panel) {
  if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("eval_fx: x outside [0,1]");
  const double lz = log_partition(kv, theta, unit_grid(kv, nodes_per_panel));
  return std::exp(eta_at(kv, theta, x) - lz);
}

std::vector<double> observation_breakpoints(const KnotVector& kv, const ErrorLaw& law, double w) {
  std::vector<double> b = kv.breakpoints();
  for (double k : law.kinks(w)) b.push_back(k);
  const double sd = law.stddev();
  switch (law.kind()) {
    case ErrorKind::normal:
      for (double m : {-4.0, -2.0, 0.0, 2.0, 4.0}) b.push_back(w + m * sd);
      break;
    case ErrorKind::laplace:
      for (double m : {-6.0, -3.0, 3.0, 6.0}) b.push_back(w + m * law.param());
      break;
    case ErrorKind::uniform:
      break;
  }
  std::erase_if(b, [](double v) { return !(v >= 0.0 && v <= 1.0); });
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end(), [](double a, double c) { return c - a < 1e-13; }),
          b.end());
  if (b.front() != 0.0) b.insert(b.begin(), 0.0);
  if (b.back() != 1.0) b.push_back(1.0);
  return b;
}

// ---------------------------------------------------------------------------
// DensityModel

DensityModel::DensityModel(KnotVector kv, Eigen::VectorXd theta, int nodes_per_panel)
    : kv_(std::move(kv)), theta_(std::move(theta)), nodes_per_panel_(nodes_per_panel) {
  check_theta(kv_, theta_);
  if (theta_[0] != 0.0) throw ConfigError("DensityModel: theta[0] must be pinned at 0");
  log_norm_ = log_partition(kv_, theta_, unit_grid(kv_, nodes_per_panel_));
}

DensityModel DensityModel::uniform(KnotVector kv, int nodes_per_panel) {
  const int d = kv.basis_dim();
  return DensityModel(std::move(kv), Eigen::VectorXd::Zero(d), nodes_per_panel);
}

DensityModel DensityModel::from_unpinned(KnotVector kv, const Eigen::VectorXd& theta,
                                         int nodes_per_panel) {
  check_theta(kv, theta);
  Eigen::VectorXd t = theta.array() - theta[0];
  t[0] = 0.0;
  return DensityModel(std::move(kv), std::move(t), nodes_per_panel);
}

double DensityModel::eval_fx(double x) const {
  if (!(x >= 0.0 && x <= 1.0))
    throw ConfigError("eval_fx: x = " + std::to_string(x) + " outside [0,1]");
  return std::exp(eta_at(kv_, theta_, x) - log_norm_);
}

double DensityModel::eval_fw(const ErrorLaw& law, double w) const {
  const auto b = observation_breakpoints(kv_, law, w);
  const UnitGrid grid = composite_gauss(b, nodes_per_panel_);
  double mx = kNegInf;
  std::vector<double> z(grid.nodes.size());
  for (std::size_t g = 0; g < grid.nodes.size(); ++g) {
    z[g] = eta_at(kv_, theta_, grid.nodes[g]) + law.log_density(w - grid.nodes[g]) +
           std::log(grid.weights[g]);
    mx = std::max(mx, z[g]);
  }
  if (mx == kNegInf) return 0.0;
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  return std::exp(mx + std::log(s) - log_partition(kv_, theta_, grid));
}

// ---------------------------------------------------------------------------
// DensityLikelihood

DensityLikelihood::DensityLikelihood(KnotVector kv, ErrorLaw law, std::span<const double> w_data,
                                     int nodes_per_panel)
    : kv_(std::move(kv)), law_(law), n_(static_cast<int>(w_data.size())) {
  if (w_data.empty()) throw DataError("density likelihood: no observations");
  const int r = kv_.order();
  double local[32];

  auto push_node = [&](NodeSet& set, double x, double log_wt) {
    const int first = eval_basis_nonzero(kv_, x, std::span<double>(local, 32));
    set.first.push_back(first);
    set.basis.insert(set.basis.end(), local, local + r);
    set.log_wt.push_back(log_wt);
  };

  obs_offsets_.reserve(w_data.size() + 1);
  obs_offsets_.push_back(0);
  norm_offsets_.reserve(w_data.size() + 1);
  norm_offsets_.push_back(0);
  for (std::size_t i = 0; i < w_data.size(); ++i) {
    const double w = w_data[i];
    if (!std::isfinite(w)) throw DataError("observation " + std::to_string(i) + " is not finite");
    const auto b = observation_breakpoints(kv_, law_, w);
    const UnitGrid grid = composite_gauss(b, nodes_per_panel);
    std::size_t kept = 0;
    for (std::size_t g = 0; g < grid.nodes.size(); ++g) {
      const double lk = law_.log_density(w - grid.nodes[g]);
      if (lk == kNegInf) continue;
      push_node(obs_nodes_, grid.nodes[g], lk + std::log(grid.weights[g]));
      ++kept;
    }
    if (kept == 0)
      throw DataError("observation " + std::to_string(i) + " (w = " + std::to_string(w) +
                      ") has zero likelihood under " + law_.to_string());
    obs_offsets_.push_back(obs_nodes_.first.size());
    for (std::size_t g = 0; g < grid.nodes.size(); ++g)
      push_node(norm_nodes_, grid.nodes[g], std::log(grid.weights[g]));
    norm_offsets_.push_back(norm_nodes_.first.size());
  }
}

double DensityLikelihood::accumulate(const NodeSet& nodes, std::size_t begin, std::size_t end,
                                     const Eigen::VectorXd& theta, Eigen::VectorXd* mean,
                                     Eigen::MatrixXd* second) const {
  const int r = kv_.order();
  thread_local std::vector<double> z;
  z.resize(end - begin);
  double mx = kNegInf;
  for (std::size_t g = begin; g < end; ++g) {
    const double* v = &nodes.basis[g * static_cast<std::size_t>(r)];
    const int first = nodes.first[g];
    double eta = 0.0;
    for (int a = 0; a < r; ++a) eta += v[a] * theta[first + a];
    const double zz = eta + nodes.log_wt[g];
    z[g - begin] = zz;
    mx = std::max(mx, zz);
  }
  double s0 = 0.0;
  if (mean) mean->setZero();
  if (second) second->setZero();
  for (std::size_t g = begin; g < end; ++g) {
    const double e = std::exp(z[g - begin] - mx);
    s0 += e;
    if (!mean) continue;
    const double* v = &nodes.basis[g * static_cast<std::size_t>(r)];
    const int first = nodes.first[g];
    for (int a = 0; a < r; ++a) {
      (*mean)[first + a] += e * v[a];
      if (second)
        for (int c = 0; c <= a; ++c) (*second)(first + a, first + c) += e * v[a] * v[c];
    }
  }
  if (mean) *mean /= s0;
  if (second) {
    *second /= s0;
    second->triangularView<Eigen::StrictlyUpper>() = second->transpose();
  }
  return mx + std::log(s0);
}

DensityLikelihood::Value DensityLikelihood::evaluate(const Eigen::VectorXd& theta,
                                                     bool with_hessian) const {
  check_theta(kv_, theta);
  const int d = kv_.basis_dim();
  Value out;
  out.grad = Eigen::VectorXd::Zero(d);
  if (with_hessian) out.hessian = Eigen::MatrixXd::Zero(d, d);

  Eigen::VectorXd mu(d);
  Eigen::MatrixXd m2(d, d);
  Eigen::VectorXd mu0(d);
  Eigen::MatrixXd m20(d, d);
  double sum = 0.0;
  for (int i = 0; i < n_; ++i) {
    const auto k = static_cast<std::size_t>(i);
    sum += accumulate(obs_nodes_, obs_offsets_[k], obs_offsets_[k + 1], theta, &mu,
                      with_hessian ? &m2 : nullptr);
    sum -= accumulate(norm_nodes_, norm_offsets_[k], norm_offsets_[k + 1], theta, &mu0,
                      with_hessian ? &m20 : nullptr);
    out.grad += mu - mu0;
    if (with_hessian) out.hessian += (m2 - mu * mu.transpose()) - (m20 - mu0 * mu0.transpose());
  }
  const double inv_n = 1.0 / n_;
  out.loglik = sum * inv_n;
  out.grad *= inv_n;
  if (with_hessian) out.hessian *= inv_n;
  if (!std::isfinite(out.loglik) || !out.grad.allFinite())
    throw NumericalError("density likelihood evaluation produced non-finite values");
  return out;
}

LoglikGrad loglik_and_grad(const DensityModel& model, const ErrorLaw& law,
                           std::span<const double> w_data) {
  DensityLikelihood lik(model.knots(), law, w_data, model.nodes_per_panel());
  const auto v = lik.evaluate(model.theta(), false);
  return {v.loglik, v.grad.tail(v.grad.size() - 1)};
}

// ---------------------------------------------------------------------------
// fit_density

DensityFit fit_density(const KnotVector& kv, const ErrorLaw& law, std::span<const double> w_data,
                       const DensityFitOptions& opts) {
  const int d = kv.basis_dim();
  if (static_cast<int>(w_data.size()) < d)
    throw DataError("fit_density: " + std::to_string(w_data.size()) +
                    " observations for a basis of dimension " + std::to_string(d));
  const DensityLikelihood lik(kv, law, w_data, opts.nodes_per_panel);
  const int p = d - 1;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  auto cur = lik.evaluate(theta, true);
  std::vector<double> trace{cur.loglik};
  double lambda = 0.0;
  int iter = 0;
  bool converged = false;
  bool stalled = false;
  double decrement = std::numeric_limits<double>::infinity();
  double gnorm = p > 0 ? cur.grad.tail(p).lpNorm<Eigen::Infinity>() : 0.0;

  constexpr double kEps = std::numeric_limits<double>::epsilon();
  while (true) {
    if (gnorm < opts.grad_tol) {
      converged = true;
      break;
    }
    if (iter >= opts.max_iter) break;
    ++iter;

    const Eigen::VectorXd g = cur.grad.tail(p);
    const Eigen::MatrixXd neg_h = -cur.hessian.bottomRightCorner(p, p);

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd m = neg_h;
      m.diagonal().array() += lambda;
      Eigen::LLT<Eigen::MatrixXd> llt(m);
      if (llt.info() != Eigen::Success) {
        lambda = lambda == 0.0 ? 1e-6 : lambda * 10.0;
        if (lambda > 1e12) break;
        continue;
      }
      const Eigen::VectorXd step = llt.solve(g);
      const double slope = g.dot(step);
      decrement = 0.5 * slope * static_cast<double>(w_data.size());
      if (decrement < opts.decrement_tol) {
        stalled = true;
        break;
      }
      double alpha = 1.0;
      for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
        Eigen::VectorXd trial = theta;
        trial.tail(p) += alpha * step;
        const double f = lik.loglik(trial);
        // Armijo with an allowance for rounding in the last few ulps of f.
        if (std::isfinite(f) &&
            f >= cur.loglik + 1e-4 * alpha * slope - 8.0 * kEps * std::abs(cur.loglik)) {
          theta = trial;
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        lambda = lambda == 0.0 ? 1e-6 : lambda * 10.0;
        if (lambda > 1e12) break;
      }
    }
    if (stalled) {
      converged = true;
      --iter;
      break;
    }
    if (!accepted) break;
    lambda = lambda > 1e-6 ? lambda * 0.1 : 0.0;
    cur = lik.evaluate(theta, true);
    trace.push_back(cur.loglik);
    gnorm = cur.grad.tail(p).lpNorm<Eigen::Infinity>();
  }

  DensityFit fit{DensityModel(kv, theta, opts.nodes_per_panel), cur.loglik, gnorm, decrement,
                 iter, converged, std::move(trace)};
  return fit;
}

}  // namespace splinedeconv
