#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "splinedeconv/bspline.hpp"
#include "splinedeconv/error_laws.hpp"
#include "splinedeconv/quadrature.hpp"

namespace splinedeconv {

/// log of int_0^1 exp{B(x)^T theta} dx on the given grid, computed with the
/// maximum of B^T theta subtracted inside the exponential.
double log_partition(const KnotVector& kv, const Eigen::VectorXd& theta, const UnitGrid& grid);

/// exp{B(x)^T theta} / int exp{B^T theta} for an arbitrary (unpinned) theta.
double eval_fx(const KnotVector& kv, const Eigen::VectorXd& theta, double x,
               int nodes_per_panel = 10);

/// Quadrature nodes for x -> f_U(w - x) on [0,1]: the knot panels further
/// split at the law's kinks and, for smooth laws, at a few standard
/// deviations around w so narrow error densities are resolved.
std::vector<double> observation_breakpoints(const KnotVector& kv, const ErrorLaw& law, double w);

/// Log-spline density f_X(x, theta) = exp{B^T theta} / int exp{B^T theta}
/// with the first coefficient pinned at zero.
class DensityModel {
 public:
  /// `theta` is the full coefficient vector; theta[0] must be exactly 0.
  DensityModel(KnotVector kv, Eigen::VectorXd theta, int nodes_per_panel = 10);

  /// Uniform density on [0,1] (theta = 0).
  static DensityModel uniform(KnotVector kv, int nodes_per_panel = 10);

  /// Shifts an arbitrary coefficient vector so its first entry is zero; the
  /// density is unchanged because the basis sums to one.
  static DensityModel from_unpinned(KnotVector kv, const Eigen::VectorXd& theta,
                                    int nodes_per_panel = 10);

  const KnotVector& knots() const { return kv_; }
  const Eigen::VectorXd& theta() const { return theta_; }
  Eigen::VectorXd theta_free() const { return theta_.tail(theta_.size() - 1); }
  double log_normalizer() const { return log_norm_; }
  int nodes_per_panel() const { return nodes_per_panel_; }

  /// f_X(x, theta); x must lie in [0,1].
  double eval_fx(double x) const;

  /// f_W(w, theta) = int exp{B^T theta} f_U(w - x) dx / int exp{B^T theta} dx.
  double eval_fw(const ErrorLaw& law, double w) const;

 private:
  KnotVector kv_;
  Eigen::VectorXd theta_;
  int nodes_per_panel_;
  double log_norm_;
};

/// Mean log-likelihood n^{-1} sum_i log f_W(W_i, theta) with its exact
/// gradient and Hessian in full-theta coordinates.
///
/// The per-observation quadrature (nodes, basis rows and log f_U weights)
/// is built once; each evaluation is then a pass over the stored nodes.
/// Each observation normalises over its own node set, so the computed f_W
/// never exceeds max f_U whatever theta is.
class DensityLikelihood {
 public:
  DensityLikelihood(KnotVector kv, ErrorLaw law, std::span<const double> w_data,
                    int nodes_per_panel = 10);

  struct Value {
    double loglik = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hessian;  // empty unless requested
  };

  Value evaluate(const Eigen::VectorXd& theta, bool with_hessian) const;
  double loglik(const Eigen::VectorXd& theta) const { return evaluate(theta, false).loglik; }

  int size() const { return n_; }
  int basis_dim() const { return kv_.basis_dim(); }
  const KnotVector& knots() const { return kv_; }

 private:
  struct NodeSet {
    std::vector<int> first;
    std::vector<double> basis;    // order() values per node
    std::vector<double> log_wt;   // log(quadrature weight * kernel)
  };

  // Adds log(sum e^{eta + log_wt}) and optionally the moments of B under the
  // normalised weights.
  double accumulate(const NodeSet& nodes, std::size_t begin, std::size_t end,
                    const Eigen::VectorXd& theta, Eigen::VectorXd* mean,
                    Eigen::MatrixXd* second) const;

  KnotVector kv_;
  ErrorLaw law_;
  int n_ = 0;
  NodeSet obs_nodes_;  // nodes with f_U > 0, log_wt includes log f_U
  std::vector<std::size_t> obs_offsets_;
  NodeSet norm_nodes_;  // full cover of [0,1] per observation
  std::vector<std::size_t> norm_offsets_;
};

/// Log-likelihood and its gradient with respect to the free coefficients
/// theta_L = theta[1..d-1].
struct LoglikGrad {
  double loglik = 0.0;
  Eigen::VectorXd grad;
};
LoglikGrad loglik_and_grad(const DensityModel& model, const ErrorLaw& law,
                           std::span<const double> w_data);

struct DensityFitOptions {
  double grad_tol = 1e-8;
  /// Also stop once the Newton decrement of the summed log-likelihood (the
  /// predicted remaining gain) is below this. Needed when the supremum lies
  /// at infinity along a direction with polynomially decaying gradient.
  double decrement_tol = 1e-4;
  int max_iter = 500;
  int nodes_per_panel = 10;
};

struct DensityFit {
  DensityModel model;
  double loglik = 0.0;
  double grad_norm = 0.0;
  double decrement = 0.0;  // last predicted gain in the summed log-likelihood
  int iterations = 0;
  bool converged = false;
  std::vector<double> loglik_trace;  // value after each accepted step
};

/// Maximum likelihood over theta_L starting from theta = 0 by damped Newton
/// ascent with backtracking. Throws DataError when fewer observations than
/// basis functions are supplied. Non-convergence is reported through
/// `converged`, with the last iterate kept.
DensityFit fit_density(const KnotVector& kv, const ErrorLaw& law, std::span<const double> w_data,
                       const DensityFitOptions& opts = {});

}  // namespace splinedeconv
