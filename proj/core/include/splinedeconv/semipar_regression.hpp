#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "splinedeconv/bspline.hpp"
#include "splinedeconv/error_laws.hpp"
#include "splinedeconv/quadrature.hpp"

namespace splinedeconv {

/// Discrete working density sum_j c_j I(x = x_j) for the latent covariate.
class WorkingDensity {
 public:
  /// Points strictly increasing in [0,1], weights nonnegative summing to one.
  WorkingDensity(std::vector<double> points, std::vector<double> weights);

  /// L equally spaced points (j - 0.5)/L with equal weights.
  static WorkingDensity uniform(int L);
  /// Same points, weights proportional to 1 - |2x - 1| (peaked at 0.5).
  static WorkingDensity triangular(int L);

  int size() const { return static_cast<int>(points_.size()); }
  std::span<const double> points() const { return points_; }
  std::span<const double> weights() const { return weights_; }

 private:
  std::vector<double> points_;
  std::vector<double> weights_;
};

/// Spline mean function m(x) = B(x)^T beta on [0,1].
class RegressionModel {
 public:
  RegressionModel(KnotVector kv, Eigen::VectorXd beta);
  const KnotVector& knots() const { return kv_; }
  const Eigen::VectorXd& beta() const { return beta_; }
  double eval_m(double x) const;

 private:
  KnotVector kv_;
  Eigen::VectorXd beta_;
};

/// Working-model score S*(w, y, beta); empty when the denominator
/// sum_j f_eps(y - m_j) f_U(w - x_j) c_j falls below 1e-300.
std::optional<Eigen::VectorXd> score_sstar(const RegressionModel& model, const NoiseLaw& noise,
                                           const ErrorLaw& law, const WorkingDensity& work,
                                           double w, double y);

/// How the double integrals defining A and H are discretised.
enum class AHScheme {
  /// Shared tensor trapezoid grid over (w, y) from `plane_grid`.
  plane,
  /// Per working point x_i, Gauss rules in u = w - x_i and e = y - m_i
  /// weighted by f_U(u) f_eps(e). Resolves error laws narrower than the
  /// plane grid spacing.
  per_point,
};

struct AHMatrices {
  Eigen::MatrixXd A;  // L x L
  Eigen::MatrixXd H;  // L x L
};

/// A_ij = int p_j(y,w) f_eps(y - m_i) f_U(w - x_i), H_ij the same with
/// -f'_eps(y - m_j) f_U(w - x_j) c_j / D in place of the posterior weight
/// p_j = f_eps(y - m_j) f_U(w - x_j) c_j / D, on the shared plane grid.
AHMatrices build_AH(const RegressionModel& model, const NoiseLaw& noise, const ErrorLaw& law,
                    const WorkingDensity& work, const PlaneGrid& grid);

struct PointQuadOptions {
  int nodes = 24;
  double tail_sigmas = 6.0;
};

/// A and H by per-working-point quadrature (see AHScheme::per_point).
AHMatrices build_AH_per_point(const RegressionModel& model, const NoiseLaw& noise,
                              const ErrorLaw& law, const WorkingDensity& work,
                              PointQuadOptions opts = {});

/// Solution of the discretised integral equation a A^T = b, b = sum_j B(x_j) H_j.
struct CorrectionSolve {
  Eigen::MatrixXd A;  // L x L
  Eigen::MatrixXd H;  // L x L
  Eigen::MatrixXd b;  // d x L
  Eigen::MatrixXd a;  // d x L, column j is a(x_j, beta)
  double residual = 0.0;  // max |a A^T - b| for the system actually solved
  double ridge = 0.0;     // ridge added to A's diagonal (0 when none)
};

/// Solves a A^T = b by LU. When the reciprocal condition estimate of A is
/// below 1e-12 a ridge 1e-10 trace(A)/L is added; a system that is still
/// singular raises NumericalError.
CorrectionSolve solve_correction(const Eigen::MatrixXd& A, const Eigen::MatrixXd& H,
                                 const KnotVector& kv, const WorkingDensity& work);

/// E*{a(X) | w, y} = sum_j a_j p_j(w, y); empty for a degenerate denominator.
std::optional<Eigen::VectorXd> posterior_correction(const CorrectionSolve& solve,
                                                    const RegressionModel& model,
                                                    const NoiseLaw& noise, const ErrorLaw& law,
                                                    const WorkingDensity& work, double w, double y);

struct EstimatingValue {
  Eigen::VectorXd value;  // n^{-1} sum_i [S*_i - E*{a | W_i, Y_i}]
  int excluded = 0;       // degenerate observations left out of the sum
};

EstimatingValue estimating_equation(const RegressionModel& model, const NoiseLaw& noise,
                                    const ErrorLaw& law, const WorkingDensity& work,
                                    const CorrectionSolve& solve, std::span<const double> w,
                                    std::span<const double> y);

/// Error-ignoring least-squares spline fit of y on clamp(w, 0, 1).
Eigen::VectorXd naive_spline_fit(const KnotVector& kv, std::span<const double> w,
                                 std::span<const double> y);

struct RegressionFitOptions {
  double eq_tol = 1e-7;
  int max_iter = 100;
  AHScheme scheme = AHScheme::per_point;
  PlaneGridOptions plane;
  PointQuadOptions point;
  double max_excluded_fraction = 0.01;
};

/// Estimating function F(beta) for fixed data; rebuilds A, H and a for each
/// beta and keeps the most recent solve for reuse.
class EstimatingFunction {
 public:
  EstimatingFunction(KnotVector kv, NoiseLaw noise, ErrorLaw law, WorkingDensity work,
                     std::span<const double> w, std::span<const double> y,
                     const RegressionFitOptions& opts, const Eigen::VectorXd& beta_for_grid);

  EstimatingValue operator()(const Eigen::VectorXd& beta);
  const CorrectionSolve& last_solve() const { return last_solve_; }
  int ridge_solves() const { return ridge_solves_; }
  double max_residual() const { return max_residual_; }

 private:
  KnotVector kv_;
  NoiseLaw noise_;
  ErrorLaw law_;
  WorkingDensity work_;
  std::span<const double> w_;
  std::span<const double> y_;
  RegressionFitOptions opts_;
  PlaneGrid grid_;
  Eigen::VectorXd last_beta_;
  EstimatingValue last_value_;
  CorrectionSolve last_solve_;
  int ridge_solves_ = 0;
  double max_residual_ = 0.0;
};

struct RegressionFit {
  RegressionModel model;
  int newton_iters = 0;
  double eq_norm = 0.0;
  int excluded_obs = 0;
  bool converged = false;
  int ridge_solves = 0;
  double max_solve_residual = 0.0;
};

/// Newton iteration on the estimating equation with a forward-difference
/// Jacobian, started from the naive least-squares fit.
RegressionFit fit_regression(const KnotVector& kv, const NoiseLaw& noise, const ErrorLaw& law,
                             const WorkingDensity& work, std::span<const double> w,
                             std::span<const double> y, const RegressionFitOptions& opts = {});

}  // namespace splinedeconv
