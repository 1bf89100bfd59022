#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace splinedeconv {

/// Clamped knot sequence on [0,1] for B-splines of a given order.
///
/// The full sequence holds `order` copies of 0, the interior knots, then
/// `order` copies of 1, so the spline space has dimension
/// `n_interior() + order()`.
class KnotVector {
 public:
  /// Equally spaced interior knots at j/(N+1), j = 1..N.
  static KnotVector uniform(int n_interior, int order = 4);

  /// Arbitrary sorted interior knots strictly inside (0,1).
  KnotVector(std::vector<double> interior, int order);

  int order() const { return order_; }
  int n_interior() const { return static_cast<int>(interior_.size()); }
  int basis_dim() const { return n_interior() + order_; }

  std::span<const double> interior() const { return interior_; }
  std::span<const double> full() const { return full_; }

  /// Distinct knots 0 = b_0 < b_1 < ... < b_{N+1} = 1 (panel boundaries).
  std::vector<double> breakpoints() const;

  /// Largest and smallest distance between neighbouring distinct knots (h_b, h_s).
  double max_spacing() const;
  double min_spacing() const;
  double mesh_ratio() const { return max_spacing() / min_spacing(); }

  friend bool operator==(const KnotVector&, const KnotVector&) = default;

 private:
  int order_;
  std::vector<double> interior_;
  std::vector<double> full_;
};

/// Interior knot count for a sample of size n: the smallest integer strictly
/// larger than 1.3 n^{1/5}.
int knots_for_sample_size(int n);

/// Values of all basis functions at one point.
struct BasisValue {
  double x = 0.0;
  Eigen::VectorXd values;
};

/// Evaluates the `order()` possibly nonzero basis functions at x by the
/// Cox-de Boor recursion. Writes them to `out` (size >= order) and returns
/// the index of the first one. Right-continuous at interior knots; at x = 1
/// the last basis function equals 1.
int eval_basis_nonzero(const KnotVector& kv, double x, std::span<double> out);

/// Dense basis vector at x. Throws ConfigError for x outside [0,1].
BasisValue eval_basis(const KnotVector& kv, double x);

/// Dense basis matrix with one row per point (points must lie in [0,1]).
Eigen::MatrixXd basis_matrix(const KnotVector& kv, std::span<const double> xs);

struct EigenBounds {
  double min_eig = 0.0;
  double max_eig = 0.0;
};

/// Extreme eigenvalues of the empirical second-moment matrix
/// m^{-1} sum_i s_i s_i^T of basis-integral vectors s_i = int B(x) g_i(x) dx.
/// Returns zeros for an empty sample.
EigenBounds gram_eigen_bounds(const KnotVector& kv, std::span<const Eigen::VectorXd> samples);

}  // namespace splinedeconv
