#include "splinedeconv/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "splinedeconv/errors.hpp"

namespace splinedeconv {

namespace {
constexpr int kMaxOrder = 30;
}  // namespace

KnotVector KnotVector::uniform(int n_interior, int order) {
  if (n_interior < 0) throw ConfigError("make_knots: n_interior must be >= 0");
  std::vector<double> interior(static_cast<std::size_t>(n_interior));
  for (int j = 1; j <= n_interior; ++j)
    interior[static_cast<std::size_t>(j - 1)] = static_cast<double>(j) / (n_interior + 1);
  return KnotVector(std::move(interior), order);
}

KnotVector::KnotVector(std::vector<double> interior, int order)
    : order_(order), interior_(std::move(interior)) {
  if (order_ < 1) throw ConfigError("make_knots: order must be >= 1, got " + std::to_string(order_));
  if (order_ > kMaxOrder) throw ConfigError("make_knots: order above " + std::to_string(kMaxOrder));
  for (std::size_t i = 0; i < interior_.size(); ++i) {
    const double t = interior_[i];
    if (!(t > 0.0 && t < 1.0))
      throw ConfigError("interior knots must lie strictly inside (0,1)");
    if (i > 0 && !(interior_[i - 1] < t))
      throw ConfigError("interior knots must be strictly increasing");
  }
  full_.reserve(interior_.size() + 2 * static_cast<std::size_t>(order_));
  full_.insert(full_.end(), static_cast<std::size_t>(order_), 0.0);
  full_.insert(full_.end(), interior_.begin(), interior_.end());
  full_.insert(full_.end(), static_cast<std::size_t>(order_), 1.0);
}

std::vector<double> KnotVector::breakpoints() const {
  std::vector<double> b;
  b.reserve(interior_.size() + 2);
  b.push_back(0.0);
  b.insert(b.end(), interior_.begin(), interior_.end());
  b.push_back(1.0);
  return b;
}

double KnotVector::max_spacing() const {
  const auto b = breakpoints();
  double h = 0.0;
  for (std::size_t i = 1; i < b.size(); ++i) h = std::max(h, b[i] - b[i - 1]);
  return h;
}

double KnotVector::min_spacing() const {
  const auto b = breakpoints();
  double h = 1.0;
  for (std::size_t i = 1; i < b.size(); ++i) h = std::min(h, b[i] - b[i - 1]);
  return h;
}

int knots_for_sample_size(int n) {
  if (n < 1) throw ConfigError("knots_for_sample_size: n must be >= 1");
  const double v = 1.3 * std::pow(static_cast<double>(n), 0.2);
  return static_cast<int>(std::floor(v)) + 1;
}

int eval_basis_nonzero(const KnotVector& kv, double x, std::span<double> out) {
  const int r = kv.order();
  const auto t = kv.full();
  const int d = kv.basis_dim();

  // Span index mu with t[mu] <= x < t[mu+1], restricted to r-1 <= mu <= d-1
  // so that x = 1 falls into the last nonempty span.
  auto it = std::upper_bound(t.begin() + r, t.begin() + d, x);
  const int mu = static_cast<int>(it - t.begin()) - 1;

  // de Boor / Cox recursion on the r nonzero functions B_{mu-r+1..mu}.
  double left[32];
  double right[32];
  out[0] = 1.0;
  for (int j = 1; j < r; ++j) {
    left[j] = x - t[static_cast<std::size_t>(mu + 1 - j)];
    right[j] = t[static_cast<std::size_t>(mu + j)] - x;
    double saved = 0.0;
    for (int k = 0; k < j; ++k) {
      const double denom = right[k + 1] + left[j - k];
      const double term = denom != 0.0 ? out[static_cast<std::size_t>(k)] / denom : 0.0;
      out[static_cast<std::size_t>(k)] = saved + right[k + 1] * term;
      saved = left[j - k] * term;
    }
    out[static_cast<std::size_t>(j)] = saved;
  }
  return mu - r + 1;
}

BasisValue eval_basis(const KnotVector& kv, double x) {
  if (!(x >= 0.0 && x <= 1.0))
    throw ConfigError("eval_basis: x = " + std::to_string(x) + " outside [0,1]");
  BasisValue bv;
  bv.x = x;
  bv.values = Eigen::VectorXd::Zero(kv.basis_dim());
  double local[32];
  const int first = eval_basis_nonzero(kv, x, std::span<double>(local, 32));
  for (int k = 0; k < kv.order(); ++k) bv.values[first + k] = local[k];
  return bv;
}

Eigen::MatrixXd basis_matrix(const KnotVector& kv, std::span<const double> xs) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(xs.size()), kv.basis_dim());
  double local[32];
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = xs[i];
    if (!(x >= 0.0 && x <= 1.0))
      throw ConfigError("basis_matrix: x = " + std::to_string(x) + " outside [0,1]");
    const int first = eval_basis_nonzero(kv, x, std::span<double>(local, 32));
    for (int k = 0; k < kv.order(); ++k) m(static_cast<Eigen::Index>(i), first + k) = local[k];
  }
  return m;
}

EigenBounds gram_eigen_bounds(const KnotVector& kv, std::span<const Eigen::VectorXd> samples) {
  const int d = kv.basis_dim();
  if (samples.empty()) return {};
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : samples) {
    if (s.size() != d)
      throw ConfigError("gram_eigen_bounds: sample of length " + std::to_string(s.size()) +
                        " does not match basis dimension " + std::to_string(d));
    c.selfadjointView<Eigen::Lower>().rankUpdate(s);
  }
  c = c.selfadjointView<Eigen::Lower>();
  c /= static_cast<double>(samples.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

}  // namespace splinedeconv
