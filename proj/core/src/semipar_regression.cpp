#include "splinedeconv/semipar_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/LU>
#include <Eigen/QR>

#include "splinedeconv/errors.hpp"

namespace splinedeconv {

namespace {

constexpr double kDegenerate = 1e-300;

// Basis rows B(x_j)^T for the working points (L x d).
Eigen::MatrixXd working_basis(const KnotVector& kv, const WorkingDensity& work) {
  return basis_matrix(kv, work.points());
}

// Posterior kernel pieces at one (w, y): q_j = f_eps(y - m_j) f_U(w - x_j) c_j
// and dq_j = -f'_eps(y - m_j) f_U(w - x_j) c_j. Returns sum_j q_j.
double posterior_terms(const Eigen::VectorXd& m, const NoiseLaw& noise, const ErrorLaw& law,
                       const WorkingDensity& work, double w, double y, Eigen::VectorXd& q,
                       Eigen::VectorXd* dq) {
  const auto xs = work.points();
  const auto cs = work.weights();
  const int L = work.size();
  double denom = 0.0;
  for (int j = 0; j < L; ++j) {
    const double fu = law.density(w - xs[static_cast<std::size_t>(j)]) * cs[static_cast<std::size_t>(j)];
    const double e = y - m[j];
    q[j] = noise.density(e) * fu;
    if (dq) (*dq)[j] = -noise.density_deriv(e) * fu;
    denom += q[j];
  }
  return denom;
}

}  // namespace

// ---------------------------------------------------------------------------

WorkingDensity::WorkingDensity(std::vector<double> points, std::vector<double> weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.empty()) throw ConfigError("working density needs at least one point");
  if (points_.size() != weights_.size())
    throw ConfigError("working density: points and weights differ in length");
  double total = 0.0;
  for (std::size_t j = 0; j < points_.size(); ++j) {
    if (!(points_[j] >= 0.0 && points_[j] <= 1.0))
      throw ConfigError("working density points must lie in [0,1]");
    if (j > 0 && !(points_[j - 1] < points_[j]))
      throw ConfigError("working density points must be strictly increasing");
    if (!(weights_[j] >= 0.0)) throw ConfigError("working density weights must be >= 0");
    total += weights_[j];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw ConfigError("working density weights must sum to 1");
}

WorkingDensity WorkingDensity::uniform(int L) {
  if (L < 1) throw ConfigError("working.L must be >= 1");
  std::vector<double> x(static_cast<std::size_t>(L));
  std::vector<double> c(static_cast<std::size_t>(L), 1.0 / L);
  for (int j = 0; j < L; ++j) x[static_cast<std::size_t>(j)] = (j + 0.5) / L;
  return {std::move(x), std::move(c)};
}

WorkingDensity WorkingDensity::triangular(int L) {
  if (L < 1) throw ConfigError("working.L must be >= 1");
  std::vector<double> x(static_cast<std::size_t>(L));
  std::vector<double> c(static_cast<std::size_t>(L));
  double total = 0.0;
  for (int j = 0; j < L; ++j) {
    x[static_cast<std::size_t>(j)] = (j + 0.5) / L;
    c[static_cast<std::size_t>(j)] = 1.0 - std::abs(2.0 * x[static_cast<std::size_t>(j)] - 1.0);
    total += c[static_cast<std::size_t>(j)];
  }
  for (auto& v : c) v /= total;
  return {std::move(x), std::move(c)};
}

RegressionModel::RegressionModel(KnotVector kv, Eigen::VectorXd beta)
    : kv_(std::move(kv)), beta_(std::move(beta)) {
  if (beta_.size() != kv_.basis_dim())
    throw ConfigError("beta has length " + std::to_string(beta_.size()) + ", expected " +
                      std::to_string(kv_.basis_dim()));
  if (!beta_.allFinite()) throw NumericalError("beta has non-finite entries");
}

double RegressionModel::eval_m(double x) const {
  if (!(x >= 0.0 && x <= 1.0))
    throw ConfigError("eval_m: x = " + std::to_string(x) + " outside [0,1]");
  double local[32];
  const int first = eval_basis_nonzero(kv_, x, std::span<double>(local, 32));
  double m = 0.0;
  for (int a = 0; a < kv_.order(); ++a) m += local[a] * beta_[first + a];
  return m;
}

// ---------------------------------------------------------------------------

std::optional<Eigen::VectorXd> score_sstar(const RegressionModel& model, const NoiseLaw& noise,
                                           const ErrorLaw& law, const WorkingDensity& work,
                                           double w, double y) {
  const Eigen::MatrixXd bw = working_basis(model.knots(), work);
  const Eigen::VectorXd m = bw * model.beta();
  Eigen::VectorXd q(work.size());
  Eigen::VectorXd dq(work.size());
  const double denom = posterior_terms(m, noise, law, work, w, y, q, &dq);
  if (!(denom >= kDegenerate)) return std::nullopt;
  return Eigen::VectorXd(bw.transpose() * dq / denom);
}

AHMatrices build_AH(const RegressionModel& model, const NoiseLaw& noise, const ErrorLaw& law,
                    const WorkingDensity& work, const PlaneGrid& grid) {
  if (!grid.y) throw ConfigError("build_AH: plane grid needs a y axis");
  const int L = work.size();
  const auto xs = work.points();
  const Eigen::MatrixXd bw = working_basis(model.knots(), work);
  const Eigen::VectorXd m = bw * model.beta();
  const Eigen::Map<const Eigen::VectorXd> c(work.weights().data(), L);

  const auto& wa = grid.w;
  const auto& ya = *grid.y;
  const auto nw = static_cast<Eigen::Index>(wa.nodes.size());
  const auto ny = static_cast<Eigen::Index>(ya.nodes.size());

  // Separable factors: fu(g, j) = f_U(w_g - x_j), fe(h, j) = f_eps(y_h - m_j).
  Eigen::MatrixXd fu(nw, L);
  Eigen::MatrixXd fe(ny, L);
  Eigen::MatrixXd dfe(ny, L);
  for (Eigen::Index g = 0; g < nw; ++g)
    for (int j = 0; j < L; ++j)
      fu(g, j) = law.density(wa.nodes[static_cast<std::size_t>(g)] - xs[static_cast<std::size_t>(j)]);
  for (Eigen::Index h = 0; h < ny; ++h)
    for (int j = 0; j < L; ++j) {
      const double e = ya.nodes[static_cast<std::size_t>(h)] - m[j];
      fe(h, j) = noise.density(e);
      dfe(h, j) = noise.density_deriv(e);
    }

  // Rows scaled by sqrt(weight / D) so that A = Qs^T Qs diag(c) and
  // H = -Qs^T dQs diag(c).
  Eigen::MatrixXd qs(nw * ny, L);
  Eigen::MatrixXd dqs(nw * ny, L);
  Eigen::Index row = 0;
  for (Eigen::Index g = 0; g < nw; ++g) {
    for (Eigen::Index h = 0; h < ny; ++h, ++row) {
      const Eigen::ArrayXd q = fe.row(h).transpose().array() * fu.row(g).transpose().array();
      const double denom = (q * c.array()).sum();
      if (!(denom > 0.0)) {
        qs.row(row).setZero();
        dqs.row(row).setZero();
        continue;
      }
      const double s = std::sqrt(wa.weights[static_cast<std::size_t>(g)] *
                                 ya.weights[static_cast<std::size_t>(h)] / denom);
      qs.row(row) = (s * q).matrix().transpose();
      dqs.row(row) = (s * dfe.row(h).transpose().array() * fu.row(g).transpose().array())
                         .matrix()
                         .transpose();
      if (!qs.row(row).allFinite() || !dqs.row(row).allFinite())
        throw NumericalError("build_AH: non-finite integrand at grid cell (w = " +
                             std::to_string(wa.nodes[static_cast<std::size_t>(g)]) + ", y = " +
                             std::to_string(ya.nodes[static_cast<std::size_t>(h)]) + ")");
    }
  }

  AHMatrices out;
  out.A = (qs.transpose() * qs) * c.asDiagonal();
  out.H = -(qs.transpose() * dqs) * c.asDiagonal();
  return out;
}

AHMatrices build_AH_per_point(const RegressionModel& model, const NoiseLaw& noise,
                              const ErrorLaw& law, const WorkingDensity& work,
                              PointQuadOptions opts) {
  if (opts.nodes < 4) throw ConfigError("per-point quadrature needs at least 4 nodes per axis");
  const int L = work.size();
  const auto xs = work.points();
  const auto cs = work.weights();
  const Eigen::MatrixXd bw = working_basis(model.knots(), work);
  const Eigen::VectorXd m = bw * model.beta();

  // Two Gauss panels per axis, split at 0 where Laplace has its kink.
  const int half = opts.nodes / 2;
  const double um = law.tail_margin(opts.tail_sigmas);
  const double em = noise.law().tail_margin(opts.tail_sigmas);
  const std::vector<double> ub{-um, 0.0, um};
  const std::vector<double> eb{-em, 0.0, em};
  UnitGrid ur = composite_gauss(ub, half);
  UnitGrid er = composite_gauss(eb, half);
  for (std::size_t a = 0; a < ur.nodes.size(); ++a) ur.weights[a] *= law.density(ur.nodes[a]);
  for (std::size_t b = 0; b < er.nodes.size(); ++b) er.weights[b] *= noise.density(er.nodes[b]);

  AHMatrices out{Eigen::MatrixXd::Zero(L, L), Eigen::MatrixXd::Zero(L, L)};
  Eigen::MatrixXd fu(static_cast<Eigen::Index>(ur.nodes.size()), L);
  Eigen::MatrixXd fe(static_cast<Eigen::Index>(er.nodes.size()), L);
  Eigen::MatrixXd dfe(static_cast<Eigen::Index>(er.nodes.size()), L);
  Eigen::ArrayXd q(L);
  for (int i = 0; i < L; ++i) {
    const double xi = xs[static_cast<std::size_t>(i)];
    for (std::size_t a = 0; a < ur.nodes.size(); ++a)
      for (int j = 0; j < L; ++j)
        fu(static_cast<Eigen::Index>(a), j) =
            law.density(xi + ur.nodes[a] - xs[static_cast<std::size_t>(j)]) *
            cs[static_cast<std::size_t>(j)];
    for (std::size_t b = 0; b < er.nodes.size(); ++b)
      for (int j = 0; j < L; ++j) {
        const double e = m[i] + er.nodes[b] - m[j];
        fe(static_cast<Eigen::Index>(b), j) = noise.density(e);
        dfe(static_cast<Eigen::Index>(b), j) = noise.density_deriv(e);
      }
    for (std::size_t a = 0; a < ur.nodes.size(); ++a) {
      for (std::size_t b = 0; b < er.nodes.size(); ++b) {
        const auto ai = static_cast<Eigen::Index>(a);
        const auto bi = static_cast<Eigen::Index>(b);
        q = fe.row(bi).transpose().array() * fu.row(ai).transpose().array();
        const double denom = q.sum();
        if (!(denom > 0.0)) continue;
        const double s = ur.weights[a] * er.weights[b] / denom;
        out.A.row(i) += (s * q).matrix().transpose();
        out.H.row(i) -= (s * dfe.row(bi).array() * fu.row(ai).array()).matrix();
      }
    }
  }
  if (!out.A.allFinite() || !out.H.allFinite())
    throw NumericalError("build_AH_per_point: non-finite entries");
  return out;
}

CorrectionSolve solve_correction(const Eigen::MatrixXd& A, const Eigen::MatrixXd& H,
                                 const KnotVector& kv, const WorkingDensity& work) {
  const int L = work.size();
  if (A.rows() != L || A.cols() != L || H.rows() != L || H.cols() != L)
    throw ConfigError("solve_correction: A and H must be " + std::to_string(L) + "x" +
                      std::to_string(L));
  CorrectionSolve s;
  s.A = A;
  s.H = H;
  const Eigen::MatrixXd bw = working_basis(kv, work);  // L x d
  const Eigen::MatrixXd bt = H * bw;                   // b^T, L x d
  s.b = bt.transpose();

  // A working point whose likelihood vanishes on the whole quadrature grid
  // leaves an exact zero row and column, which the rcond estimate can miss.
  Eigen::MatrixXd sys = A;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys);
  Eigen::MatrixXd at;
  if (lu.rcond() >= 1e-12) at = lu.solve(bt);  // a^T, L x d
  if (at.size() == 0 || !at.allFinite()) {
    s.ridge = 1e-10 * A.trace() / L;
    sys.diagonal().array() += s.ridge;
    lu.compute(sys);
    if (!(s.ridge > 0.0) || !(lu.rcond() > 1e-15))
      throw NumericalError("solve_correction: A is singular even after adding a ridge");
    at = lu.solve(bt);
  }
  if (!at.allFinite()) throw NumericalError("solve_correction: non-finite solution");
  s.a = at.transpose();
  s.residual = (sys * at - bt).lpNorm<Eigen::Infinity>();
  return s;
}

std::optional<Eigen::VectorXd> posterior_correction(const CorrectionSolve& solve,
                                                    const RegressionModel& model,
                                                    const NoiseLaw& noise, const ErrorLaw& law,
                                                    const WorkingDensity& work, double w,
                                                    double y) {
  const Eigen::VectorXd m = working_basis(model.knots(), work) * model.beta();
  Eigen::VectorXd q(work.size());
  const double denom = posterior_terms(m, noise, law, work, w, y, q, nullptr);
  if (!(denom >= kDegenerate)) return std::nullopt;
  return Eigen::VectorXd(solve.a * q / denom);
}

EstimatingValue estimating_equation(const RegressionModel& model, const NoiseLaw& noise,
                                    const ErrorLaw& law, const WorkingDensity& work,
                                    const CorrectionSolve& solve, std::span<const double> w,
                                    std::span<const double> y) {
  if (w.empty()) throw DataError("estimating_equation: no observations");
  if (w.size() != y.size()) throw DataError("estimating_equation: w and y differ in length");
  const int L = work.size();
  const Eigen::MatrixXd bw = working_basis(model.knots(), work);
  const Eigen::VectorXd m = bw * model.beta();

  // Both terms are linear in per-observation L-vectors, so sum those first.
  Eigen::VectorXd score_w = Eigen::VectorXd::Zero(L);
  Eigen::VectorXd post_w = Eigen::VectorXd::Zero(L);
  Eigen::VectorXd q(L);
  Eigen::VectorXd dq(L);
  EstimatingValue out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double denom = posterior_terms(m, noise, law, work, w[i], y[i], q, &dq);
    if (!(denom >= kDegenerate)) {
      ++out.excluded;
      continue;
    }
    score_w += dq / denom;
    post_w += q / denom;
  }
  const double inv_n = 1.0 / static_cast<double>(w.size());
  out.value = (bw.transpose() * score_w - solve.a * post_w) * inv_n;
  return out;
}

Eigen::VectorXd naive_spline_fit(const KnotVector& kv, std::span<const double> w,
                                 std::span<const double> y) {
  if (w.size() != y.size()) throw DataError("naive_spline_fit: w and y differ in length");
  if (static_cast<int>(w.size()) < kv.basis_dim())
    throw DataError("naive_spline_fit: fewer observations than basis functions");
  std::vector<double> xc(w.begin(), w.end());
  for (auto& v : xc) v = std::clamp(v, 0.0, 1.0);
  const Eigen::MatrixXd b = basis_matrix(kv, xc);
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  return b.colPivHouseholderQr().solve(yv);
}

// ---------------------------------------------------------------------------

EstimatingFunction::EstimatingFunction(KnotVector kv, NoiseLaw noise, ErrorLaw law,
                                       WorkingDensity work, std::span<const double> w,
                                       std::span<const double> y,
                                       const RegressionFitOptions& opts,
                                       const Eigen::VectorXd& beta_for_grid)
    : kv_(std::move(kv)),
      noise_(noise),
      law_(law),
      work_(std::move(work)),
      w_(w),
      y_(y),
      opts_(opts) {
  if (opts_.scheme == AHScheme::plane) {
    // The grid must cover every working point and fitted mean as well as
    // the data, and stays fixed for the whole fit so F is smooth in beta.
    std::vector<double> wcov(w.begin(), w.end());
    wcov.insert(wcov.end(), work_.points().begin(), work_.points().end());
    const Eigen::VectorXd m = working_basis(kv_, work_) * beta_for_grid;
    std::vector<double> ycov(y.begin(), y.end());
    ycov.insert(ycov.end(), m.data(), m.data() + m.size());
    grid_ = plane_grid(wcov, std::span<const double>(ycov), law_, &noise_, opts_.plane);
  }
}

EstimatingValue EstimatingFunction::operator()(const Eigen::VectorXd& beta) {
  if (last_beta_.size() == beta.size() && last_beta_ == beta) return last_value_;
  const RegressionModel model(kv_, beta);
  const AHMatrices ah = opts_.scheme == AHScheme::plane
                            ? build_AH(model, noise_, law_, work_, grid_)
                            : build_AH_per_point(model, noise_, law_, work_, opts_.point);
  last_solve_ = solve_correction(ah.A, ah.H, kv_, work_);
  if (last_solve_.ridge > 0.0) ++ridge_solves_;
  max_residual_ = std::max(max_residual_, last_solve_.residual);
  last_value_ = estimating_equation(model, noise_, law_, work_, last_solve_, w_, y_);
  last_beta_ = beta;
  return last_value_;
}

RegressionFit fit_regression(const KnotVector& kv, const NoiseLaw& noise, const ErrorLaw& law,
                             const WorkingDensity& work, std::span<const double> w,
                             std::span<const double> y, const RegressionFitOptions& opts) {
  const int d = kv.basis_dim();
  if (w.size() != y.size()) throw DataError("fit_regression: w and y differ in length");
  if (static_cast<int>(w.size()) < d)
    throw DataError("fit_regression: " + std::to_string(w.size()) +
                    " observations for a basis of dimension " + std::to_string(d));
  // Validates the noise law up front.
  (void)noise.density_deriv(0.0);

  Eigen::VectorXd beta = naive_spline_fit(kv, w, y);
  EstimatingFunction F(kv, noise, law, work, w, y, opts, beta);

  const auto n = static_cast<double>(w.size());
  auto check_excluded = [&](const EstimatingValue& v) {
    if (v.excluded > opts.max_excluded_fraction * n)
      throw DataError("fit_regression: " + std::to_string(v.excluded) + " of " +
                      std::to_string(w.size()) +
                      " observations have a degenerate working-model likelihood");
  };

  EstimatingValue cur = F(beta);
  check_excluded(cur);
  double norm = cur.value.lpNorm<Eigen::Infinity>();
  int iter = 0;
  bool converged = false;
  Eigen::MatrixXd jac(d, d);
  while (true) {
    if (norm < opts.eq_tol) {
      converged = true;
      break;
    }
    if (iter >= opts.max_iter) break;
    ++iter;

    for (int k = 0; k < d; ++k) {
      Eigen::VectorXd bp = beta;
      const double h = 1e-6 * (1.0 + std::abs(beta[k]));
      bp[k] += h;
      jac.col(k) = (F(bp).value - cur.value) / h;
    }
    F(beta);  // restore the cached solve at the current iterate

    Eigen::VectorXd step;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    if (lu.rcond() > 1e-13) {
      step = lu.solve(-cur.value);
    } else {
      // Damped Gauss-Newton step for a (near) singular Jacobian.
      Eigen::MatrixXd jtj = jac.transpose() * jac;
      const double mu = 1e-8 * std::max(jtj.trace() / d, 1e-300);
      jtj.diagonal().array() += mu;
      step = jtj.ldlt().solve(-jac.transpose() * cur.value);
    }
    if (!step.allFinite()) break;

    const double norm2 = cur.value.norm();
    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
      const Eigen::VectorXd trial = beta + alpha * step;
      EstimatingValue tv;
      try {
        tv = F(trial);
      } catch (const NumericalError&) {
        continue;  // singular correction system at the trial point: shorten
      }
      // Excluding observations also shrinks the value, so such points are
      // not progress.
      if (tv.excluded > cur.excluded) continue;
      if (tv.value.allFinite() && tv.value.norm() < (1.0 - 1e-4 * alpha) * norm2) {
        beta = trial;
        cur = tv;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      F(beta);
      break;
    }
    check_excluded(cur);
    norm = cur.value.lpNorm<Eigen::Infinity>();
  }

  RegressionFit fit{RegressionModel(kv, beta), iter, norm, cur.excluded, converged,
                    F.ridge_solves(), F.max_residual()};
  return fit;
}

}  // namespace splinedeconv
