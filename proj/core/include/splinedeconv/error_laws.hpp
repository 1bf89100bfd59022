#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "splinedeconv/rng.hpp"

namespace splinedeconv {

enum class ErrorKind { normal, laplace, uniform };

/// Zero-mean additive error density.
///
/// The parameter is the variance for `normal`, the scale b for `laplace`
/// (variance 2b^2) and the half-width c for `uniform` (variance c^2/3).
class ErrorLaw {
 public:
  static ErrorLaw normal(double variance);
  static ErrorLaw laplace(double scale);
  static ErrorLaw uniform(double half_width);

  /// Parses "normal:0.25", "laplace:0.035", "uniform:0.125".
  static ErrorLaw parse(std::string_view text);

  ErrorKind kind() const { return kind_; }
  double param() const { return param_; }
  std::string to_string() const;

  double density(double u) const;
  /// log density; -inf outside a bounded support.
  double log_density(double u) const;
  double cdf(double u) const;
  /// Real-valued characteristic function E cos(tU).
  double char_fn(double t) const;
  double variance() const;
  double stddev() const;

  /// Half-width of the support, or +inf for unbounded laws.
  double support_half_width() const;

  /// Distance covering the effective support: tail_sigmas standard
  /// deviations for unbounded laws, the exact half-width for uniform.
  double tail_margin(double tail_sigmas) const;

  /// Points where x -> density(w - x) has a kink or jump.
  std::vector<double> kinks(double w) const;

  friend bool operator==(const ErrorLaw&, const ErrorLaw&) = default;

 private:
  ErrorLaw(ErrorKind kind, double param) : kind_(kind), param_(param) {}
  ErrorKind kind_;
  double param_;
};

/// Regression error law. The estimating equations need f and f' in closed
/// form, which is available for the normal law only.
class NoiseLaw {
 public:
  explicit NoiseLaw(ErrorLaw law) : law_(law) {}
  static NoiseLaw normal(double variance) { return NoiseLaw(ErrorLaw::normal(variance)); }
  static NoiseLaw parse(std::string_view text) { return NoiseLaw(ErrorLaw::parse(text)); }

  const ErrorLaw& law() const { return law_; }
  double density(double e) const { return law_.density(e); }
  /// f'(e); throws ConfigError unless the law is normal.
  double density_deriv(double e) const;
  double variance() const { return law_.variance(); }
  double stddev() const { return law_.stddev(); }
  std::string to_string() const { return law_.to_string(); }

 private:
  ErrorLaw law_;
};

/// i.i.d. draws from the law.
std::vector<double> sample(const ErrorLaw& law, Rng& rng, std::size_t count);
inline std::vector<double> sample(const NoiseLaw& law, Rng& rng, std::size_t count) {
  return sample(law.law(), rng, count);
}

}  // namespace splinedeconv
