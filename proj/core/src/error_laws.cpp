#include "splinedeconv/error_laws.hpp"

#include <charconv>
#include <cstdio>
#include <cmath>
#include <limits>
#include <numbers>

#include "splinedeconv/errors.hpp"
#include "splinedeconv/random_variates.hpp"

namespace splinedeconv {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ConfigError(std::string(what) + " must be a positive finite number");
}

}  // namespace

ErrorLaw ErrorLaw::normal(double variance) {
  require_positive(variance, "normal variance");
  return {ErrorKind::normal, variance};
}

ErrorLaw ErrorLaw::laplace(double scale) {
  require_positive(scale, "laplace scale");
  return {ErrorKind::laplace, scale};
}

ErrorLaw ErrorLaw::uniform(double half_width) {
  require_positive(half_width, "uniform half-width");
  return {ErrorKind::uniform, half_width};
}

ErrorLaw ErrorLaw::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw ConfigError("error law '" + std::string(text) + "' must look like kind:param");
  const auto kind = text.substr(0, colon);
  const auto num = text.substr(colon + 1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
  if (ec != std::errc() || ptr != num.data() + num.size())
    throw ConfigError("error law '" + std::string(text) + "': parameter is not a number");
  if (kind == "normal") return normal(v);
  if (kind == "laplace") return laplace(v);
  if (kind == "uniform") return uniform(v);
  throw ConfigError("unknown error law kind '" + std::string(kind) +
                    "' (expected normal, laplace or uniform)");
}

std::string ErrorLaw::to_string() const {
  char buf[64];
  const char* name = kind_ == ErrorKind::normal ? "normal"
                     : kind_ == ErrorKind::laplace ? "laplace"
                                                   : "uniform";
  std::snprintf(buf, sizeof buf, "%s:%.17g", name, param_);
  return buf;
}

double ErrorLaw::density(double u) const {
  switch (kind_) {
    case ErrorKind::normal:
      return std::exp(-0.5 * u * u / param_) / std::sqrt(2.0 * std::numbers::pi * param_);
    case ErrorKind::laplace:
      return std::exp(-std::abs(u) / param_) / (2.0 * param_);
    case ErrorKind::uniform:
      return std::abs(u) <= param_ ? 0.5 / param_ : 0.0;
  }
  return 0.0;
}

double ErrorLaw::log_density(double u) const {
  switch (kind_) {
    case ErrorKind::normal:
      return -0.5 * u * u / param_ - 0.5 * std::log(2.0 * std::numbers::pi * param_);
    case ErrorKind::laplace:
      return -std::abs(u) / param_ - std::log(2.0 * param_);
    case ErrorKind::uniform:
      return std::abs(u) <= param_ ? -std::log(2.0 * param_)
                                   : -std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

double ErrorLaw::cdf(double u) const {
  switch (kind_) {
    case ErrorKind::normal:
      return 0.5 * std::erfc(-u / std::sqrt(2.0 * param_));
    case ErrorKind::laplace:
      return u < 0.0 ? 0.5 * std::exp(u / param_) : 1.0 - 0.5 * std::exp(-u / param_);
    case ErrorKind::uniform:
      if (u <= -param_) return 0.0;
      if (u >= param_) return 1.0;
      return 0.5 * (u + param_) / param_;
  }
  return 0.0;
}

double ErrorLaw::char_fn(double t) const {
  switch (kind_) {
    case ErrorKind::normal:
      return std::exp(-0.5 * param_ * t * t);
    case ErrorKind::laplace:
      return 1.0 / (1.0 + param_ * param_ * t * t);
    case ErrorKind::uniform: {
      const double z = param_ * t;
      return std::abs(z) < 1e-8 ? 1.0 - z * z / 6.0 : std::sin(z) / z;
    }
  }
  return 1.0;
}

double ErrorLaw::variance() const {
  switch (kind_) {
    case ErrorKind::normal: return param_;
    case ErrorKind::laplace: return 2.0 * param_ * param_;
    case ErrorKind::uniform: return param_ * param_ / 3.0;
  }
  return 0.0;
}

double ErrorLaw::stddev() const { return std::sqrt(variance()); }

double ErrorLaw::support_half_width() const {
  return kind_ == ErrorKind::uniform ? param_ : std::numeric_limits<double>::infinity();
}

double ErrorLaw::tail_margin(double tail_sigmas) const {
  return kind_ == ErrorKind::uniform ? param_ : tail_sigmas * stddev();
}

std::vector<double> ErrorLaw::kinks(double w) const {
  switch (kind_) {
    case ErrorKind::normal: return {};
    case ErrorKind::laplace: return {w};
    case ErrorKind::uniform: return {w - param_, w + param_};
  }
  return {};
}

double NoiseLaw::density_deriv(double e) const {
  if (law_.kind() != ErrorKind::normal)
    throw ConfigError("density derivative is only available for a normal noise law, got " +
                      law_.to_string());
  return -(e / law_.param()) * law_.density(e);
}

std::vector<double> sample(const ErrorLaw& law, Rng& rng, std::size_t count) {
  std::vector<double> out(count);
  const double p = law.param();
  switch (law.kind()) {
    case ErrorKind::normal: {
      const double sd = std::sqrt(p);
      for (auto& v : out) v = sd * standard_normal(rng);
      break;
    }
    case ErrorKind::laplace:
      for (auto& v : out) {
        const double u = uniform_open(rng) - 0.5;
        v = u < 0.0 ? p * std::log1p(2.0 * u) : -p * std::log1p(-2.0 * u);
      }
      break;
    case ErrorKind::uniform:
      for (auto& v : out) v = p * (2.0 * uniform_open(rng) - 1.0);
      break;
  }
  return out;
}

}  // namespace splinedeconv
