#include "splinedeconv/io.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "splinedeconv/errors.hpp"

namespace splinedeconv {

namespace {

using json = nlohmann::ordered_json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> to_double(std::string_view text) {
  const std::string s = trim(text);
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
  return v;
}

std::optional<long long> to_integer(std::string_view text) {
  const std::string s = trim(text);
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError("config key '" + std::string(key) + "': invalid value '" + std::string(value) +
                    "' (" + std::string(want) + ")");
}

int int_at_least(std::string_view key, std::string_view value, long long min) {
  const auto v = to_integer(value);
  if (!v || *v < min || *v > 1'000'000'000)
    bad_value(key, value, "integer >= " + std::to_string(min));
  return static_cast<int>(*v);
}

double positive_real(std::string_view key, std::string_view value) {
  const auto v = to_double(value);
  if (!v || !std::isfinite(*v) || *v <= 0.0) bad_value(key, value, "positive number");
  return *v;
}

double finite_real(std::string_view key, std::string_view value) {
  const auto v = to_double(value);
  if (!v || !std::isfinite(*v)) bad_value(key, value, "finite number");
  return *v;
}

template <class F>
auto rethrow_as_config(std::string_view key, std::string_view value, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError("config key '" + std::string(key) + "': invalid value '" +
                      std::string(value) + "' (" + e.what() + ")");
  }
}

using Setter = std::function<void(Config&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    m["input"] = [](Config& c, auto, auto v) { c.input = trim(v); };
    m["output"] = [](Config& c, auto, auto v) { c.output = trim(v); };
    m["error"] = [](Config& c, auto k, auto v) {
      c.error = rethrow_as_config(k, v, [&] { return ErrorLaw::parse(trim(v)); });
    };
    m["noise"] = [](Config& c, auto k, auto v) {
      c.noise = rethrow_as_config(k, v, [&] { return NoiseLaw::parse(trim(v)); });
      try {
        (void)c.noise.density_deriv(0.0);
      } catch (const ConfigError&) {
        bad_value(k, v, "only normal regression noise is supported");
      }
    };
    m["order"] = [](Config& c, auto k, auto v) {
      c.order = int_at_least(k, v, 1);
      if (c.order > 30) bad_value(k, v, "order must be <= 30");
    };
    m["knots"] = [](Config& c, auto k, auto v) {
      if (trim(v) == "auto")
        c.knots.reset();
      else
        c.knots = int_at_least(k, v, 0);
    };
    m["grid"] = [](Config& c, auto k, auto v) { c.grid = int_at_least(k, v, 2); };
    m["quad.nodes_per_panel"] = [](Config& c, auto k, auto v) {
      c.quad_nodes_per_panel = int_at_least(k, v, 2);
    };
    m["quad.plane_points"] = [](Config& c, auto k, auto v) {
      c.quad_plane_points = int_at_least(k, v, 20);
    };
    m["quad.tail_sigmas"] = [](Config& c, auto k, auto v) {
      c.quad_tail_sigmas = positive_real(k, v);
    };
    m["quad.scheme"] = [](Config& c, auto k, auto v) {
      const std::string s = trim(v);
      if (s == "plane")
        c.quad_scheme = AHScheme::plane;
      else if (s == "per-point")
        c.quad_scheme = AHScheme::per_point;
      else
        bad_value(k, v, "plane or per-point");
    };
    m["quad.point_nodes"] = [](Config& c, auto k, auto v) {
      c.quad_point_nodes = int_at_least(k, v, 2);
      if (c.quad_point_nodes > 256) bad_value(k, v, "at most 256");
    };
    m["quad.point_tail_sigmas"] = [](Config& c, auto k, auto v) {
      c.quad_point_tail_sigmas = positive_real(k, v);
    };
    m["working.L"] = [](Config& c, auto k, auto v) { c.working_L = int_at_least(k, v, 1); };
    m["working.kind"] = [](Config& c, auto k, auto v) {
      const std::string s = trim(v);
      if (s != "uniform" && s != "triangular") bad_value(k, v, "uniform or triangular");
      c.working_kind = s;
    };
    m["density.tol"] = [](Config& c, auto k, auto v) { c.density_tol = positive_real(k, v); };
    m["density.max_iter"] = [](Config& c, auto k, auto v) {
      c.density_max_iter = int_at_least(k, v, 1);
    };
    m["regression.tol"] = [](Config& c, auto k, auto v) {
      c.regression_tol = positive_real(k, v);
    };
    m["regression.max_iter"] = [](Config& c, auto k, auto v) {
      c.regression_max_iter = int_at_least(k, v, 1);
    };
    m["task"] = [](Config& c, auto k, auto v) {
      c.task = rethrow_as_config(k, v, [&] { return parse_task(trim(v)); });
    };
    m["model"] = [](Config& c, auto k, auto v) {
      c.model = rethrow_as_config(k, v, [&] { return parse_error_model(trim(v)); });
    };
    m["method"] = [](Config& c, auto k, auto v) {
      c.method = rethrow_as_config(k, v, [&] { return parse_method(trim(v)); });
    };
    m["n"] = [](Config& c, auto k, auto v) { c.n = int_at_least(k, v, 2); };
    m["n_list"] = [](Config& c, auto k, auto v) {
      std::vector<int> ns;
      for (const auto& part : split(v, ',')) ns.push_back(int_at_least(k, part, 2));
      for (std::size_t i = 1; i < ns.size(); ++i)
        if (ns[i] <= ns[i - 1]) bad_value(k, v, "strictly increasing sample sizes");
      c.n_list = std::move(ns);
    };
    m["replicates"] = [](Config& c, auto k, auto v) { c.replicates = int_at_least(k, v, 0); };
    m["seed"] = [](Config& c, auto k, auto v) {
      const std::string s = trim(v);
      std::uint64_t seed = 0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
      if (s.empty() || ec != std::errc() || p != s.data() + s.size())
        bad_value(k, v, "unsigned 64-bit integer");
      c.seed = seed;
    };
    m["threads"] = [](Config& c, auto k, auto v) { c.threads = int_at_least(k, v, 0); };
    m["baseline"] = [](Config& c, auto k, auto v) {
      const std::string s = trim(v);
      if (s != "deconv-density" && s != "deconv-reg" && s != "naive" && s != "naive-density" &&
          s != "naive-reg")
        bad_value(k, v, "deconv-density, deconv-reg, naive, naive-density or naive-reg");
      c.baseline = s;
    };
    m["bandwidth"] = [](Config& c, auto k, auto v) {
      c.bandwidth_auto = trim(v) == "auto";
      if (c.bandwidth_auto)
        c.bandwidth.reset();
      else
        c.bandwidth = positive_real(k, v);
    };
    m["bootstrap.B"] = [](Config& c, auto k, auto v) {
      c.bootstrap_B = int_at_least(k, v, 0);
      if (c.bootstrap_B == 1) bad_value(k, v, "0 (off) or >= 2");
    };
    m["bootstrap.level"] = [](Config& c, auto k, auto v) {
      const double l = finite_real(k, v);
      if (!(l > 0.0 && l < 1.0)) bad_value(k, v, "number in (0,1)");
      c.bootstrap_level = l;
    };
    m["ingest.lo"] = [](Config& c, auto k, auto v) { c.ingest_lo = finite_real(k, v); };
    m["ingest.hi"] = [](Config& c, auto k, auto v) { c.ingest_hi = finite_real(k, v); };
    m["ingest.bias"] = [](Config& c, auto k, auto v) { c.ingest_bias = finite_real(k, v); };
    return m;
  }();
  return table;
}

std::string json_scalar_text(const std::string& key, const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError("config key '" + key + "': array must hold numbers");
      if (!out.empty()) out += ',';
      out += json_scalar_text(key, e);
    }
    return out;
  }
  throw ConfigError("config key '" + key + "': unsupported value " + v.dump());
}

void flatten(Config& cfg, const json& node, const std::string& prefix) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    const json& v = it.value();
    if (v.is_object()) {
      if ((key == "error" || key == "noise")) {
        for (auto f = v.begin(); f != v.end(); ++f)
          if (f.key() != "kind" && f.key() != "param")
            throw ConfigError("unknown config key '" + key + "." + f.key() + "'");
        if (!v.contains("kind") || !v.contains("param"))
          throw ConfigError("config key '" + key + "': needs both kind and param");
        cfg.set(key, json_scalar_text(key + ".kind", v["kind"]) + ":" +
                         json_scalar_text(key + ".param", v["param"]));
        continue;
      }
      flatten(cfg, v, key);
      continue;
    }
    cfg.set(key, json_scalar_text(key, v));
  }
}

}  // namespace

void Config::set(std::string_view key, std::string_view value) {
  const auto& table = setters();
  const auto it = table.find(std::string(key));
  if (it == table.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  it->second(*this, key, value);
}

void Config::validate() const {
  if (!(ingest_hi > ingest_lo))
    throw ConfigError("config keys 'ingest.lo'/'ingest.hi': need hi > lo");
  if (working_L < 1) throw ConfigError("config key 'working.L': must be >= 1");
}

DensityFitOptions Config::density_options() const {
  DensityFitOptions o;
  o.grad_tol = density_tol;
  o.max_iter = density_max_iter;
  o.nodes_per_panel = quad_nodes_per_panel;
  return o;
}

RegressionFitOptions Config::regression_options() const {
  RegressionFitOptions o;
  o.eq_tol = regression_tol;
  o.max_iter = regression_max_iter;
  o.scheme = quad_scheme;
  o.plane.points = quad_plane_points;
  o.plane.tail_sigmas = quad_tail_sigmas;
  o.point.nodes = quad_point_nodes;
  o.point.tail_sigmas = quad_point_tail_sigmas;
  return o;
}

EstimatorSettings Config::estimator_settings() const {
  EstimatorSettings s;
  s.density = density_options();
  s.regression = regression_options();
  s.working_L = working_L;
  s.bandwidth = bandwidth;
  s.grid_points = grid;
  return s;
}

WorkingDensity Config::working_density() const {
  return working_kind == "triangular" ? WorkingDensity::triangular(working_L)
                                      : WorkingDensity::uniform(working_L);
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_config_json(Config& cfg, std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  flatten(cfg, doc, "");
}

Config load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  Config cfg;
  apply_config_json(cfg, text);
  return cfg;
}

IngestTransform::IngestTransform(double lo_, double hi_, double bias_)
    : lo(lo_), hi(hi_), bias(bias_) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo))
    throw ConfigError("ingest range needs finite lo < hi");
  if (!std::isfinite(bias)) throw ConfigError("ingest bias must be finite");
}

double calibrate_bias(std::span<const double> w, std::span<const double> w0) {
  if (w.size() != w0.size())
    throw DataError("calibrate_bias: series lengths differ (" + std::to_string(w.size()) + " vs " +
                    std::to_string(w0.size()) + ")");
  if (w.size() < 2) throw DataError("calibrate_bias: need at least 2 observations");
  double s = 0.0;
  double s0 = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    s += w[i];
    s0 += w0[i];
  }
  const auto n = static_cast<double>(w.size());
  return s0 / n - s / n;
}

double averaged_error_variance(std::span<const double> w, std::span<const double> w0, int K) {
  if (w.size() != w0.size()) throw DataError("averaged_error_variance: series lengths differ");
  if (w.size() < 2) throw DataError("averaged_error_variance: need at least 2 observations");
  if (K < 1) throw ConfigError("averaged_error_variance: K must be >= 1");
  const auto n = static_cast<double>(w.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) mean += w0[i] - w[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = w0[i] - w[i] - mean;
    ss += d * d;
  }
  return ss / (n - 1.0) / (K + 1.0);
}

bool NumericTable::has(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

const std::vector<double>& NumericTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw DataError("missing required column '" + name + "'");
  return values[static_cast<std::size_t>(it - columns.begin())];
}

NumericTable parse_numeric_csv(std::string_view text, const std::string& origin) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find('\n', start);
    lines.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  std::size_t header = 0;
  while (header < lines.size() && trim(lines[header]).empty()) ++header;
  if (header == lines.size()) throw DataError(origin + ": empty file");

  NumericTable t;
  t.columns = split(lines[header], ',');
  for (std::size_t j = 0; j < t.columns.size(); ++j) {
    if (t.columns[j].empty())
      throw DataError(origin + ": empty column name at position " + std::to_string(j + 1));
    for (std::size_t k = 0; k < j; ++k)
      if (t.columns[k] == t.columns[j])
        throw DataError(origin + ": duplicate column '" + t.columns[j] + "'");
  }
  t.values.resize(t.columns.size());
  for (std::size_t li = header + 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const auto fields = split(lines[li], ',');
    const std::size_t line = li + 1;
    if (fields.size() != t.columns.size())
      throw DataError(origin + ": line " + std::to_string(line) + ": expected " +
                      std::to_string(t.columns.size()) + " fields, found " +
                      std::to_string(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const auto v = to_double(fields[j]);
      if (!v || !std::isfinite(*v))
        throw DataError(origin + ": line " + std::to_string(line) + ": non-numeric value '" +
                        fields[j] + "' in column '" + t.columns[j] + "'");
      t.values[j].push_back(*v);
    }
    t.lines.push_back(line);
  }
  if (t.lines.empty()) throw DataError(origin + ": no data rows");
  return t;
}

IngestedData ingest_text(std::string_view text, const IngestTransform& transform,
                         const std::string& origin) {
  const NumericTable t = parse_numeric_csv(text, origin);
  IngestedData out;
  out.transform = transform;
  out.columns = t.columns;

  std::vector<const std::vector<double>*> reps;
  for (int k = 1; t.has("w" + std::to_string(k)); ++k) reps.push_back(&t.column("w" + std::to_string(k)));
  const bool has_w = t.has("w");
  if (!has_w && reps.empty()) throw DataError(origin + ": missing required column 'w'");
  if (has_w && !reps.empty())
    throw DataError(origin + ": both 'w' and replicate columns w1..wK present");
  out.replicate_columns = static_cast<int>(reps.size());

  const std::size_t n = t.lines.size();
  std::vector<double> raw_w(n);
  if (has_w) {
    raw_w = t.column("w");
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (const auto* c : reps) s += (*c)[i];
      raw_w[i] = s / static_cast<double>(reps.size());
    }
  }
  if (t.has("y")) out.y = t.column("y");

  std::vector<std::size_t> outside;
  out.w.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = transform.forward(raw_w[i]);
    // Rounding in (w - lo) / (hi - lo) may push an endpoint just outside.
    if (!(s >= -1e-12 && s <= 1.0 + 1e-12)) outside.push_back(t.lines[i]);
    out.w.push_back(std::clamp(s, 0.0, 1.0));
  }
  if (!outside.empty()) {
    std::string msg = origin + ": " + std::to_string(outside.size()) +
                      " value(s) outside [lo, hi] after transform, lines";
    for (std::size_t i = 0; i < std::min<std::size_t>(outside.size(), 10); ++i)
      msg += " " + std::to_string(outside[i]);
    if (outside.size() > 10) msg += " ...";
    throw DataError(msg);
  }
  if (t.has("w0") && !reps.empty() && n >= 2) {
    out.mean_error_var_raw =
        averaged_error_variance(raw_w, t.column("w0"), static_cast<int>(reps.size()));
    out.mean_error_var = *out.mean_error_var_raw / (transform.scale() * transform.scale());
  }
  return out;
}

IngestedData ingest(const std::string& path, const IngestTransform& transform) {
  return ingest_text(read_text(path), transform, path);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string curve_csv(const CurveTable& t) {
  const bool bands = !t.band_lo.empty();
  if (t.estimate.size() != t.x.size() ||
      (bands && (t.band_lo.size() != t.x.size() || t.band_hi.size() != t.x.size())))
    throw NumericalError("curve table columns differ in length");
  std::string out = "x,estimate,band_lo,band_hi\n";
  for (std::size_t i = 0; i < t.x.size(); ++i) {
    out += format_double(t.x[i]);
    out += ',';
    out += format_double(t.estimate[i]);
    out += ',';
    if (bands) out += format_double(t.band_lo[i]);
    out += ',';
    if (bands) out += format_double(t.band_hi[i]);
    out += '\n';
  }
  return out;
}

void write_curve_csv(const std::string& path, const CurveTable& t) { write_text(path, curve_csv(t)); }

CurveTable parse_curve_csv(std::string_view text, const std::string& origin) {
  CurveTable t;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || trim(line) != "x,estimate,band_lo,band_hi")
    throw DataError(origin + ": expected header x,estimate,band_lo,band_hi");
  std::size_t lineno = 1;
  bool bands = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 4) throw DataError(origin + ": line " + std::to_string(lineno) + ": 4 fields expected");
    auto num = [&](const std::string& s) {
      const auto v = to_double(s);
      if (!v) throw DataError(origin + ": line " + std::to_string(lineno) + ": bad number '" + s + "'");
      return *v;
    };
    if (t.x.empty()) bands = !f[2].empty();
    t.x.push_back(num(f[0]));
    t.estimate.push_back(num(f[1]));
    if (bands) {
      t.band_lo.push_back(num(f[2]));
      t.band_hi.push_back(num(f[3]));
    } else if (!f[2].empty() || !f[3].empty()) {
      throw DataError(origin + ": line " + std::to_string(lineno) + ": band fields mixed");
    }
  }
  return t;
}

CurveTable read_curve_csv(const std::string& path) { return parse_curve_csv(read_text(path), path); }

CurveTable density_to_original(const CurveTable& scaled, const IngestTransform& t) {
  CurveTable o = scaled;
  const double jac = 1.0 / t.scale();
  for (auto& x : o.x) x = t.inverse(x);
  for (auto& v : o.estimate) v *= jac;
  for (auto& v : o.band_lo) v *= jac;
  for (auto& v : o.band_hi) v *= jac;
  return o;
}

CurveTable regression_to_original(const CurveTable& scaled, const IngestTransform& t) {
  CurveTable o = scaled;
  for (auto& x : o.x) x = t.inverse(x);
  return o;
}

namespace {

json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json knots_json(const KnotVector& kv) {
  return json{{"order", kv.order()}, {"interior", kv.interior()}};
}

json transform_json(const IngestTransform& t) {
  return json{{"lo", t.lo}, {"hi", t.hi}, {"bias", t.bias}};
}

void add_curves(json& j, const char* value_key, const CurveTable& scaled, const CurveTable& orig) {
  j["grid_x"] = scaled.x;
  j[value_key] = scaled.estimate;
  if (!scaled.band_lo.empty()) {
    j["band_lo"] = scaled.band_lo;
    j["band_hi"] = scaled.band_hi;
  }
  json o{{"grid_x", orig.x}, {value_key, orig.estimate}};
  if (!orig.band_lo.empty()) {
    o["band_lo"] = orig.band_lo;
    o["band_hi"] = orig.band_hi;
  }
  j["original_scale"] = std::move(o);
}

}  // namespace

std::string density_fit_json(const DensityFit& fit, const ErrorLaw& law, const CurveTable& scaled,
                             const IngestTransform& t) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "density";
  j["error"] = law.to_string();
  j["theta"] = vec(fit.model.theta());
  j["knots"] = knots_json(fit.model.knots());
  j["loglik"] = fit.loglik;
  j["grad_norm"] = fit.grad_norm;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["transform"] = transform_json(t);
  add_curves(j, "grid_f", scaled, density_to_original(scaled, t));
  return j.dump(2) + "\n";
}

std::string regression_fit_json(const RegressionFit& fit, const NoiseLaw& noise,
                                const ErrorLaw& law, int working_L, const CurveTable& scaled,
                                const IngestTransform& t) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "regression";
  j["error"] = law.to_string();
  j["noise"] = noise.law().to_string();
  j["working_L"] = working_L;
  j["beta"] = vec(fit.model.beta());
  j["knots"] = knots_json(fit.model.knots());
  j["excluded_obs"] = fit.excluded_obs;
  j["newton_iters"] = fit.newton_iters;
  j["eq_norm"] = fit.eq_norm;
  j["converged"] = fit.converged;
  j["ridge_solves"] = fit.ridge_solves;
  j["max_solve_residual"] = fit.max_solve_residual;
  j["transform"] = transform_json(t);
  add_curves(j, "grid_m", scaled, regression_to_original(scaled, t));
  return j.dump(2) + "\n";
}

std::string baseline_json(const std::string& method, double bandwidth, bool truncated,
                          const CurveTable& scaled, const std::vector<bool>& masked, bool density,
                          const IngestTransform& t) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "baseline";
  j["method"] = method;
  j["bandwidth"] = bandwidth;
  j["fourier_truncated"] = truncated;
  j["transform"] = transform_json(t);
  const CurveTable orig = density ? density_to_original(scaled, t) : regression_to_original(scaled, t);
  add_curves(j, density ? "grid_f" : "grid_m", scaled, orig);
  if (!masked.empty()) {
    json m = json::array();
    for (bool b : masked) m.push_back(b);
    j["masked"] = std::move(m);
  }
  return j.dump(2) + "\n";
}

std::string metric_report_csv(std::span<const MetricReport> reports) {
  std::string out =
      "task,model,method,n,replicates,seed,n_interior,h_b,grid_points,failures,mean_mae,mc_se,"
      "scaled_mean_mae,scaled_mc_se\n";
  for (const auto& r : reports) {
    out += to_string(r.design.task) + ',' + to_string(r.design.model) + ',' + to_string(r.method) +
           ',' + std::to_string(r.design.n) + ',' + std::to_string(r.design.replicates) + ',' +
           std::to_string(r.design.seed) + ',' + std::to_string(r.n_interior) + ',' +
           format_double(r.h_b) + ',' + std::to_string(r.grid_points) + ',' +
           std::to_string(r.failures) + ',' + format_double(r.mean_mae) + ',' +
           format_double(r.mc_se) + ',' + format_double(r.scaled_mean_mae) + ',' +
           format_double(r.scaled_mc_se) + '\n';
  }
  return out;
}

std::string replicate_csv(const MetricReport& report) {
  std::string out = "replicate,ok,sup_mae,note\n";
  for (const auto& r : report.replicates) {
    std::string note = r.note;
    std::replace(note.begin(), note.end(), ',', ';');
    std::replace(note.begin(), note.end(), '\n', ' ');
    out += std::to_string(r.replicate) + ',' + (r.ok ? "1" : "0") + ',' +
           (r.ok ? format_double(r.sup_mae) : std::string()) + ',' + note + '\n';
  }
  return out;
}

std::string rate_curve_csv(Task task, ErrorModel model, int replicates, std::uint64_t seed,
                           std::span<const RatePoint> points) {
  std::string out = "task,model,replicates,seed,n,n_interior,h_b,mean_mae,mc_se,scaled_mae,scaled_se\n";
  for (const auto& p : points) {
    out += to_string(task) + ',' + to_string(model) + ',' + std::to_string(replicates) + ',' +
           std::to_string(seed) + ',' + std::to_string(p.n) + ',' + std::to_string(p.n_interior) +
           ',' + format_double(p.h_b) + ',' + format_double(p.mean_mae) + ',' +
           format_double(p.mc_se) + ',' + format_double(p.scaled_mae) + ',' +
           format_double(p.scaled_se) + '\n';
  }
  return out;
}

void write_text(const std::string& path, std::string_view text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  f.close();
  if (!f) throw DataError("write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw DataError("read from '" + path + "' failed");
  return ss.str();
}

}  // namespace splinedeconv
