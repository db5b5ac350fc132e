#pragma once

// Scenario config documents. Grammar (see docs/config.md):
//
//   document := { line }
//   line     := blank | comment | "[" name "]" | key "=" value
//   value    := number | bool | string | list
//   list     := "[" [ scalar { "," scalar } ] "]"
//
// Strings are double-quoted or bare identifiers. '#' starts a comment outside
// strings. Unknown sections and keys are rejected; every error names the
// offending `section.key`.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "harness.hpp"

namespace ese {

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

namespace config {

using Scalar = std::variant<double, bool, std::string>;

struct Value {
  std::variant<Scalar, std::vector<Scalar>> v;
  int line = 0;
};

using Section = std::map<std::string, Value>;
using Document = std::map<std::string, Section>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline bool identifier(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

inline std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    if (line[k] == '"') in_str = !in_str;
    if (line[k] == '#' && !in_str) return line.substr(0, k);
  }
  return line;
}

inline Scalar parse_scalar(const std::string& s, const std::string& key) {
  if (s.empty()) throw ConfigError(key, "missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"' || s.find('"', 1) != s.size() - 1)
      throw ConfigError(key, "malformed string " + s);
    return s.substr(1, s.size() - 2);
  }
  if (s == "true") return true;
  if (s == "false") return false;
  double d = 0.0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, d);
  if (ec == std::errc() && p == end) {
    if (!std::isfinite(d)) throw ConfigError(key, "non-finite number");
    return d;
  }
  if (identifier(s) && !std::isdigit(static_cast<unsigned char>(s.front()))) return s;
  throw ConfigError(key, "cannot parse value '" + s + "'");
}

inline std::vector<std::string> split_list(const std::string& body, const std::string& key) {
  std::vector<std::string> items;
  std::string cur;
  bool in_str = false;
  for (char c : body) {
    if (c == '"') in_str = !in_str;
    if (c == ',' && !in_str) {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (in_str) throw ConfigError(key, "unterminated string");
  items.push_back(trim(cur));
  if (items.size() == 1 && items[0].empty()) return {};
  for (const auto& it : items)
    if (it.empty()) throw ConfigError(key, "empty list element");
  return items;
}

}  // namespace detail

/// Tokenizes a document into sections of typed values.
inline Document parse_document(const std::string& text) {
  Document doc;
  std::istringstream is(text);
  std::string raw, section;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const auto line = detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno), "malformed section header");
      section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      if (!detail::identifier(section)) throw ConfigError("line " + std::to_string(lineno), "bad section name");
      if (doc.count(section)) throw ConfigError(section, "section repeated");
      doc[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno), "expected key = value");
    const auto key = detail::trim(std::string_view(line).substr(0, eq));
    const auto val = detail::trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) throw ConfigError(key, "key outside of any section");
    const auto full = section + "." + key;
    if (!detail::identifier(key)) throw ConfigError(full, "bad key name");
    if (doc[section].count(key)) throw ConfigError(full, "key repeated");
    Value v;
    v.line = lineno;
    if (!val.empty() && val.front() == '[') {
      if (val.back() != ']') throw ConfigError(full, "unterminated list");
      std::vector<Scalar> xs;
      for (const auto& item : detail::split_list(val.substr(1, val.size() - 2), full))
        xs.push_back(detail::parse_scalar(item, full));
      v.v = std::move(xs);
    } else {
      v.v = detail::parse_scalar(val, full);
    }
    doc[section][key] = std::move(v);
  }
  return doc;
}

/// Typed, strict access to one section; keys must be consumed or rejected.
class SectionReader {
 public:
  SectionReader(const Document& doc, std::string name) : name_(std::move(name)) {
    auto it = doc.find(name_);
    if (it != doc.end()) sec_ = &it->second;
  }

  bool present() const { return sec_ != nullptr; }
  bool has(const std::string& key) const { return sec_ && sec_->count(key); }
  std::string full(const std::string& key) const { return name_ + "." + key; }

  double number(const std::string& key, double def) {
    const auto* s = scalar(key);
    if (!s) return def;
    if (const auto* d = std::get_if<double>(s)) return *d;
    throw ConfigError(full(key), "expected a number");
  }

  std::uint64_t unsigned_int(const std::string& key, std::uint64_t def) {
    if (!has(key)) return def;
    return to_unsigned(*scalar(key), key);
  }

  bool boolean(const std::string& key, bool def) {
    const auto* s = scalar(key);
    if (!s) return def;
    if (const auto* b = std::get_if<bool>(s)) return *b;
    throw ConfigError(full(key), "expected true or false");
  }

  std::string string(const std::string& key, const std::string& def) {
    const auto* s = scalar(key);
    if (!s) return def;
    if (const auto* v = std::get_if<std::string>(s)) return *v;
    throw ConfigError(full(key), "expected a string");
  }

  std::vector<double> numbers(const std::string& key) {
    std::vector<double> out;
    for (const auto& s : list(key)) {
      const auto* d = std::get_if<double>(&s);
      if (!d) throw ConfigError(full(key), "expected a list of numbers");
      out.push_back(*d);
    }
    return out;
  }

  std::vector<std::size_t> indices(const std::string& key) {
    std::vector<std::size_t> out;
    for (const auto& s : list(key)) out.push_back(to_unsigned(s, key));
    return out;
  }

  std::vector<std::string> strings(const std::string& key) {
    std::vector<std::string> out;
    for (const auto& s : list(key)) {
      const auto* v = std::get_if<std::string>(&s);
      if (!v) throw ConfigError(full(key), "expected a list of strings");
      out.push_back(*v);
    }
    return out;
  }

  /// Rejects every key not in `allowed`.
  void only(std::initializer_list<const char*> allowed) const {
    if (!sec_) return;
    for (const auto& [k, v] : *sec_) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
        throw ConfigError(full(k), "unknown key");
    }
  }

 private:
  const Scalar* scalar(const std::string& key) const {
    if (!has(key)) return nullptr;
    const auto& v = sec_->at(key).v;
    if (const auto* s = std::get_if<Scalar>(&v)) return s;
    throw ConfigError(full(key), "expected a scalar, found a list");
  }

  const std::vector<Scalar>& list(const std::string& key) const {
    if (!has(key)) throw ConfigError(full(key), "required");
    const auto& v = sec_->at(key).v;
    if (const auto* l = std::get_if<std::vector<Scalar>>(&v)) return *l;
    throw ConfigError(full(key), "expected a list");
  }

  std::uint64_t to_unsigned(const Scalar& s, const std::string& key) const {
    const auto* d = std::get_if<double>(&s);
    if (!d || *d < 0.0 || *d != std::floor(*d) || *d > 9.007199254740992e15)
      throw ConfigError(full(key), "expected a non-negative integer");
    return static_cast<std::uint64_t>(*d);
  }

  std::string name_;
  const Section* sec_ = nullptr;
};

/// Optional failure-sweep request carried alongside a scenario.
struct SweepRequest {
  SweepParameter parameter = SweepParameter::Trend;
  std::vector<double> grid;
};

struct ParsedConfig {
  ScenarioConfig scenario;
  std::optional<SweepRequest> sweep;
};

}  // namespace config

/// Parses and validates a scenario document, applying defaults.
inline config::ParsedConfig parse_config_full(const std::string& text) {
  using config::SectionReader;
  const auto doc = config::parse_document(text);
  static const std::vector<std::string> known{"population", "weights", "dynamics", "design", "estimators", "run", "sweep"};
  for (const auto& [name, sec] : doc)
    if (std::find(known.begin(), known.end(), name) == known.end()) throw ConfigError(name, "unknown section");

  ScenarioConfig c;
  SectionReader pop(doc, "population");
  pop.only({"n_units", "n_rounds", "y0_mean", "y0_sd"});
  if (!pop.present()) throw ConfigError("population", "section required");
  if (!pop.has("n_units")) throw ConfigError("population.n_units", "required");
  if (!pop.has("n_rounds")) throw ConfigError("population.n_rounds", "required");
  c.n_units = pop.unsigned_int("n_units", 0);
  if (c.n_units < 1) throw ConfigError("population.n_units", "must be at least 1");
  c.n_rounds = pop.unsigned_int("n_rounds", 0);
  if (c.n_rounds < 1) throw ConfigError("population.n_rounds", "must be at least 1");
  c.y0_mean = pop.number("y0_mean", 0.0);
  c.y0_sd = pop.number("y0_sd", 0.0);
  if (c.y0_sd < 0.0) throw ConfigError("population.y0_sd", "must be non-negative");

  SectionReader wt(doc, "weights");
  wt.only({"kind", "mu", "sigma2", "mu_t", "sigma2_t", "clusters", "w_in", "w_out", "influencers", "w_inf", "w_base"});
  auto& W = c.weights;
  W.kind = wt.string("kind", "dense_gaussian");
  if (W.kind == "dense_gaussian") {
    wt.only({"kind", "mu", "sigma2", "mu_t", "sigma2_t"});
    W.gaussian = {wt.number("mu", 1.0), wt.number("sigma2", 0.0), wt.number("mu_t", 0.0), wt.number("sigma2_t", 0.0)};
    if (W.gaussian.sigma2 < 0.0) throw ConfigError("weights.sigma2", "must be non-negative");
    if (W.gaussian.sigma2_t < 0.0) throw ConfigError("weights.sigma2_t", "must be non-negative");
  } else if (W.kind == "clustered") {
    wt.only({"kind", "clusters", "w_in", "w_out"});
    W.clusters = wt.unsigned_int("clusters", 2);
    if (W.clusters < 1 || W.clusters > c.n_units) throw ConfigError("weights.clusters", "must lie in [1, n_units]");
    W.w_in = wt.number("w_in", 1.0);
    W.w_out = wt.number("w_out", 0.0);
  } else if (W.kind == "influencer") {
    wt.only({"kind", "influencers", "w_inf", "w_base"});
    W.influencers = wt.indices("influencers");
    W.w_inf = wt.number("w_inf", 1.0);
    W.w_base = wt.number("w_base", 0.0);
    try {
      gen_influencer(c.n_units, W.influencers, W.w_inf, W.w_base);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("weights.influencers", e.what());
    }
  } else {
    throw ConfigError("weights.kind", "unknown kind '" + W.kind + "'");
  }

  SectionReader dy(doc, "dynamics");
  dy.only({"h", "alpha_w", "alpha_y", "alpha_x", "alpha_0", "trend", "scale", "g", "b_w", "b_y", "exposure", "tau", "c",
           "noise_sd"});
  auto& D = c.dynamics;
  const auto h = dy.string("h", "linear");
  if (h == "linear") {
    D.h.kind = UnitFunction::Kind::Linear;
    if (dy.has("scale")) throw ConfigError("dynamics.scale", "only valid with h = saturating");
  } else if (h == "saturating") {
    D.h.kind = UnitFunction::Kind::Saturating;
  } else {
    throw ConfigError("dynamics.h", "unknown unit function '" + h + "'");
  }
  D.h.alpha_w = dy.number("alpha_w", 0.0);
  D.h.alpha_y = dy.number("alpha_y", 1.0);
  if (dy.has("alpha_x")) {
    D.h.alpha_x = dy.numbers("alpha_x");
    if (D.h.alpha_x.size() > 1) throw ConfigError("dynamics.alpha_x", "covariate dimension is 1");
  }
  D.h.alpha_0 = dy.number("alpha_0", 0.0);
  D.h.trend = dy.number("trend", 0.0);
  D.h.scale = dy.number("scale", 1.0);
  if (!(D.h.scale > 0.0)) throw ConfigError("dynamics.scale", "must be positive");
  const auto g = dy.string("g", "zero");
  if (g == "zero") {
    D.g.kind = PeerFunction::Kind::Zero;
    if (dy.has("b_w")) throw ConfigError("dynamics.b_w", "only valid with g = linear_peer");
    if (dy.has("b_y")) throw ConfigError("dynamics.b_y", "only valid with g = linear_peer");
  } else if (g == "linear_peer") {
    D.g = {PeerFunction::Kind::LinearPeer, dy.number("b_w", 0.0), dy.number("b_y", 0.0)};
  } else {
    throw ConfigError("dynamics.g", "unknown peer function '" + g + "'");
  }
  const auto ex = dy.string("exposure", "weighted_sum");
  if (ex == "weighted_sum") {
    D.exposure.kind = ExposureMechanism::Kind::WeightedSum;
    if (dy.has("tau")) throw ConfigError("dynamics.tau", "only valid with exposure = mean_field_threshold");
    if (dy.has("c")) throw ConfigError("dynamics.c", "only valid with exposure = mean_field_threshold");
  } else if (ex == "mean_field_threshold") {
    D.exposure = {ExposureMechanism::Kind::MeanFieldThreshold, dy.number("tau", 0.5), dy.number("c", 0.0)};
    if (!(D.exposure.tau > 0.0 && D.exposure.tau < 1.0)) throw ConfigError("dynamics.tau", "must lie in (0, 1)");
  } else {
    throw ConfigError("dynamics.exposure", "unknown exposure mechanism '" + ex + "'");
  }
  D.unit_noise_sd = dy.number("noise_sd", 0.0);
  if (D.unit_noise_sd < 0.0) throw ConfigError("dynamics.noise_sd", "must be non-negative");

  SectionReader de(doc, "design");
  de.only({"kind", "probs", "value"});
  if (!de.present()) throw ConfigError("design", "section required");
  const auto dk = de.string("kind", "bernoulli");
  if (dk == "bernoulli") {
    if (de.has("value")) throw ConfigError("design.value", "only valid with kind = constant");
    const auto probs = de.numbers("probs");
    if (probs.size() != c.n_rounds)
      throw ConfigError("design.probs", "has " + std::to_string(probs.size()) + " entries, expected n_rounds = " +
                                            std::to_string(c.n_rounds));
    for (double p : probs)
      if (p < 0.0 || p > 1.0) throw ConfigError("design.probs", "probabilities must lie in [0, 1]");
    c.design = DesignSpec::bernoulli(c.n_units, probs);
  } else if (dk == "ramp") {
    if (de.has("probs")) throw ConfigError("design.probs", "not allowed with kind = ramp");
    if (de.has("value")) throw ConfigError("design.value", "only valid with kind = constant");
    if (c.n_rounds != 4) throw ConfigError("design.kind", "ramp requires n_rounds = 4");
    c.design = ramp_design(c.n_units);
  } else if (dk == "constant") {
    if (de.has("probs")) throw ConfigError("design.probs", "not allowed with kind = constant");
    const auto v = de.unsigned_int("value", 0);
    if (v > 1) throw ConfigError("design.value", "must be 0 or 1");
    c.design = DesignSpec::constant(c.n_units, c.n_rounds, static_cast<int>(v));
  } else {
    throw ConfigError("design.kind", "unknown design '" + dk + "'");
  }

  SectionReader es(doc, "estimators");
  es.only({"use", "ese_basic", "ese_cluster", "ese_influencer"});
  std::vector<std::string> use{"dm", "ht", "ese_basic"};
  if (es.has("use")) use = es.strings("use");
  if (use.empty()) throw ConfigError("estimators.use", "at least one estimator required");
  const auto meta = structure_of(W, c.n_units);
  for (const auto& name : use) {
    EstimatorConfig e;
    try {
      e.kind = parse_estimator(name);
    } catch (const std::invalid_argument& err) {
      throw ConfigError("estimators.use", err.what());
    }
    for (const auto& prev : c.estimators)
      if (prev.kind == e.kind) throw ConfigError("estimators.use", "'" + name + "' listed twice");
    if (e.kind == EstimatorKind::EseCluster && W.kind != "clustered")
      throw ConfigError("estimators.use", "ese_cluster requires weights.kind = clustered");
    if (e.kind == EstimatorKind::EseInfluencer && W.kind != "influencer")
      throw ConfigError("estimators.use", "ese_influencer requires weights.kind = influencer");
    c.estimators.push_back(e);
  }
  for (const char* key : {"ese_basic", "ese_cluster", "ese_influencer"}) {
    if (!es.has(key)) continue;
    const auto kind = parse_estimator(key);
    auto it = std::find_if(c.estimators.begin(), c.estimators.end(), [&](const auto& e) { return e.kind == kind; });
    if (it == c.estimators.end()) throw ConfigError(es.full(key), "features given for an estimator not in use");
    try {
      for (const auto& f : es.strings(key)) it->features.push_back(Feature::parse(f));
      validate_features(it->features, meta);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& err) {
      throw ConfigError(es.full(key), err.what());
    }
  }

  SectionReader run(doc, "run");
  run.only({"name", "seed", "reps", "fixed_network", "threads"});
  c.name = run.string("name", "scenario");
  c.base_seed = run.unsigned_int("seed", 0);
  c.reps = run.unsigned_int("reps", 1);
  if (c.reps < 1) throw ConfigError("run.reps", "must be at least 1");
  c.fixed_network = run.boolean("fixed_network", false);
  c.threads = static_cast<unsigned>(run.unsigned_int("threads", 0));

  config::ParsedConfig out{c, std::nullopt};
  SectionReader sw(doc, "sweep");
  sw.only({"parameter", "grid"});
  if (sw.present()) {
    config::SweepRequest req;
    try {
      req.parameter = parse_sweep_parameter(sw.string("parameter", "trend"));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& err) {
      throw ConfigError("sweep.parameter", err.what());
    }
    req.grid = sw.numbers("grid");
    if (req.grid.empty()) throw ConfigError("sweep.grid", "must not be empty");
    if (req.parameter != SweepParameter::Trend && D.exposure.kind != ExposureMechanism::Kind::MeanFieldThreshold)
      throw ConfigError("sweep.parameter", "requires dynamics.exposure = mean_field_threshold");
    if (req.parameter == SweepParameter::ThresholdTau)
      for (double v : req.grid)
        if (!(v > 0.0 && v < 1.0)) throw ConfigError("sweep.grid", "tau values must lie in (0, 1)");
    out.sweep = std::move(req);
  }

  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& err) {
    throw ConfigError("config", err.what());
  }
  out.scenario = c;
  return out;
}

inline ScenarioConfig parse_config(const std::string& text) { return parse_config_full(text).scenario; }

inline std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace ese
