#pragma once

// Closed-loop scenario runner.
//
// One replication: draw a network, a baseline and an assignment from the
// replication seed; simulate the observed panel together with the all-control
// and all-treated panels (shared weights and noise); hand only the observed
// panel and the design probabilities to the estimators; score each estimate
// against the ground-truth TTE at the last round.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <future>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "csv.hpp"
#include "design.hpp"
#include "dynamics.hpp"
#include "estimators.hpp"
#include "graphgen.hpp"
#include "json.hpp"
#include "panel.hpp"
#include "rng.hpp"

namespace ese {

enum class EstimatorKind { DM, HT, EseBasic, EseInfluencer, EseCluster };

inline std::string estimator_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::DM: return "dm";
    case EstimatorKind::HT: return "ht";
    case EstimatorKind::EseBasic: return "ese_basic";
    case EstimatorKind::EseInfluencer: return "ese_influencer";
    case EstimatorKind::EseCluster: return "ese_cluster";
  }
  return "";
}

inline EstimatorKind parse_estimator(const std::string& s) {
  for (auto k : {EstimatorKind::DM, EstimatorKind::HT, EstimatorKind::EseBasic, EstimatorKind::EseInfluencer,
                 EstimatorKind::EseCluster})
    if (estimator_name(k) == s) return k;
  throw std::invalid_argument("unknown estimator '" + s + "'");
}

inline bool is_ese(EstimatorKind k) { return k != EstimatorKind::DM && k != EstimatorKind::HT; }

/// Generator parameters; the network itself is drawn per replication.
struct WeightConfig {
  std::string kind = "dense_gaussian";  // dense_gaussian | clustered | influencer
  GaussianWeightParams gaussian{1.0, 0.0, 0.0, 0.0};
  std::size_t clusters = 2;
  double w_in = 1.0;
  double w_out = 0.0;
  std::vector<std::size_t> influencers;
  double w_inf = 1.0;
  double w_base = 0.0;
};

inline WeightSet make_weights(const WeightConfig& c, std::size_t n, Seed seed) {
  if (c.kind == "dense_gaussian") return gen_dense_gaussian(n, c.gaussian, seed);
  if (c.kind == "clustered") return gen_clustered(n, c.clusters, c.w_in, c.w_out);
  if (c.kind == "influencer") return gen_influencer(n, c.influencers, c.w_inf, c.w_base);
  throw std::invalid_argument("unknown weight kind '" + c.kind + "'");
}

/// Structure of a weight config without drawing any weights.
inline Structure structure_of(const WeightConfig& c, std::size_t n) {
  if (c.kind == "dense_gaussian") return {};
  return Structure::of(make_weights(c, n, 0));
}

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::DM;
  FeatureSpec features;  // ESE only; empty selects the default set
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::size_t n_units = 1;
  Round n_rounds = 1;
  double y0_mean = 0.0;
  double y0_sd = 0.0;
  WeightConfig weights;
  DynamicsSpec dynamics;
  DesignSpec design;
  std::vector<EstimatorConfig> estimators;
  Seed base_seed = 0;
  std::size_t reps = 1;
  bool fixed_network = false;
  unsigned threads = 0;  // 0 = hardware concurrency

  /// Feature set an ESE estimator will actually use.
  FeatureSpec features_for(const EstimatorConfig& e) const {
    if (!e.features.empty()) return e.features;
    const auto meta = structure_of(weights, n_units);
    switch (e.kind) {
      case EstimatorKind::EseCluster: return cluster_features(meta);
      case EstimatorKind::EseInfluencer: return influencer_features(meta);
      default: return basic_features();
    }
  }

  void validate() const {
    if (n_units < 1) throw std::invalid_argument("n_units must be positive");
    if (n_rounds < 1) throw std::invalid_argument("n_rounds must be positive");
    if (reps < 1) throw std::invalid_argument("reps must be positive");
    if (!std::isfinite(y0_mean) || !(y0_sd >= 0.0)) throw std::invalid_argument("invalid baseline distribution");
    if (design.n_units != n_units || design.n_rounds != n_rounds)
      throw std::invalid_argument("design dimensions do not match the population");
    design.validate();
    dynamics.validate();
    if (weights.kind == "dense_gaussian") {
      const auto& g = weights.gaussian;
      if (!(g.sigma2 >= 0.0 && g.sigma2_t >= 0.0) || !std::isfinite(g.mu) || !std::isfinite(g.mu_t))
        throw std::invalid_argument("invalid dense_gaussian weight parameters");
    } else {
      make_weights(weights, n_units, 0);
    }
    if (estimators.empty()) throw std::invalid_argument("no estimators selected");
    const auto meta = structure_of(weights, n_units);
    for (const auto& e : estimators) {
      if (!is_ese(e.kind)) continue;
      if (e.kind == EstimatorKind::EseCluster && weights.kind != "clustered")
        throw std::invalid_argument("ese_cluster requires clustered weights");
      if (e.kind == EstimatorKind::EseInfluencer && weights.kind != "influencer")
        throw std::invalid_argument("ese_influencer requires influencer weights");
      validate_features(features_for(e), meta);
    }
  }
};

inline nlohmann::ordered_json to_json(const ScenarioConfig& c) {
  nlohmann::ordered_json j;
  j["name"] = c.name;
  j["n_units"] = c.n_units;
  j["n_rounds"] = c.n_rounds;
  j["y0_mean"] = c.y0_mean;
  j["y0_sd"] = c.y0_sd;
  j["weights"] = {{"kind", c.weights.kind},
                  {"mu", c.weights.gaussian.mu},
                  {"sigma2", c.weights.gaussian.sigma2},
                  {"mu_t", c.weights.gaussian.mu_t},
                  {"sigma2_t", c.weights.gaussian.sigma2_t},
                  {"clusters", c.weights.clusters},
                  {"w_in", c.weights.w_in},
                  {"w_out", c.weights.w_out},
                  {"influencers", c.weights.influencers},
                  {"w_inf", c.weights.w_inf},
                  {"w_base", c.weights.w_base}};
  j["dynamics"] = to_json(c.dynamics);
  j["design"] = {{"kind", c.design.kind == DesignSpec::Kind::Constant ? "constant" : "bernoulli"},
                 {"probs", c.design.probs},
                 {"value", c.design.value}};
  auto est = nlohmann::ordered_json::array();
  for (const auto& e : c.estimators) {
    nlohmann::ordered_json x;
    x["name"] = estimator_name(e.kind);
    if (is_ese(e.kind)) {
      auto names = nlohmann::ordered_json::array();
      for (const auto& f : c.features_for(e)) names.push_back(f.name());
      x["features"] = names;
    }
    est.push_back(x);
  }
  j["estimators"] = est;
  j["base_seed"] = c.base_seed;
  j["reps"] = c.reps;
  j["fixed_network"] = c.fixed_network;
  return j;
}

inline std::uint64_t config_hash(const ScenarioConfig& c) { return fnv1a(to_json(c).dump()); }

// ---------------------------------------------------------------------------
// One replication

struct ReplicationSeeds {
  Seed weights, noise, design, baseline;

  static ReplicationSeeds of(Seed seed) {
    return {substream(seed, "weights"), substream(seed, "noise"), substream(seed, "design"),
            substream(seed, "baseline")};
  }
};

/// The panels produced for one seed, before any estimation.
struct SimulatedWorld {
  WeightSet weights;
  TreatmentPanel observed_w;
  CovariatePanel x;
  std::vector<double> y0;
  SimulationResult observed, control, treated;
};

inline SimulatedWorld simulate_world(const ScenarioConfig& c, Seed seed) {
  const auto s = ReplicationSeeds::of(seed);
  const Seed weight_seed = c.fixed_network ? ReplicationSeeds::of(c.base_seed).weights : s.weights;
  auto weights = make_weights(c.weights, c.n_units, weight_seed);
  auto w = assign(c.design, s.design);
  auto x = CovariatePanel::round_index(c.n_units, c.n_rounds);
  std::vector<double> y0(c.n_units, c.y0_mean);
  if (c.y0_sd > 0.0) {
    CounterStream z(s.baseline);
    for (std::size_t i = 0; i < c.n_units; ++i) y0[i] += c.y0_sd * z.normal(i);
  }
  auto suite = counterfactual_suite(
      c.dynamics, weights,
      {w, TreatmentPanel::constant(c.n_units, c.n_rounds, false), TreatmentPanel::constant(c.n_units, c.n_rounds, true)},
      x, y0, s.noise);
  return {std::move(weights), std::move(w), std::move(x), std::move(y0),
          std::move(suite[0]), std::move(suite[1]), std::move(suite[2])};
}

/// What an estimator is allowed to see.
struct EstimatorInput {
  const OutcomePanel& y;
  const TreatmentPanel& w;
  const DesignSpec& design;
  const Structure& meta;
};

struct EstimateResult {
  std::optional<double> tte;
  std::vector<double> control_path;  // ESE only: propagated means, rounds 0..T
  std::vector<double> treated_path;
  std::optional<ESECoefficients> coefficients;
};

inline EstimateResult run_estimator(const EstimatorConfig& e, const FeatureSpec& features, const EstimatorInput& in) {
  EstimateResult r;
  const Round T = in.w.n_rounds();
  if (e.kind == EstimatorKind::DM || e.kind == EstimatorKind::HT) {
    const auto y = in.y.column(T);
    const auto w = in.w.column(T);
    if (e.kind == EstimatorKind::DM) {
      r.tte = dm_estimate(y, w);
    } else {
      const double pi = in.design.prob(T);
      if (pi > 0.0 && pi < 1.0) r.tte = ht_estimate(y, w, pi);
    }
    return r;
  }
  try {
    auto coeffs = fit_ese(in.y, in.w, features, in.meta);
    const double m0 = column_mean(in.y, 0);
    r.treated_path = propagate(coeffs, features, m0, constant_counterfactual(T, 1.0, in.meta), T);
    r.control_path = propagate(coeffs, features, m0, constant_counterfactual(T, 0.0, in.meta), T);
    const double tte = r.treated_path[T] - r.control_path[T];
    if (std::isfinite(tte)) r.tte = tte;
    r.coefficients = std::move(coeffs);
  } catch (const std::exception&) {
    r.tte.reset();
  }
  return r;
}

struct ReplicationRecord {
  Seed seed = 0;
  double gt_tte = 0.0;
  std::vector<double> gt_control;  // true mean trajectory, rounds 0..T
  std::vector<double> gt_treated;
  std::vector<std::string> estimators;
  std::vector<EstimateResult> results;  // aligned with estimators
  bool audit_clean = false;             // estimators saw only the observed panel

  const EstimateResult& result(const std::string& name) const {
    for (std::size_t k = 0; k < estimators.size(); ++k)
      if (estimators[k] == name) return results[k];
    throw std::out_of_range("no estimator named '" + name + "'");
  }
};

inline std::vector<double> mean_path(const OutcomePanel& y) {
  std::vector<double> m(y.n_rounds() + 1);
  for (Round t = 0; t <= y.n_rounds(); ++t) m[t] = column_mean(y, t);
  return m;
}

inline ReplicationRecord run_once(const ScenarioConfig& c, Seed seed) {
  c.validate();
  const auto world = simulate_world(c, seed);
  const Round T = c.n_rounds;
  ReplicationRecord rec;
  rec.seed = seed;
  rec.gt_tte = ground_truth_tte(world.control.outcomes, world.treated.outcomes, T);
  rec.gt_control = mean_path(world.control.outcomes);
  rec.gt_treated = mean_path(world.treated.outcomes);

  const auto meta = Structure::of(world.weights);
  const EstimatorInput in{world.observed.outcomes, world.observed_w, c.design, meta};
  rec.audit_clean = &in.y == &world.observed.outcomes && &in.y != &world.control.outcomes &&
                    &in.y != &world.treated.outcomes && &in.w == &world.observed_w;
  for (const auto& e : c.estimators) {
    rec.estimators.push_back(estimator_name(e.kind));
    rec.results.push_back(run_estimator(e, c.features_for(e), in));
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Replication and aggregation

struct EstimatorSummary {
  std::string name;
  std::vector<std::optional<double>> estimates;  // per replication, seed order
  std::vector<std::optional<double>> errors;
  std::size_t included = 0;
  std::size_t excluded = 0;
  double mean_estimate = NAN;
  double bias = NAN;      // mean error
  double variance = NAN;  // population variance of errors
  double rmse = NAN;
  std::vector<double> mean_control_path;  // ESE only
  std::vector<double> mean_treated_path;
};

struct BenchmarkReport {
  std::string scenario;
  std::size_t reps = 0;
  std::vector<Seed> seeds;
  std::vector<double> gt_tte;
  double mean_gt_tte = 0.0;
  std::vector<double> gt_control_path;  // averaged over replications
  std::vector<double> gt_treated_path;
  std::vector<EstimatorSummary> estimators;
  bool audit_clean = true;
  double runtime_seconds = 0.0;

  const EstimatorSummary& estimator(const std::string& name) const {
    for (const auto& e : estimators)
      if (e.name == name) return e;
    throw std::out_of_range("no estimator named '" + name + "'");
  }
};

namespace detail {

inline std::vector<double> average_paths(const std::vector<const std::vector<double>*>& paths) {
  if (paths.empty()) return {};
  std::vector<double> m(paths.front()->size(), 0.0);
  for (const auto* p : paths)
    for (std::size_t t = 0; t < m.size(); ++t) m[t] += (*p)[t];
  for (double& v : m) v /= static_cast<double>(paths.size());
  return m;
}

}  // namespace detail

inline BenchmarkReport aggregate(const std::string& scenario, std::vector<ReplicationRecord> records) {
  if (records.empty()) throw std::invalid_argument("aggregate: no replications");
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.seed < b.seed; });
  BenchmarkReport r;
  r.scenario = scenario;
  r.reps = records.size();
  std::vector<const std::vector<double>*> gc, gt;
  for (const auto& rec : records) {
    r.seeds.push_back(rec.seed);
    r.gt_tte.push_back(rec.gt_tte);
    r.mean_gt_tte += rec.gt_tte;
    r.audit_clean = r.audit_clean && rec.audit_clean;
    gc.push_back(&rec.gt_control);
    gt.push_back(&rec.gt_treated);
  }
  r.mean_gt_tte /= static_cast<double>(r.reps);
  r.gt_control_path = detail::average_paths(gc);
  r.gt_treated_path = detail::average_paths(gt);

  const auto& names = records.front().estimators;
  for (std::size_t k = 0; k < names.size(); ++k) {
    EstimatorSummary s;
    s.name = names[k];
    double sum_est = 0.0, sum_err = 0.0;
    std::vector<const std::vector<double>*> ec, et;
    for (const auto& rec : records) {
      const auto& res = rec.results[k];
      s.estimates.push_back(res.tte);
      if (!res.tte) {
        s.errors.push_back(std::nullopt);
        ++s.excluded;
        continue;
      }
      const double err = *res.tte - rec.gt_tte;
      s.errors.push_back(err);
      ++s.included;
      sum_est += *res.tte;
      sum_err += err;
      if (!res.control_path.empty()) {
        ec.push_back(&res.control_path);
        et.push_back(&res.treated_path);
      }
    }
    if (s.included > 0) {
      const double n = static_cast<double>(s.included);
      s.mean_estimate = sum_est / n;
      s.bias = sum_err / n;
      double ss = 0.0, sq = 0.0;
      for (const auto& e : s.errors) {
        if (!e) continue;
        ss += (*e - s.bias) * (*e - s.bias);
        sq += *e * *e;
      }
      s.variance = ss / n;
      s.rmse = std::sqrt(sq / n);
    }
    s.mean_control_path = detail::average_paths(ec);
    s.mean_treated_path = detail::average_paths(et);
    r.estimators.push_back(std::move(s));
  }
  return r;
}

/// Runs seeds base_seed .. base_seed + n_reps - 1, concurrently when threads allow.
inline BenchmarkReport replicate(const ScenarioConfig& c, std::size_t n_reps) {
  if (n_reps < 1) throw std::invalid_argument("replicate: n_reps must be at least 1");
  c.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<ReplicationRecord> records(n_reps);
  unsigned threads = c.threads ? c.threads : std::max(1U, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_reps));
  auto work = [&](std::size_t first) {
    for (std::size_t r = first; r < n_reps; r += threads) records[r] = run_once(c, c.base_seed + r);
  };
  if (threads <= 1) {
    work(0);
  } else {
    std::vector<std::future<void>> jobs;
    for (unsigned k = 0; k < threads; ++k) jobs.push_back(std::async(std::launch::async, work, k));
    for (auto& j : jobs) j.get();
  }
  auto report = aggregate(c.name, std::move(records));
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline BenchmarkReport replicate(const ScenarioConfig& c) { return replicate(c, c.reps); }

// ---------------------------------------------------------------------------
// Failure-mode sweeps

enum class SweepParameter { Trend, ThresholdC, ThresholdTau };

inline std::string sweep_parameter_name(SweepParameter p) {
  switch (p) {
    case SweepParameter::Trend: return "trend";
    case SweepParameter::ThresholdC: return "threshold_c";
    case SweepParameter::ThresholdTau: return "threshold_tau";
  }
  return "";
}

inline SweepParameter parse_sweep_parameter(const std::string& s) {
  for (auto p : {SweepParameter::Trend, SweepParameter::ThresholdC, SweepParameter::ThresholdTau})
    if (sweep_parameter_name(p) == s) return p;
  throw std::invalid_argument("unknown sweep parameter '" + s + "'");
}

struct SweepPoint {
  double value = 0.0;
  BenchmarkReport report;
};

struct SweepTable {
  SweepParameter parameter = SweepParameter::Trend;
  std::vector<SweepPoint> points;
};

inline ScenarioConfig with_parameter(ScenarioConfig c, SweepParameter p, double value) {
  switch (p) {
    case SweepParameter::Trend: c.dynamics.h.trend = value; break;
    case SweepParameter::ThresholdC:
    case SweepParameter::ThresholdTau:
      if (c.dynamics.exposure.kind != ExposureMechanism::Kind::MeanFieldThreshold)
        throw std::invalid_argument("failure_sweep: " + sweep_parameter_name(p) +
                                    " requires the mean_field_threshold exposure");
      (p == SweepParameter::ThresholdC ? c.dynamics.exposure.c : c.dynamics.exposure.tau) = value;
      break;
  }
  return c;
}

inline SweepTable failure_sweep(const ScenarioConfig& c, SweepParameter p, const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("failure_sweep: empty grid");
  SweepTable table{p, {}};
  for (double v : grid) {
    auto cfg = with_parameter(c, p, v);
    table.points.push_back({v, replicate(cfg)});
  }
  return table;
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

inline nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json optional_list(const std::vector<std::optional<double>>& xs) {
  auto a = nlohmann::ordered_json::array();
  for (const auto& x : xs) a.push_back(x ? nlohmann::ordered_json(*x) : nlohmann::ordered_json(nullptr));
  return a;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const BenchmarkReport& r, bool include_runtime = true) {
  nlohmann::ordered_json j;
  j["scenario"] = r.scenario;
  j["reps"] = r.reps;
  j["seeds"] = r.seeds;
  j["audit_clean"] = r.audit_clean;
  j["ground_truth"] = {{"mean_tte", r.mean_gt_tte},
                       {"tte", r.gt_tte},
                       {"control_path", r.gt_control_path},
                       {"treated_path", r.gt_treated_path}};
  auto est = nlohmann::ordered_json::array();
  for (const auto& s : r.estimators) {
    nlohmann::ordered_json e;
    e["name"] = s.name;
    e["included"] = s.included;
    e["excluded"] = s.excluded;
    e["mean_estimate"] = detail::number_or_null(s.mean_estimate);
    e["bias"] = detail::number_or_null(s.bias);
    e["variance"] = detail::number_or_null(s.variance);
    e["rmse"] = detail::number_or_null(s.rmse);
    e["estimates"] = detail::optional_list(s.estimates);
    if (!s.mean_control_path.empty()) {
      e["control_path"] = s.mean_control_path;
      e["treated_path"] = s.mean_treated_path;
    }
    est.push_back(e);
  }
  j["estimators"] = est;
  if (include_runtime)
    j["runtime"] = {{"total_seconds", r.runtime_seconds},
                    {"seconds_per_rep", r.runtime_seconds / static_cast<double>(std::max<std::size_t>(r.reps, 1))}};
  return j;
}

namespace detail {

inline std::string cell(const std::optional<double>& v) { return v ? csv::format_double(*v) : "NA"; }
inline std::string cell(double v) { return std::isfinite(v) ? csv::format_double(v) : "NA"; }

}  // namespace detail

/// `scenario,estimator,rep,estimate,gt,bias` rows; rep is the replication seed.
inline void write_report_csv(std::ostream& os, const BenchmarkReport& r) {
  os << "scenario,estimator,rep,estimate,gt,bias\n";
  for (const auto& s : r.estimators) {
    for (std::size_t k = 0; k < r.reps; ++k) {
      os << r.scenario << ',' << s.name << ',' << r.seeds[k] << ',' << detail::cell(s.estimates[k]) << ','
         << csv::format_double(r.gt_tte[k]) << ',' << detail::cell(s.errors[k]) << '\n';
    }
  }
}

/// One row per (grid point, estimator).
inline void write_sweep_csv(std::ostream& os, const SweepTable& t) {
  os << "parameter,value,estimator,bias,rmse,included,excluded,mean_gt\n";
  for (const auto& p : t.points) {
    for (const auto& s : p.report.estimators) {
      os << sweep_parameter_name(t.parameter) << ',' << csv::format_double(p.value) << ',' << s.name << ','
         << detail::cell(s.bias) << ',' << detail::cell(s.rmse) << ',' << s.included << ',' << s.excluded << ','
         << csv::format_double(p.report.mean_gt_tte) << '\n';
    }
  }
}

}  // namespace ese
