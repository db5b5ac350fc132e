#pragma once

// Treatment-effect estimators.
//
// Classical: difference in means (DM) and Horvitz-Thompson (HT) on the last
// observed round.
//
// Evolution-based: fit the one-step expansion
//
//   Y(i,t) = nu_w W(i,t) + nu_y Y(i,t-1) + nu_v V_t + nu_wy W(i,t) Y(i,t-1)
//          + nu_wv W(i,t) V_t + nu_0
//
// by pooled least squares on the observed panel, with V_t represented by
// scenario-level aggregates (treated fraction, lagged mean, cluster
// fractions, influencer treatments). Counterfactual mean trajectories are then
// produced by running the fitted map forward from the shared round-0 mean
// under another assignment.
//
// The Taylor-coefficient oracle maps an analytic three-argument evolution map
// S(w, y, v) to the same coefficients, using exact partials at a baseline
// (0, y0, v0); finite_diff_partials provides an independent numerical route.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "csv.hpp"
#include "graphgen.hpp"
#include "json.hpp"
#include "panel.hpp"

namespace ese {

// ---------------------------------------------------------------------------
// Classical estimators

/// Treated mean minus control mean; nullopt when either arm is empty.
inline std::optional<double> dm_estimate(std::span<const double> y, std::span<const double> w) {
  if (y.size() != w.size() || y.empty()) throw std::invalid_argument("dm_estimate: length mismatch");
  double st = 0.0, sc = 0.0, nt = 0.0, nc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w[i] != 0.0) {
      st += y[i];
      nt += 1.0;
    } else {
      sc += y[i];
      nc += 1.0;
    }
  }
  if (nt == 0.0 || nc == 0.0) return std::nullopt;
  return st / nt - sc / nc;
}

inline double ht_estimate(std::span<const double> y, std::span<const double> w, double pi) {
  if (y.size() != w.size() || y.empty()) throw std::invalid_argument("ht_estimate: length mismatch");
  if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("ht_estimate: pi must lie strictly in (0, 1)");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i] / pi - y[i] * (1.0 - w[i]) / (1.0 - pi);
  return s / static_cast<double>(y.size());
}

// ---------------------------------------------------------------------------
// Feature sets

struct Feature {
  enum class Kind {
    OwnTreatment,
    LaggedOutcome,
    TreatedFraction,
    LaggedMean,
    OwnTimesLag,
    OwnTimesFraction,
    ClusterFraction,
    InfluencerTreatment,
    Intercept
  };
  Kind kind;
  std::size_t index = 0;  // cluster id or influencer unit

  std::string name() const {
    switch (kind) {
      case Kind::OwnTreatment: return "own_treatment";
      case Kind::LaggedOutcome: return "lagged_outcome";
      case Kind::TreatedFraction: return "treated_fraction";
      case Kind::LaggedMean: return "lagged_mean";
      case Kind::OwnTimesLag: return "own_times_lag";
      case Kind::OwnTimesFraction: return "own_times_fraction";
      case Kind::ClusterFraction: return "cluster_fraction[" + std::to_string(index) + "]";
      case Kind::InfluencerTreatment: return "influencer_treatment[" + std::to_string(index) + "]";
      case Kind::Intercept: return "intercept";
    }
    return {};
  }

  static Feature parse(const std::string& s) {
    static const std::map<std::string, Kind> plain{
        {"own_treatment", Kind::OwnTreatment},   {"lagged_outcome", Kind::LaggedOutcome},
        {"treated_fraction", Kind::TreatedFraction}, {"lagged_mean", Kind::LaggedMean},
        {"own_times_lag", Kind::OwnTimesLag},    {"own_times_fraction", Kind::OwnTimesFraction},
        {"intercept", Kind::Intercept}};
    if (auto it = plain.find(s); it != plain.end()) return {it->second, 0};
    auto indexed = [&](const std::string& prefix, Kind k) -> std::optional<Feature> {
      if (s.rfind(prefix + "[", 0) != 0 || s.back() != ']') return std::nullopt;
      const auto digits = s.substr(prefix.size() + 1, s.size() - prefix.size() - 2);
      if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
      return Feature{k, std::stoul(digits)};
    };
    if (auto f = indexed("cluster_fraction", Kind::ClusterFraction)) return *f;
    if (auto f = indexed("influencer_treatment", Kind::InfluencerTreatment)) return *f;
    throw std::invalid_argument("unknown feature '" + s + "'");
  }

  friend bool operator==(const Feature&, const Feature&) = default;
};

using FeatureSpec = std::vector<Feature>;

/// Structural metadata needed by cluster and influencer features.
struct Structure {
  std::vector<std::size_t> membership;  // cluster per unit; empty if unclustered
  std::size_t n_clusters = 0;
  std::vector<std::size_t> influencers;

  static Structure of(const WeightSet& w) {
    Structure s;
    if (const auto* c = w.as<Clustered>()) {
      s.membership = c->membership;
      s.n_clusters = c->k;
    }
    if (const auto* inf = w.as<Influencer>()) s.influencers = inf->influencers;
    return s;
  }
};

inline void validate_features(const FeatureSpec& f, const Structure& meta) {
  if (f.empty()) throw std::invalid_argument("feature set is empty");
  int intercepts = 0;
  for (const auto& x : f) {
    if (x.kind == Feature::Kind::Intercept) ++intercepts;
    if (x.kind == Feature::Kind::ClusterFraction && x.index >= meta.n_clusters)
      throw std::invalid_argument("feature " + x.name() + " requires clustered structure with that cluster");
    if (x.kind == Feature::Kind::InfluencerTreatment &&
        std::find(meta.influencers.begin(), meta.influencers.end(), x.index) == meta.influencers.end())
      throw std::invalid_argument("feature " + x.name() + " requires that unit to be a listed influencer");
  }
  if (intercepts > 1) throw std::invalid_argument("intercept listed more than once");
}

/// own_treatment, lagged_outcome, treated_fraction, lagged_mean,
/// own_times_lag, intercept.
inline FeatureSpec basic_features() {
  using K = Feature::Kind;
  return {{K::OwnTreatment}, {K::LaggedOutcome}, {K::TreatedFraction}, {K::LaggedMean}, {K::OwnTimesLag}, {K::Intercept}};
}

/// Basic features with the treated fraction split by cluster.
inline FeatureSpec cluster_features(const Structure& meta) {
  using K = Feature::Kind;
  FeatureSpec f{{K::OwnTreatment}, {K::LaggedOutcome}, {K::LaggedMean}, {K::OwnTimesLag}};
  for (std::size_t l = 0; l < meta.n_clusters; ++l) f.push_back({K::ClusterFraction, l});
  f.push_back({K::Intercept});
  return f;
}

/// Basic features plus each influencer's own treatment.
inline FeatureSpec influencer_features(const Structure& meta) {
  auto f = basic_features();
  f.pop_back();
  for (auto j : meta.influencers) f.push_back({Feature::Kind::InfluencerTreatment, j});
  f.push_back({Feature::Kind::Intercept});
  return f;
}

// ---------------------------------------------------------------------------
// Coefficients

struct ESECoefficients {
  std::vector<std::string> names;
  std::vector<double> values;
  double rss = 0.0;
  std::size_t rows = 0;
  std::size_t rank = 0;

  double operator[](const std::string& name) const {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) return values[k];
    throw std::out_of_range("no coefficient named '" + name + "'");
  }
};

inline nlohmann::ordered_json to_json(const ESECoefficients& c) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json coef = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < c.names.size(); ++k) coef[c.names[k]] = c.values[k];
  j["coefficients"] = std::move(coef);
  j["diagnostics"] = {{"rss", c.rss}, {"rows", c.rows}, {"rank", c.rank}};
  return j;
}

namespace detail {

struct RoundAggregates {
  double treated_fraction = 0.0;
  double lagged_mean = 0.0;
  std::vector<double> cluster_fractions;
};

inline RoundAggregates aggregates(const OutcomePanel& y, const TreatmentPanel& w, Round t, const Structure& meta) {
  RoundAggregates a;
  a.treated_fraction = column_mean(w, t);
  a.lagged_mean = column_mean(y, t - 1);
  if (meta.n_clusters > 0) {
    std::vector<double> count(meta.n_clusters, 0.0);
    a.cluster_fractions.assign(meta.n_clusters, 0.0);
    for (std::size_t i = 0; i < w.n_units(); ++i) {
      a.cluster_fractions[meta.membership[i]] += w.at(i, t);
      count[meta.membership[i]] += 1.0;
    }
    for (std::size_t l = 0; l < meta.n_clusters; ++l) a.cluster_fractions[l] /= count[l];
  }
  return a;
}

inline double feature_value(const Feature& f, const OutcomePanel& y, const TreatmentPanel& w, std::size_t i, Round t,
                            const RoundAggregates& a) {
  using K = Feature::Kind;
  switch (f.kind) {
    case K::OwnTreatment: return w.at(i, t);
    case K::LaggedOutcome: return y.at(i, t - 1);
    case K::TreatedFraction: return a.treated_fraction;
    case K::LaggedMean: return a.lagged_mean;
    case K::OwnTimesLag: return w.at(i, t) * y.at(i, t - 1);
    case K::OwnTimesFraction: return w.at(i, t) * a.treated_fraction;
    case K::ClusterFraction: return a.cluster_fractions.at(f.index);
    case K::InfluencerTreatment: return w.at(f.index, t);
    case K::Intercept: return 1.0;
  }
  return 0.0;
}

inline ESECoefficients solve_min_norm(const Eigen::MatrixXd& X, const Eigen::VectorXd& yv, const FeatureSpec& features) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(1e-10);
  cod.compute(X);
  const Eigen::VectorXd beta = cod.solve(yv);
  ESECoefficients c;
  for (std::size_t k = 0; k < features.size(); ++k) {
    c.names.push_back(features[k].name());
    c.values.push_back(beta(static_cast<Eigen::Index>(k)));
    if (!std::isfinite(c.values.back())) throw std::runtime_error("fit_ese: non-finite coefficient");
  }
  c.rss = (yv - X * beta).squaredNorm();
  c.rows = static_cast<std::size_t>(X.rows());
  c.rank = static_cast<std::size_t>(cod.rank());
  return c;
}

inline void check_pair(const OutcomePanel& y, const TreatmentPanel& w) {
  if (y.n_units() != w.n_units() || y.n_rounds() != w.n_rounds())
    throw std::invalid_argument("fit_ese: outcome and treatment panels disagree in shape");
}

}  // namespace detail

/// Regressor matrix with one row per (unit, round), rows ordered unit-major
/// within round: row (t-1)*N + i.
inline Eigen::MatrixXd design_matrix(const OutcomePanel& y, const TreatmentPanel& w, const FeatureSpec& features,
                                     const Structure& meta) {
  detail::check_pair(y, w);
  validate_features(features, meta);
  const std::size_t n = w.n_units();
  const Round T = w.n_rounds();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n * T), static_cast<Eigen::Index>(features.size()));
  for (Round t = 1; t <= T; ++t) {
    const auto agg = detail::aggregates(y, w, t, meta);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < features.size(); ++k)
        X(static_cast<Eigen::Index>((t - 1) * n + i), static_cast<Eigen::Index>(k)) =
            detail::feature_value(features[k], y, w, i, t, agg);
  }
  return X;
}

inline Eigen::VectorXd response_vector(const OutcomePanel& y) {
  const std::size_t n = y.n_units();
  const Round T = y.n_rounds();
  Eigen::VectorXd v(static_cast<Eigen::Index>(n * T));
  for (Round t = 1; t <= T; ++t)
    for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>((t - 1) * n + i)) = y.at(i, t);
  return v;
}

/// Pooled least squares with time-invariant coefficients; minimum-norm
/// solution when the regressors are rank deficient.
inline ESECoefficients fit_ese(const OutcomePanel& y, const TreatmentPanel& w, const FeatureSpec& features,
                               const Structure& meta = {}) {
  const auto X = design_matrix(y, w, features, meta);
  return detail::solve_min_norm(X, response_vector(y), features);
}

/// One coefficient set per round, fitted across independent replications of
/// the experiment. Round-level features are constant within a single panel,
/// so this needs several replications to identify them.
inline std::vector<ESECoefficients> fit_ese_per_round(std::span<const OutcomePanel> ys,
                                                      std::span<const TreatmentPanel> ws, const FeatureSpec& features,
                                                      const Structure& meta = {}) {
  if (ys.empty() || ys.size() != ws.size()) throw std::invalid_argument("fit_ese_per_round: replication count mismatch");
  validate_features(features, meta);
  const std::size_t n = ws.front().n_units();
  const Round T = ws.front().n_rounds();
  for (std::size_t r = 0; r < ys.size(); ++r) {
    detail::check_pair(ys[r], ws[r]);
    if (ws[r].n_units() != n || ws[r].n_rounds() != T)
      throw std::invalid_argument("fit_ese_per_round: replications differ in shape");
  }
  std::vector<ESECoefficients> out;
  const auto rows = static_cast<Eigen::Index>(n * ys.size());
  for (Round t = 1; t <= T; ++t) {
    Eigen::MatrixXd X(rows, static_cast<Eigen::Index>(features.size()));
    Eigen::VectorXd yv(rows);
    for (std::size_t r = 0; r < ys.size(); ++r) {
      const auto agg = detail::aggregates(ys[r], ws[r], t, meta);
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(r * n + i);
        for (std::size_t k = 0; k < features.size(); ++k)
          X(row, static_cast<Eigen::Index>(k)) = detail::feature_value(features[k], ys[r], ws[r], i, t, agg);
        yv(row) = ys[r].at(i, t);
      }
    }
    out.push_back(detail::solve_min_norm(X, yv, features));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Counterfactual propagation

/// Scenario-level description of one counterfactual round.
struct CounterfactualRound {
  double treated_fraction = 0.0;
  std::vector<double> cluster_fractions;
  std::map<std::size_t, double> influencer_treatment;
};

using Counterfactual = std::vector<CounterfactualRound>;  // rounds 1..T

/// Every unit assigned `value` in every round.
inline Counterfactual constant_counterfactual(Round T, double value, const Structure& meta) {
  CounterfactualRound r;
  r.treated_fraction = value;
  r.cluster_fractions.assign(meta.n_clusters, value);
  for (auto j : meta.influencers) r.influencer_treatment[j] = value;
  return Counterfactual(T, r);
}

namespace detail {

inline double feature_mean(const Feature& f, const CounterfactualRound& cf, double m_prev, Round t) {
  using K = Feature::Kind;
  const double p = cf.treated_fraction;
  switch (f.kind) {
    case K::OwnTreatment: return p;
    case K::LaggedOutcome: return m_prev;
    case K::TreatedFraction: return p;
    case K::LaggedMean: return m_prev;
    case K::OwnTimesLag: return p * m_prev;  // W(t) independent of Y(t-1) under randomization
    case K::OwnTimesFraction: return p * p;
    case K::ClusterFraction:
      if (f.index >= cf.cluster_fractions.size())
        throw std::invalid_argument("propagate: round " + std::to_string(t) + " lacks " + f.name());
      return cf.cluster_fractions[f.index];
    case K::InfluencerTreatment: {
      auto it = cf.influencer_treatment.find(f.index);
      if (it == cf.influencer_treatment.end())
        throw std::invalid_argument("propagate: round " + std::to_string(t) + " lacks " + f.name());
      return it->second;
    }
    case K::Intercept: return 1.0;
  }
  return 0.0;
}

inline void check_aligned(const ESECoefficients& c, const FeatureSpec& features) {
  if (c.values.size() != features.size()) throw std::invalid_argument("propagate: coefficients not aligned with features");
  for (std::size_t k = 0; k < features.size(); ++k)
    if (c.names[k] != features[k].name()) throw std::invalid_argument("propagate: coefficient/feature name mismatch");
}

}  // namespace detail

/// Mean trajectory m_0..m_T from a shared round-0 mean.
inline std::vector<double> propagate(const ESECoefficients& coeffs, const FeatureSpec& features, double y0_mean,
                                     const Counterfactual& cf, Round T) {
  detail::check_aligned(coeffs, features);
  if (cf.size() < T) throw std::invalid_argument("propagate: counterfactual does not cover every round");
  std::vector<double> m(T + 1);
  m[0] = y0_mean;
  for (Round t = 1; t <= T; ++t) {
    double s = 0.0;
    for (std::size_t k = 0; k < features.size(); ++k)
      s += coeffs.values[k] * detail::feature_mean(features[k], cf[t - 1], m[t - 1], t);
    m[t] = s;
  }
  return m;
}

/// Per-round coefficients (one set per round).
inline std::vector<double> propagate(std::span<const ESECoefficients> per_round, const FeatureSpec& features,
                                     double y0_mean, const Counterfactual& cf) {
  const Round T = per_round.size();
  if (cf.size() < T) throw std::invalid_argument("propagate: counterfactual does not cover every round");
  std::vector<double> m(T + 1);
  m[0] = y0_mean;
  for (Round t = 1; t <= T; ++t) {
    detail::check_aligned(per_round[t - 1], features);
    double s = 0.0;
    for (std::size_t k = 0; k < features.size(); ++k)
      s += per_round[t - 1].values[k] * detail::feature_mean(features[k], cf[t - 1], m[t - 1], t);
    m[t] = s;
  }
  return m;
}

/// All-treated minus all-control propagated means at round T.
inline double tte_from_coeffs(const ESECoefficients& coeffs, const FeatureSpec& features, double y0_mean, Round T,
                              const Structure& meta = {}) {
  if (T == 0) return 0.0;
  const auto treated = propagate(coeffs, features, y0_mean, constant_counterfactual(T, 1.0, meta), T);
  const auto control = propagate(coeffs, features, y0_mean, constant_counterfactual(T, 0.0, meta), T);
  return treated[T] - control[T];
}

// ---------------------------------------------------------------------------
// Analytic coefficient oracle

/// Polynomial evolution map S(w, y, v) = sum c * w^p y^q v^r, total degree <= 3.
class AnalyticMapping {
 public:
  struct Term {
    double coef;
    int pw, py, pv;
  };

  explicit AnalyticMapping(std::vector<Term> terms, std::string name = "polynomial")
      : terms_(std::move(terms)), name_(std::move(name)) {
    for (const auto& t : terms_) {
      if (t.pw < 0 || t.py < 0 || t.pv < 0 || t.pw + t.py + t.pv > 3)
        throw std::invalid_argument("AnalyticMapping: terms must have total degree at most 3");
      if (!std::isfinite(t.coef)) throw std::invalid_argument("AnalyticMapping: non-finite coefficient");
    }
  }

  /// a_w w + a_y y + a_v v + c
  static AnalyticMapping linear(double a_w, double a_y, double a_v, double c) {
    return AnalyticMapping({{a_w, 1, 0, 0}, {a_y, 0, 1, 0}, {a_v, 0, 0, 1}, {c, 0, 0, 0}}, "linear");
  }

  /// k w y
  static AnalyticMapping bilinear(double k = 1.0) { return AnalyticMapping({{k, 1, 1, 0}}, "bilinear"); }

  const std::string& name() const noexcept { return name_; }
  std::span<const Term> terms() const noexcept { return terms_; }

  double operator()(double w, double y, double v) const { return derivative(w, y, v, 0, 0, 0); }

  /// d^(a+b+c) S / dw^a dy^b dv^c
  double derivative(double w, double y, double v, int a, int b, int c) const {
    double s = 0.0;
    for (const auto& t : terms_) s += t.coef * mono(w, t.pw, a) * mono(y, t.py, b) * mono(v, t.pv, c);
    return s;
  }

  /// True when every term survives the one-step expansion exactly: no
  /// (y, v) second derivatives and no third derivatives.
  bool expansion_exact() const {
    for (const auto& t : terms_) {
      const int deg = t.pw + t.py + t.pv;
      if (deg == 3) return false;
      if (deg == 2 && t.pw == 0) return false;
    }
    return true;
  }

 private:
  static double mono(double x, int p, int d) {
    if (d > p) return 0.0;
    double f = 1.0;
    for (int k = 0; k < d; ++k) f *= static_cast<double>(p - k);
    return f * std::pow(x, p - d);
  }

  std::vector<Term> terms_;
  std::string name_;
};

/// Fixed set of named evolution maps used by the coefficient oracle.
inline std::vector<AnalyticMapping> mapping_catalog() {
  using M = AnalyticMapping;
  return {M::linear(1.0, 0.8, 0.5, 0.2),
          M::bilinear(0.7),
          M({{0.9, 1, 0, 0}, {0.6, 0, 1, 0}, {0.4, 1, 0, 1}}, "own_times_exposure"),
          M({{1.5, 2, 0, 0}, {0.5, 0, 1, 0}}, "quadratic_treatment"),
          M({{0.3, 1, 0, 0}, {0.9, 0, 1, 0}, {0.2, 0, 0, 1}, {0.5, 1, 1, 0}, {-0.1, 1, 0, 1}, {0.05, 0, 0, 0}},
            "multilinear"),
          M({{1.0, 0, 1, 0}, {-1.0 / 3.0, 0, 3, 0}, {0.8, 1, 0, 0}}, "cubic_saturation"),
          M({{0.2, 0, 2, 0}, {-0.3, 0, 1, 1}, {0.25, 0, 0, 2}, {0.6, 1, 1, 1}, {1.0, 1, 0, 0}}, "mixed_curvature")};
}

struct Baseline {
  double y0 = 0.0;
  double v0 = 0.0;
};

/// S and the partials entering the coefficients, at (0, y0, v0).
struct PartialTable {
  double s = 0.0;
  double dx = 0.0, dy = 0.0, dz = 0.0;
  double dxx = 0.0, dxy = 0.0, dxz = 0.0;
};

inline PartialTable exact_partials(const AnalyticMapping& m, const Baseline& b) {
  auto d = [&](int a, int c, int e) { return m.derivative(0.0, b.y0, b.v0, a, c, e); };
  return {d(0, 0, 0), d(1, 0, 0), d(0, 1, 0), d(0, 0, 1), d(2, 0, 0), d(1, 1, 0), d(1, 0, 1)};
}

/// Central differences around (0, y0, v0). First partials use step h;
/// second partials use step sqrt(h), which keeps cancellation error near
/// machine precision for the polynomial catalog.
inline PartialTable finite_diff_partials(const std::function<double(double, double, double)>& S, const Baseline& b,
                                         double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_partials: step must be positive");
  auto f = [&](double w, double y, double v) {
    const double r = S(w, y, v);
    if (!std::isfinite(r)) throw std::domain_error("finite_diff_partials: non-finite evaluation near baseline");
    return r;
  };
  const double y = b.y0, v = b.v0;
  const double k = std::sqrt(h);
  PartialTable p;
  p.s = f(0.0, y, v);
  p.dx = (f(h, y, v) - f(-h, y, v)) / (2 * h);
  p.dy = (f(0.0, y + h, v) - f(0.0, y - h, v)) / (2 * h);
  p.dz = (f(0.0, y, v + h) - f(0.0, y, v - h)) / (2 * h);
  p.dxx = (f(k, y, v) - 2 * p.s + f(-k, y, v)) / (k * k);
  p.dxy = (f(k, y + k, v) - f(k, y - k, v) - f(-k, y + k, v) + f(-k, y - k, v)) / (4 * k * k);
  p.dxz = (f(k, y, v + k) - f(k, y, v - k) - f(-k, y, v + k) + f(-k, y, v - k)) / (4 * k * k);
  return p;
}

inline PartialTable finite_diff_partials(const AnalyticMapping& m, const Baseline& b, double h) {
  return finite_diff_partials([&m](double w, double y, double v) { return m(w, y, v); }, b, h);
}

/// Names of the expansion coefficients, in ESECoefficients order.
inline const std::vector<std::string>& expansion_terms() {
  static const std::vector<std::string> names{"w", "y", "v", "w*y", "w*v", "1"};
  return names;
}

inline ESECoefficients taylor_coefficients(const PartialTable& p, const Baseline& b) {
  ESECoefficients c;
  c.names = expansion_terms();
  c.values = {p.dx + 0.5 * p.dxx - b.y0 * p.dxy - b.v0 * p.dxz,
              p.dy,
              p.dz,
              p.dxy,
              p.dxz,
              p.s - b.y0 * p.dy - b.v0 * p.dz};
  for (double v : c.values)
    if (!std::isfinite(v)) throw std::domain_error("taylor_coefficients: derivative undefined at baseline");
  return c;
}

inline ESECoefficients taylor_coefficients(const AnalyticMapping& m, const Baseline& b) {
  return taylor_coefficients(exact_partials(m, b), b);
}

/// Y_t from the expansion with fixed coefficients, t = 1..T, starting at y_start.
inline std::vector<double> propagate_expansion(const ESECoefficients& c, double y_start, std::span<const double> w,
                                               std::span<const double> v) {
  if (c.values.size() != 6) throw std::invalid_argument("propagate_expansion: expected six expansion coefficients");
  if (w.size() != v.size()) throw std::invalid_argument("propagate_expansion: input length mismatch");
  std::vector<double> y(w.size() + 1);
  y[0] = y_start;
  const auto& nu = c.values;
  for (std::size_t t = 1; t <= w.size(); ++t) {
    const double wt = w[t - 1], vt = v[t - 1], yp = y[t - 1];
    y[t] = nu[0] * wt + nu[1] * yp + nu[2] * vt + nu[3] * wt * yp + nu[4] * wt * vt + nu[5];
  }
  return y;
}

// ---------------------------------------------------------------------------
// Reports

/// `estimator,round,estimate` rows; missing estimates are written as `NA`.
inline void write_estimates_csv(std::ostream& os,
                                const std::vector<std::tuple<std::string, Round, std::optional<double>>>& rows) {
  os << "estimator,round,estimate\n";
  for (const auto& [name, t, v] : rows) os << name << ',' << t << ',' << (v ? csv::format_double(*v) : "NA") << '\n';
}

}  // namespace ese
