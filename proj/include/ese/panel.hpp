#pragma once

// Panel data model: treatment assignments, outcomes, covariates and
// exposures over units and rounds, plus empirical distributions of the
// per-unit tuples observed in one round.
//
// Storage is dense and unit-major. Rounds are 1-based for treatments,
// covariates and exposures; outcomes additionally carry the pre-treatment
// round 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ese {

using Round = std::size_t;

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

inline void check_round(Round t, Round lo, Round hi, const char* panel) {
  if (t < lo || t > hi) {
    throw std::out_of_range(std::string(panel) + ": round " + std::to_string(t) +
                            " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

inline void check_unit(std::size_t i, std::size_t n, const char* panel) {
  if (i >= n) {
    throw std::out_of_range(std::string(panel) + ": unit " + std::to_string(i) + " outside [0, " +
                            std::to_string(n) + ")");
  }
}

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

/// Binary assignment W(i, t), t = 1..T.
class TreatmentPanel {
 public:
  TreatmentPanel(std::size_t n_units, Round n_rounds, std::vector<std::uint8_t> entries)
      : n_units_(n_units), n_rounds_(n_rounds), entries_(std::move(entries)) {
    detail::require(n_units >= 1 && n_rounds >= 1, "TreatmentPanel: empty dimensions");
    detail::require(entries_.size() == n_units * n_rounds, "TreatmentPanel: entry count mismatch");
    for (auto v : entries_) detail::require(v <= 1, "TreatmentPanel: entries must be 0 or 1");
  }

  static TreatmentPanel constant(std::size_t n_units, Round n_rounds, bool treated) {
    return {n_units, n_rounds, std::vector<std::uint8_t>(n_units * n_rounds, treated ? 1 : 0)};
  }

  std::size_t n_units() const noexcept { return n_units_; }
  Round n_rounds() const noexcept { return n_rounds_; }

  int at(std::size_t i, Round t) const {
    detail::check_unit(i, n_units_, "TreatmentPanel");
    detail::check_round(t, 1, n_rounds_, "TreatmentPanel");
    return entries_[i * n_rounds_ + (t - 1)];
  }

  std::vector<double> column(Round t) const {
    detail::check_round(t, 1, n_rounds_, "TreatmentPanel");
    std::vector<double> c(n_units_);
    for (std::size_t i = 0; i < n_units_; ++i) c[i] = entries_[i * n_rounds_ + (t - 1)];
    return c;
  }

  std::span<const std::uint8_t> entries() const noexcept { return entries_; }

  friend bool operator==(const TreatmentPanel&, const TreatmentPanel&) = default;

 private:
  std::size_t n_units_;
  Round n_rounds_;
  std::vector<std::uint8_t> entries_;
};

/// Outcomes Y(i, t), t = 0..T.
class OutcomePanel {
 public:
  OutcomePanel(std::size_t n_units, Round n_rounds, std::vector<double> entries)
      : n_units_(n_units), n_rounds_(n_rounds), entries_(std::move(entries)) {
    detail::require(n_units >= 1 && n_rounds >= 1, "OutcomePanel: empty dimensions");
    detail::require(entries_.size() == n_units * (n_rounds + 1),
                    "OutcomePanel: expected " + std::to_string(n_units * (n_rounds + 1)) +
                        " entries, got " + std::to_string(entries_.size()));
    for (double v : entries_) detail::require(std::isfinite(v), "OutcomePanel: non-finite entry");
  }

  std::size_t n_units() const noexcept { return n_units_; }
  Round n_rounds() const noexcept { return n_rounds_; }

  double at(std::size_t i, Round t) const {
    detail::check_unit(i, n_units_, "OutcomePanel");
    detail::check_round(t, 0, n_rounds_, "OutcomePanel");
    return entries_[i * (n_rounds_ + 1) + t];
  }

  std::vector<double> column(Round t) const {
    detail::check_round(t, 0, n_rounds_, "OutcomePanel");
    std::vector<double> c(n_units_);
    for (std::size_t i = 0; i < n_units_; ++i) c[i] = entries_[i * (n_rounds_ + 1) + t];
    return c;
  }

  std::span<const double> entries() const noexcept { return entries_; }

  friend bool operator==(const OutcomePanel&, const OutcomePanel&) = default;

 private:
  std::size_t n_units_;
  Round n_rounds_;
  std::vector<double> entries_;
};

/// Covariate vectors X(i, t) of a fixed dimension, t = 1..T.
class CovariatePanel {
 public:
  CovariatePanel(std::size_t n_units, Round n_rounds, std::size_t dim, std::vector<double> entries)
      : n_units_(n_units), n_rounds_(n_rounds), dim_(dim), entries_(std::move(entries)) {
    detail::require(n_units >= 1 && n_rounds >= 1 && dim >= 1, "CovariatePanel: empty dimensions");
    detail::require(entries_.size() == n_units * n_rounds * dim, "CovariatePanel: entry count mismatch");
    for (double v : entries_) detail::require(std::isfinite(v), "CovariatePanel: non-finite entry");
  }

  /// dim = 1, X(i, t) = t.
  static CovariatePanel round_index(std::size_t n_units, Round n_rounds) {
    std::vector<double> e(n_units * n_rounds);
    for (std::size_t i = 0; i < n_units; ++i)
      for (Round t = 1; t <= n_rounds; ++t) e[i * n_rounds + (t - 1)] = static_cast<double>(t);
    return {n_units, n_rounds, 1, std::move(e)};
  }

  std::size_t n_units() const noexcept { return n_units_; }
  Round n_rounds() const noexcept { return n_rounds_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const double> at(std::size_t i, Round t) const {
    detail::check_unit(i, n_units_, "CovariatePanel");
    detail::check_round(t, 1, n_rounds_, "CovariatePanel");
    return std::span<const double>(entries_).subspan((i * n_rounds_ + (t - 1)) * dim_, dim_);
  }

 private:
  std::size_t n_units_;
  Round n_rounds_;
  std::size_t dim_;
  std::vector<double> entries_;
};

/// One-dimensional exposures E(i, t), t = 1..T.
class ExposureMatrix {
 public:
  ExposureMatrix(std::size_t n_units, Round n_rounds)
      : n_units_(n_units), n_rounds_(n_rounds), entries_(n_units * n_rounds, 0.0) {
    detail::require(n_units >= 1 && n_rounds >= 1, "ExposureMatrix: empty dimensions");
  }

  std::size_t n_units() const noexcept { return n_units_; }
  Round n_rounds() const noexcept { return n_rounds_; }

  double at(std::size_t i, Round t) const {
    detail::check_unit(i, n_units_, "ExposureMatrix");
    detail::check_round(t, 1, n_rounds_, "ExposureMatrix");
    return entries_[i * n_rounds_ + (t - 1)];
  }

  void set_column(Round t, std::span<const double> col) {
    detail::check_round(t, 1, n_rounds_, "ExposureMatrix");
    detail::require(col.size() == n_units_, "ExposureMatrix: column length mismatch");
    for (std::size_t i = 0; i < n_units_; ++i) {
      detail::require(std::isfinite(col[i]), "ExposureMatrix: non-finite exposure");
      entries_[i * n_rounds_ + (t - 1)] = col[i];
    }
  }

  std::vector<double> column(Round t) const {
    detail::check_round(t, 1, n_rounds_, "ExposureMatrix");
    std::vector<double> c(n_units_);
    for (std::size_t i = 0; i < n_units_; ++i) c[i] = entries_[i * n_rounds_ + (t - 1)];
    return c;
  }

  friend bool operator==(const ExposureMatrix&, const ExposureMatrix&) = default;

 private:
  std::size_t n_units_;
  Round n_rounds_;
  std::vector<double> entries_;
};

/// Outcome panel from a flat unit-major list of n_units * (n_rounds + 1) values.
inline OutcomePanel build_panel(std::size_t n_units, Round n_rounds, std::vector<double> entries) {
  return {n_units, n_rounds, std::move(entries)};
}

inline double column_mean(const TreatmentPanel& p, Round t) {
  auto c = p.column(t);
  return detail::mean(c);
}

inline double column_mean(const OutcomePanel& p, Round t) {
  auto c = p.column(t);
  return detail::mean(c);
}

inline double column_mean(const ExposureMatrix& p, Round t) {
  auto c = p.column(t);
  return detail::mean(c);
}

/// (W(i,t), Y(i,t-1), X(i,t), E(i,t), Y(i,t)) for one unit.
struct UnitTuple {
  int w = 0;
  double y_prev = 0.0;
  std::vector<double> x;
  std::vector<double> e;
  double y = 0.0;

  friend auto operator<=>(const UnitTuple&, const UnitTuple&) = default;
};

/// Multiset of unit tuples for a single round. Equality ignores order.
class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(std::vector<UnitTuple> tuples) : tuples_(std::move(tuples)) {
    std::sort(tuples_.begin(), tuples_.end());
  }

  std::size_t size() const noexcept { return tuples_.size(); }
  std::span<const UnitTuple> tuples() const noexcept { return tuples_; }

  /// Sorted sample of one scalar component.
  template <class Proj>
  std::vector<double> marginal(Proj proj) const {
    std::vector<double> v;
    v.reserve(tuples_.size());
    for (const auto& u : tuples_) v.push_back(static_cast<double>(proj(u)));
    std::sort(v.begin(), v.end());
    return v;
  }

  friend bool operator==(const EmpiricalDistribution&, const EmpiricalDistribution&) = default;

 private:
  std::vector<UnitTuple> tuples_;
};

inline EmpiricalDistribution tuple_distribution(const TreatmentPanel& w, const OutcomePanel& y,
                                                const CovariatePanel& x, const ExposureMatrix& e,
                                                Round t) {
  const std::size_t n = w.n_units();
  detail::require(y.n_units() == n && x.n_units() == n && e.n_units() == n,
                  "tuple_distribution: unit count mismatch");
  detail::require(y.n_rounds() == w.n_rounds() && x.n_rounds() == w.n_rounds() &&
                      e.n_rounds() == w.n_rounds(),
                  "tuple_distribution: round count mismatch");
  detail::check_round(t, 1, w.n_rounds(), "tuple_distribution");
  std::vector<UnitTuple> tuples;
  tuples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = x.at(i, t);
    tuples.push_back(UnitTuple{w.at(i, t), y.at(i, t - 1), {xi.begin(), xi.end()}, {e.at(i, t)},
                               y.at(i, t)});
  }
  return EmpiricalDistribution(std::move(tuples));
}

/// 1-Wasserstein distance between two equal-size sorted samples.
inline double w1_distance(std::span<const double> a, std::span<const double> b) {
  detail::require(!a.empty() && !b.empty(), "w1_distance: empty sample");
  detail::require(a.size() == b.size(), "w1_distance: length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return s / static_cast<double>(a.size());
}

}  // namespace ese
