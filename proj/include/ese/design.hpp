#pragma once

// Randomized treatment assignment: independent Bernoulli(pi_t) draws per
// unit and round, or a constant panel for the all-control / all-treated
// counterfactual scenarios.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "panel.hpp"
#include "rng.hpp"

namespace ese {

struct DesignSpec {
  enum class Kind { IidBernoulli, Constant };
  Kind kind = Kind::IidBernoulli;
  std::size_t n_units = 1;
  Round n_rounds = 1;
  std::vector<double> probs;  // IidBernoulli: one per round
  int value = 0;              // Constant: 0 or 1

  static DesignSpec bernoulli(std::size_t n, std::vector<double> probs) {
    DesignSpec d{Kind::IidBernoulli, n, probs.size(), std::move(probs), 0};
    d.validate();
    return d;
  }

  static DesignSpec constant(std::size_t n, Round T, int value) {
    DesignSpec d{Kind::Constant, n, T, {}, value};
    d.validate();
    return d;
  }

  void validate() const {
    if (n_units < 1 || n_rounds < 1) throw std::invalid_argument("DesignSpec: empty dimensions");
    if (kind == Kind::Constant) {
      if (value != 0 && value != 1) throw std::invalid_argument("DesignSpec: constant value must be 0 or 1");
      return;
    }
    if (probs.size() != n_rounds) throw std::invalid_argument("DesignSpec: probs length must equal n_rounds");
    for (double p : probs)
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("DesignSpec: probability outside [0, 1]");
  }

  /// Assignment probability in round t (1-based).
  double prob(Round t) const {
    if (t < 1 || t > n_rounds) throw std::out_of_range("DesignSpec: round out of range");
    return kind == Kind::Constant ? static_cast<double>(value) : probs[t - 1];
  }
};

inline TreatmentPanel assign(const DesignSpec& spec, Seed seed) {
  spec.validate();
  const std::size_t n = spec.n_units;
  const Round T = spec.n_rounds;
  if (spec.kind == DesignSpec::Kind::Constant) return TreatmentPanel::constant(n, T, spec.value == 1);
  std::vector<std::uint8_t> e(n * T);
  for (Round t = 1; t <= T; ++t) {
    const CounterStream stream(substream(seed, "design", t));
    const double p = spec.probs[t - 1];
    for (std::size_t i = 0; i < n; ++i) e[i * T + (t - 1)] = stream.uniform(i) < p ? 1 : 0;
  }
  return {n, T, std::move(e)};
}

/// Four aggregated rounds treated with probability 0, 0.2, 0.4, 0.8.
inline DesignSpec ramp_design(std::size_t n) { return DesignSpec::bernoulli(n, {0.0, 0.2, 0.4, 0.8}); }

}  // namespace ese
