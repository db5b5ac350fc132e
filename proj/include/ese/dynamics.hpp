#pragma once

// Ground-truth outcome engine.
//
//   E(i,t) = sum_j weight(i,j,t) * g(W(j,t), Y(j,t-1))      (weighted sum)
//   E(i,t) = c * 1{mean_j W(j,t) > tau}                       (mean-field threshold)
//   Y(i,t) = h(W(i,t), Y(i,t-1), X(i,t), t) + E(i,t) + noise_sd * Z(i,t)
//
// Z(i,t) is a function of (seed, unit, round) only. Every scenario simulated
// with the same weights and seed therefore sees the same noise and the same
// network, which is what makes all-control / all-treated panels valid
// counterfactuals of the observed one.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "graphgen.hpp"
#include "json.hpp"
#include "panel.hpp"
#include "rng.hpp"

namespace ese {

struct UnitFunction {
  enum class Kind { Linear, Saturating };
  Kind kind = Kind::Linear;
  double alpha_w = 0.0;
  double alpha_y = 1.0;
  std::vector<double> alpha_x;  // empty means no covariate effect
  double alpha_0 = 0.0;
  double trend = 0.0;
  double scale = 1.0;  // Saturating only: s * tanh(z / s)

  double operator()(double w, double y_prev, std::span<const double> x, Round t) const {
    double z = alpha_w * w + alpha_y * y_prev;
    for (std::size_t k = 0; k < alpha_x.size(); ++k) z += alpha_x[k] * x[k];
    z += alpha_0 + trend * static_cast<double>(t);
    if (kind == Kind::Saturating) return scale * std::tanh(z / scale);
    return z;
  }
};

struct PeerFunction {
  enum class Kind { Zero, LinearPeer };
  Kind kind = Kind::Zero;
  double b_w = 0.0;
  double b_y = 0.0;

  double operator()(double w, double y_prev) const {
    return kind == Kind::Zero ? 0.0 : b_w * w + b_y * y_prev;
  }
};

struct ExposureMechanism {
  enum class Kind { WeightedSum, MeanFieldThreshold };
  Kind kind = Kind::WeightedSum;
  double tau = 0.5;
  double c = 0.0;
};

struct DynamicsSpec {
  UnitFunction h;
  PeerFunction g;
  ExposureMechanism exposure;
  double unit_noise_sd = 0.0;

  void validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    bool ok = finite(h.alpha_w) && finite(h.alpha_y) && finite(h.alpha_0) && finite(h.trend) && finite(h.scale) &&
              finite(g.b_w) && finite(g.b_y) && finite(exposure.tau) && finite(exposure.c) && finite(unit_noise_sd);
    for (double a : h.alpha_x) ok = ok && finite(a);
    if (!ok) throw std::invalid_argument("DynamicsSpec: parameters must be finite");
    if (unit_noise_sd < 0.0) throw std::invalid_argument("DynamicsSpec: unit_noise_sd must be non-negative");
    if (h.kind == UnitFunction::Kind::Saturating && !(h.scale > 0.0))
      throw std::invalid_argument("DynamicsSpec: saturating scale must be positive");
    if (exposure.kind == ExposureMechanism::Kind::MeanFieldThreshold && !(exposure.tau > 0.0 && exposure.tau < 1.0))
      throw std::invalid_argument("DynamicsSpec: threshold tau must lie in (0, 1)");
  }
};

inline nlohmann::json to_json(const DynamicsSpec& s) {
  nlohmann::json j;
  j["h"] = {{"kind", s.h.kind == UnitFunction::Kind::Linear ? "linear" : "saturating"},
            {"alpha_w", s.h.alpha_w},
            {"alpha_y", s.h.alpha_y},
            {"alpha_x", s.h.alpha_x},
            {"alpha_0", s.h.alpha_0},
            {"trend", s.h.trend},
            {"scale", s.h.scale}};
  j["g"] = {{"kind", s.g.kind == PeerFunction::Kind::Zero ? "zero" : "linear_peer"}, {"b_w", s.g.b_w}, {"b_y", s.g.b_y}};
  j["exposure"] = {
      {"kind", s.exposure.kind == ExposureMechanism::Kind::WeightedSum ? "weighted_sum" : "mean_field_threshold"},
      {"tau", s.exposure.tau},
      {"c", s.exposure.c}};
  j["unit_noise_sd"] = s.unit_noise_sd;
  return j;
}

inline std::uint64_t spec_hash(const DynamicsSpec& s) { return fnv1a(to_json(s).dump()); }

/// Z(i, t) for a given noise seed.
inline double unit_noise(Seed seed, std::size_t unit, Round t) {
  return CounterStream(substream(seed, "noise", t)).normal(unit);
}

/// Outcome of one unit given its tuple; the single definition of f used by
/// both the engine and the identity checks.
inline double evaluate_outcome(const DynamicsSpec& spec, double w, double y_prev, std::span<const double> x, double e,
                               double z, Round t) {
  return spec.h(w, y_prev, x, t) + e + spec.unit_noise_sd * z;
}

namespace detail {

inline void check_len(std::size_t got, std::size_t n, const char* what) {
  if (got != n)
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(n) + " units, got " +
                                std::to_string(got));
}

// E_s = W(t) g_s for several peer vectors at once; weight rows are built once
// and reused across scenarios. Each scenario's sums run in the same order
// whatever the batch, so results do not depend on batch composition.
inline std::vector<std::vector<double>> weighted_sums(const WeightSet& weights, Round t,
                                                      const std::vector<std::vector<double>>& g) {
  const std::size_t n = weights.n_units();
  const std::size_t ns = g.size();
  std::vector<std::vector<double>> out(ns, std::vector<double>(n, 0.0));
  auto plain_sum = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  };

  if (const auto* dg = weights.as<DenseGaussian>()) {
    const double nn = static_cast<double>(n);
    const bool static_const = !dg->a;
    const bool round_const = dg->params.sigma2_t == 0.0;
    std::vector<double> totals(ns);
    for (std::size_t s = 0; s < ns; ++s) totals[s] = plain_sum(g[s]);
    if (static_const && round_const) {
      const double c = dg->params.mu / nn + dg->params.mu_t / nn;
      for (std::size_t s = 0; s < ns; ++s) std::fill(out[s].begin(), out[s].end(), c * totals[s]);
      return out;
    }
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (static_const) {
        std::fill(row.begin(), row.end(), 0.0);
      } else {
        WeightSet::dense_static_row(*dg, i, row);
      }
      if (!round_const) {
        WeightSet::add_dense_round_row(DenseGaussian{{0.0, 0.0, dg->params.mu_t, dg->params.sigma2_t}, dg->seed, {}},
                                       i, t, row);
      }
      for (std::size_t s = 0; s < ns; ++s) {
        const double* gs = g[s].data();
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * gs[j];
        if (static_const) acc += dg->params.mu / nn * totals[s];
        if (round_const) acc += dg->params.mu_t / nn * totals[s];
        out[s][i] = acc;
      }
    }
    return out;
  }

  if (const auto* cl = weights.as<Clustered>()) {
    const double nn = static_cast<double>(n);
    for (std::size_t s = 0; s < ns; ++s) {
      std::vector<double> per(cl->k, 0.0);
      for (std::size_t j = 0; j < n; ++j) per[cl->membership[j]] += g[s][j];
      double total = 0.0;
      for (double v : per) total += v;
      for (std::size_t i = 0; i < n; ++i) {
        const double inside = per[cl->membership[i]];
        out[s][i] = (cl->w_in * inside + cl->w_out * (total - inside)) / nn;
      }
    }
    return out;
  }

  if (const auto* inf = weights.as<Influencer>()) {
    const double nn = static_cast<double>(n);
    const double m = static_cast<double>(inf->influencers.size());
    for (std::size_t s = 0; s < ns; ++s) {
      double s_inf = 0.0, s_reg = 0.0;
      for (std::size_t j = 0; j < n; ++j) (inf->is_influencer[j] ? s_inf : s_reg) += g[s][j];
      for (std::size_t i = 0; i < n; ++i) {
        // An influencer's own column falls back to the base weight.
        const double own = inf->is_influencer[i] ? g[s][i] : 0.0;
        out[s][i] = inf->w_inf / m * (s_inf - own) + inf->w_base / nn * (s_reg + own);
      }
    }
    return out;
  }

  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    weights.row(i, t, row);
    for (std::size_t s = 0; s < ns; ++s) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += row[j] * g[s][j];
      out[s][i] = acc;
    }
  }
  return out;
}

inline std::vector<double> peer_values(const DynamicsSpec& spec, std::span<const double> w_t,
                                       std::span<const double> y_prev) {
  std::vector<double> g(w_t.size());
  for (std::size_t j = 0; j < w_t.size(); ++j) g[j] = spec.g(w_t[j], y_prev[j]);
  return g;
}

inline std::vector<double> threshold_exposure(const DynamicsSpec& spec, std::span<const double> w_t) {
  double s = 0.0;
  for (double v : w_t) s += v;
  const double frac = s / static_cast<double>(w_t.size());
  return std::vector<double>(w_t.size(), frac > spec.exposure.tau ? spec.exposure.c : 0.0);
}

}  // namespace detail

/// Exposure column for round t. Covariates are accepted for interface
/// symmetry with h; the peer catalog does not read them.
inline std::vector<double> compute_exposure(const WeightSet& weights, const DynamicsSpec& spec,
                                            std::span<const double> w_t, std::span<const double> y_prev, Round t) {
  const std::size_t n = weights.n_units();
  detail::check_len(w_t.size(), n, "compute_exposure(w_t)");
  detail::check_len(y_prev.size(), n, "compute_exposure(y_prev)");
  if (spec.exposure.kind == ExposureMechanism::Kind::MeanFieldThreshold) return detail::threshold_exposure(spec, w_t);
  if (spec.g.kind == PeerFunction::Kind::Zero) return std::vector<double>(n, 0.0);
  return detail::weighted_sums(weights, t, {detail::peer_values(spec, w_t, y_prev)}).front();
}

/// One round of outcomes. `x` holds unit i's covariates at x[i*dim .. i*dim+dim).
inline std::vector<double> step(const DynamicsSpec& spec, std::span<const double> w_t, std::span<const double> y_prev,
                                std::span<const double> x, std::size_t dim, std::span<const double> e_t,
                                std::span<const double> noise_t, Round t) {
  const std::size_t n = w_t.size();
  detail::check_len(y_prev.size(), n, "step(y_prev)");
  detail::check_len(e_t.size(), n, "step(e_t)");
  detail::check_len(noise_t.size(), n, "step(noise_t)");
  if (x.size() != n * dim) throw std::invalid_argument("step: covariate slice size mismatch");
  if (spec.h.alpha_x.size() > dim) throw std::invalid_argument("step: alpha_x longer than covariate dimension");
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = evaluate_outcome(spec, w_t[i], y_prev[i], x.subspan(i * dim, dim), e_t[i], noise_t[i], t);
    if (!std::isfinite(y[i]))
      throw std::domain_error("step: non-finite outcome at unit " + std::to_string(i) + ", round " + std::to_string(t));
  }
  return y;
}

struct SimulationResult {
  OutcomePanel outcomes;
  ExposureMatrix exposures;
};

namespace detail {

inline std::vector<double> covariate_slice(const CovariatePanel& x, Round t) {
  std::vector<double> s(x.n_units() * x.dim());
  for (std::size_t i = 0; i < x.n_units(); ++i) {
    auto xi = x.at(i, t);
    std::copy(xi.begin(), xi.end(), s.begin() + static_cast<std::ptrdiff_t>(i * x.dim()));
  }
  return s;
}

}  // namespace detail

/// Simulates every scenario with the same weights and noise stream.
inline std::vector<SimulationResult> counterfactual_suite(const DynamicsSpec& spec, const WeightSet& weights,
                                                          const std::vector<TreatmentPanel>& scenarios,
                                                          const CovariatePanel& x, std::span<const double> y0,
                                                          Seed seed) {
  spec.validate();
  if (scenarios.empty()) throw std::invalid_argument("counterfactual_suite: no scenarios");
  const std::size_t n = weights.n_units();
  const Round T = scenarios.front().n_rounds();
  for (const auto& s : scenarios) {
    if (s.n_units() != n || s.n_rounds() != T)
      throw std::invalid_argument("counterfactual_suite: scenario shape mismatch");
  }
  if (x.n_units() != n || x.n_rounds() != T) throw std::invalid_argument("counterfactual_suite: covariate shape mismatch");
  detail::check_len(y0.size(), n, "counterfactual_suite(y0)");
  for (double v : y0)
    if (!std::isfinite(v)) throw std::invalid_argument("counterfactual_suite: non-finite initial outcome");

  const std::size_t ns = scenarios.size();
  std::vector<std::vector<double>> y_cur(ns, std::vector<double>(y0.begin(), y0.end()));
  std::vector<std::vector<double>> y_all(ns, std::vector<double>(n * (T + 1)));
  std::vector<ExposureMatrix> exposures(ns, ExposureMatrix(n, T));
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t i = 0; i < n; ++i) y_all[s][i * (T + 1)] = y0[i];

  std::vector<double> noise(n);
  for (Round t = 1; t <= T; ++t) {
    std::vector<std::vector<double>> w_t(ns);
    for (std::size_t s = 0; s < ns; ++s) w_t[s] = scenarios[s].column(t);

    std::vector<std::vector<double>> e_t(ns);
    if (spec.exposure.kind == ExposureMechanism::Kind::MeanFieldThreshold) {
      for (std::size_t s = 0; s < ns; ++s) e_t[s] = detail::threshold_exposure(spec, w_t[s]);
    } else if (spec.g.kind == PeerFunction::Kind::Zero) {
      for (std::size_t s = 0; s < ns; ++s) e_t[s].assign(n, 0.0);
    } else {
      std::vector<std::vector<double>> g(ns);
      for (std::size_t s = 0; s < ns; ++s) g[s] = detail::peer_values(spec, w_t[s], y_cur[s]);
      e_t = detail::weighted_sums(weights, t, g);
    }

    if (spec.unit_noise_sd != 0.0) {
      CounterStream(substream(seed, "noise", t)).fill_normal(0, noise);
    } else {
      std::fill(noise.begin(), noise.end(), 0.0);
    }
    const auto xs = detail::covariate_slice(x, t);
    for (std::size_t s = 0; s < ns; ++s) {
      auto y = step(spec, w_t[s], y_cur[s], xs, x.dim(), e_t[s], noise, t);
      exposures[s].set_column(t, e_t[s]);
      for (std::size_t i = 0; i < n; ++i) y_all[s][i * (T + 1) + t] = y[i];
      y_cur[s] = std::move(y);
    }
  }

  std::vector<SimulationResult> out;
  out.reserve(ns);
  for (std::size_t s = 0; s < ns; ++s)
    out.push_back({OutcomePanel(n, T, std::move(y_all[s])), std::move(exposures[s])});
  return out;
}

inline SimulationResult simulate_panel(const DynamicsSpec& spec, const WeightSet& weights, const TreatmentPanel& w,
                                       const CovariatePanel& x, std::span<const double> y0, Seed seed) {
  return std::move(counterfactual_suite(spec, weights, {w}, x, y0, seed).front());
}

/// Mean outcome under all-treated minus all-control at round t.
inline double ground_truth_tte(const OutcomePanel& control, const OutcomePanel& treated, Round t) {
  return column_mean(treated, t) - column_mean(control, t);
}

/// Largest |Y(i,t) - f(tuple(i,t))| over the panel; zero when the stored
/// outcomes are exactly the image of their own tuples.
inline double identity_residual(const DynamicsSpec& spec, const TreatmentPanel& w, const CovariatePanel& x,
                                const SimulationResult& sim, Seed seed) {
  double worst = 0.0;
  for (Round t = 1; t <= w.n_rounds(); ++t) {
    for (std::size_t i = 0; i < w.n_units(); ++i) {
      const double z = spec.unit_noise_sd != 0.0 ? unit_noise(seed, i, t) : 0.0;
      const double f = evaluate_outcome(spec, w.at(i, t), sim.outcomes.at(i, t - 1), x.at(i, t),
                                        sim.exposures.at(i, t), z, t);
      worst = std::max(worst, std::abs(sim.outcomes.at(i, t) - f));
    }
  }
  return worst;
}

}  // namespace ese
