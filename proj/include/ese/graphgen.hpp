#pragma once

// Interference structures. A WeightSet holds the static weights A and the
// per-round weights B^t; weight(i, j, t) is the influence of unit j on
// unit i in round t and always equals A(i, j) + B^t(i, j).
//
// Dense Gaussian sets materialize A once; B^t rows are regenerated from a
// counter-based stream whenever they are needed, so memory stays O(N^2)
// regardless of the number of rounds. Clustered and influencer sets never
// materialize anything.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <memory>
#include <istream>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "panel.hpp"
#include "rng.hpp"

namespace ese {

/// Numerators of the Gaussian weight moments: A ~ N(mu/n, sigma2/n),
/// B^t ~ N(mu_t/n, sigma2_t/n).
struct GaussianWeightParams {
  double mu = 0.0;
  double sigma2 = 0.0;
  double mu_t = 0.0;
  double sigma2_t = 0.0;
};

struct DenseGaussian {
  GaussianWeightParams params;
  Seed seed = 0;
  // Empty when sigma2 == 0 (every entry equals mu/n).
  std::shared_ptr<const std::vector<double>> a;
};

struct Clustered {
  std::vector<std::size_t> membership;  // cluster id per unit, 0-based
  std::size_t k = 1;
  double w_in = 0.0;
  double w_out = 0.0;
};

struct Influencer {
  std::vector<std::size_t> influencers;  // sorted, 0-based
  std::vector<std::uint8_t> is_influencer;
  double w_inf = 0.0;
  double w_base = 0.0;
};

struct ExplicitDense {
  std::shared_ptr<const std::vector<double>> matrix;  // row-major n x n
};

class WeightSet {
 public:
  using Representation = std::variant<DenseGaussian, Clustered, Influencer, ExplicitDense>;

  WeightSet(std::size_t n_units, Representation rep) : n_(n_units), rep_(std::move(rep)) {}

  std::size_t n_units() const noexcept { return n_; }
  const Representation& representation() const noexcept { return rep_; }

  template <class T>
  const T* as() const noexcept {
    return std::get_if<T>(&rep_);
  }

  std::string kind() const {
    return std::visit(
        [](const auto& r) -> std::string {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, DenseGaussian>) return "dense_gaussian";
          else if constexpr (std::is_same_v<T, Clustered>) return "clustered";
          else if constexpr (std::is_same_v<T, Influencer>) return "influencer";
          else return "explicit_dense";
        },
        rep_);
  }

  /// Fills out[j] = weight(i, j, t) for j = 0..n-1.
  void row(std::size_t i, Round t, std::span<double> out) const {
    check(i, 0, out.size());
    const double n = static_cast<double>(n_);
    std::visit(
        [&](const auto& r) {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, DenseGaussian>) {
            dense_static_row(r, i, out);
            add_dense_round_row(r, i, t, out);
          } else if constexpr (std::is_same_v<T, Clustered>) {
            const auto ci = r.membership[i];
            for (std::size_t j = 0; j < n_; ++j) out[j] = (r.membership[j] == ci ? r.w_in : r.w_out) / n;
          } else if constexpr (std::is_same_v<T, Influencer>) {
            const double m = static_cast<double>(r.influencers.size());
            for (std::size_t j = 0; j < n_; ++j)
              out[j] = (r.is_influencer[j] && j != i) ? r.w_inf / m : r.w_base / n;
          } else {
            std::copy_n(r.matrix->begin() + static_cast<std::ptrdiff_t>(i * n_), n_, out.begin());
          }
        },
        rep_);
  }

  /// Static part A(i, .) of a dense Gaussian set.
  static void dense_static_row(const DenseGaussian& r, std::size_t i, std::span<double> out) {
    const std::size_t n = out.size();
    if (r.a) {
      std::copy_n(r.a->begin() + static_cast<std::ptrdiff_t>(i * n), n, out.begin());
    } else {
      std::fill(out.begin(), out.end(), r.params.mu / static_cast<double>(n));
    }
  }

  /// Adds B^t(i, .) of a dense Gaussian set to `out`.
  static void add_dense_round_row(const DenseGaussian& r, std::size_t i, Round t, std::span<double> out) {
    const std::size_t n = out.size();
    const double nn = static_cast<double>(n);
    const double mean = r.params.mu_t / nn;
    if (r.params.sigma2_t == 0.0) {
      if (mean != 0.0)
        for (auto& v : out) v += mean;
      return;
    }
    const double sd = std::sqrt(r.params.sigma2_t / nn);
    CounterStream stream(substream(r.seed, "weights.round", t));
    thread_local std::vector<double> z;
    z.resize(n);
    stream.fill_normal(static_cast<std::uint64_t>(i) * n, z);
    for (std::size_t j = 0; j < n; ++j) out[j] += mean + sd * z[j];
  }

 private:
  void check(std::size_t i, std::size_t j, std::size_t len) const {
    if (i >= n_ || j >= n_) throw std::out_of_range("WeightSet: unit index out of range");
    if (len != n_) throw std::invalid_argument("WeightSet: row buffer length mismatch");
  }

  std::size_t n_;
  Representation rep_;
};

inline WeightSet gen_dense_gaussian(std::size_t n, const GaussianWeightParams& params, Seed seed) {
  if (n == 0) throw std::invalid_argument("gen_dense_gaussian: n must be positive");
  if (!(params.sigma2 >= 0.0) || !(params.sigma2_t >= 0.0))
    throw std::invalid_argument("gen_dense_gaussian: variances must be non-negative");
  if (!std::isfinite(params.mu) || !std::isfinite(params.mu_t) || !std::isfinite(params.sigma2) ||
      !std::isfinite(params.sigma2_t))
    throw std::invalid_argument("gen_dense_gaussian: parameters must be finite");
  DenseGaussian r{params, seed, nullptr};
  if (params.sigma2 > 0.0) {
    const double nn = static_cast<double>(n);
    const double mean = params.mu / nn;
    const double sd = std::sqrt(params.sigma2 / nn);
    auto a = std::make_shared<std::vector<double>>(n * n);
    CounterStream(substream(seed, "weights.static")).fill_normal(0, *a);
    for (auto& v : *a) v = mean + sd * v;
    r.a = std::move(a);
  }
  return {n, std::move(r)};
}

/// Equal-size blocks of n / k units; the last cluster absorbs the remainder.
inline WeightSet gen_clustered(std::size_t n, std::size_t k, double w_in, double w_out) {
  if (k == 0) throw std::invalid_argument("gen_clustered: k must be positive");
  if (k > n) throw std::invalid_argument("gen_clustered: more clusters than units");
  if (!std::isfinite(w_in) || !std::isfinite(w_out)) throw std::invalid_argument("gen_clustered: non-finite weight");
  const std::size_t block = n / k;
  std::vector<std::size_t> membership(n);
  for (std::size_t i = 0; i < n; ++i) membership[i] = std::min(i / block, k - 1);
  return {n, Clustered{std::move(membership), k, w_in, w_out}};
}

inline WeightSet gen_influencer(std::size_t n, std::vector<std::size_t> influencers, double w_inf, double w_base) {
  if (influencers.empty()) throw std::invalid_argument("gen_influencer: influencer set is empty");
  if (!std::isfinite(w_inf) || !std::isfinite(w_base)) throw std::invalid_argument("gen_influencer: non-finite weight");
  std::sort(influencers.begin(), influencers.end());
  if (std::adjacent_find(influencers.begin(), influencers.end()) != influencers.end())
    throw std::invalid_argument("gen_influencer: duplicate influencer id");
  if (influencers.back() >= n) throw std::invalid_argument("gen_influencer: influencer id out of range");
  if (influencers.size() >= n) throw std::invalid_argument("gen_influencer: need at least one regular unit");
  std::vector<std::uint8_t> flag(n, 0);
  for (auto j : influencers) flag[j] = 1;
  return {n, Influencer{std::move(influencers), std::move(flag), w_inf, w_base}};
}

inline WeightSet explicit_dense(std::size_t n, std::vector<double> matrix) {
  if (n == 0) throw std::invalid_argument("explicit_dense: n must be positive");
  if (matrix.size() != n * n) throw std::invalid_argument("explicit_dense: matrix must be n x n");
  for (double v : matrix)
    if (!std::isfinite(v)) throw std::invalid_argument("explicit_dense: non-finite weight");
  return {n, ExplicitDense{std::make_shared<const std::vector<double>>(std::move(matrix))}};
}

inline double effective_weight(const WeightSet& w, std::size_t i, std::size_t j, Round t) {
  const std::size_t n = w.n_units();
  if (i >= n || j >= n) throw std::out_of_range("effective_weight: unit index out of range");
  const double nn = static_cast<double>(n);
  return std::visit(
      [&](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, DenseGaussian>) {
          const double a = r.a ? (*r.a)[i * n + j] : r.params.mu / nn;
          double b = r.params.mu_t / nn;
          if (r.params.sigma2_t != 0.0) {
            CounterStream stream(substream(r.seed, "weights.round", t));
            b += std::sqrt(r.params.sigma2_t / nn) * stream.normal(static_cast<std::uint64_t>(i) * n + j);
          }
          return a + b;
        } else if constexpr (std::is_same_v<T, Clustered>) {
          return (r.membership[i] == r.membership[j] ? r.w_in : r.w_out) / nn;
        } else if constexpr (std::is_same_v<T, Influencer>) {
          return (r.is_influencer[j] && j != i) ? r.w_inf / static_cast<double>(r.influencers.size()) : r.w_base / nn;
        } else {
          return (*r.matrix)[i * n + j];
        }
      },
      w.representation());
}

/// Dense n x n copy of weight(., ., t).
inline std::vector<double> materialize(const WeightSet& w, Round t) {
  const std::size_t n = w.n_units();
  std::vector<double> m(n * n);
  for (std::size_t i = 0; i < n; ++i) w.row(i, t, std::span<double>(m).subspan(i * n, n));
  return m;
}

/// Small JSON descriptor (kind + parameters + seed). Explicit matrices are
/// not embedded; write them with write_weights_csv.
inline nlohmann::json to_descriptor(const WeightSet& w) {
  nlohmann::json j;
  j["kind"] = w.kind();
  j["n_units"] = w.n_units();
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, DenseGaussian>) {
          j["mu"] = r.params.mu;
          j["sigma2"] = r.params.sigma2;
          j["mu_t"] = r.params.mu_t;
          j["sigma2_t"] = r.params.sigma2_t;
          j["seed"] = r.seed;
        } else if constexpr (std::is_same_v<T, Clustered>) {
          j["k"] = r.k;
          j["w_in"] = r.w_in;
          j["w_out"] = r.w_out;
        } else if constexpr (std::is_same_v<T, Influencer>) {
          j["influencers"] = r.influencers;
          j["w_inf"] = r.w_inf;
          j["w_base"] = r.w_base;
        }
      },
      w.representation());
  return j;
}

inline WeightSet from_descriptor(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  const auto n = j.at("n_units").get<std::size_t>();
  if (kind == "dense_gaussian") {
    GaussianWeightParams p{j.at("mu").get<double>(), j.at("sigma2").get<double>(), j.at("mu_t").get<double>(),
                           j.at("sigma2_t").get<double>()};
    return gen_dense_gaussian(n, p, j.at("seed").get<Seed>());
  }
  if (kind == "clustered")
    return gen_clustered(n, j.at("k").get<std::size_t>(), j.at("w_in").get<double>(), j.at("w_out").get<double>());
  if (kind == "influencer")
    return gen_influencer(n, j.at("influencers").get<std::vector<std::size_t>>(), j.at("w_inf").get<double>(),
                          j.at("w_base").get<double>());
  throw std::invalid_argument("from_descriptor: unsupported kind '" + kind + "'");
}

/// `i,j,weight` rows of an explicit matrix.
inline void write_weights_csv(std::ostream& os, const WeightSet& w) {
  const auto* r = w.as<ExplicitDense>();
  if (!r) throw std::invalid_argument("write_weights_csv: only explicit dense weights are written as CSV");
  const std::size_t n = w.n_units();
  os << "i,j,weight\n";
  char buf[64];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, (*r->matrix)[i * n + j]);
      os << i << ',' << j << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf)) << '\n';
    }
  }
}

inline WeightSet read_weights_csv(std::istream& is, std::size_t n) {
  std::string line;
  if (!std::getline(is, line) || (line != "i,j,weight" && line != "i,j,weight\r"))
    throw std::invalid_argument("read_weights_csv: expected header 'i,j,weight'");
  std::vector<double> m(n * n, 0.0);
  std::vector<std::uint8_t> seen(n * n, 0);
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw std::invalid_argument("read_weights_csv: malformed row '" + line + "'");
    const auto i = std::stoul(line.substr(0, c1));
    const auto j = std::stoul(line.substr(c1 + 1, c2 - c1 - 1));
    if (i >= n || j >= n) throw std::invalid_argument("read_weights_csv: index out of range");
    if (seen[i * n + j]++) throw std::invalid_argument("read_weights_csv: duplicate (i, j)");
    m[i * n + j] = std::stod(line.substr(c2 + 1));
  }
  return explicit_dense(n, std::move(m));
}

}  // namespace ese
