#include "catch_amalgamated.hpp"

#include <random>

#include "ese/design.hpp"
#include "ese/dynamics.hpp"

using namespace ese;

namespace {

DynamicsSpec linear_spec(double alpha_w, double alpha_y, double b_w, double b_y) {
  DynamicsSpec s;
  s.h.alpha_w = alpha_w;
  s.h.alpha_y = alpha_y;
  s.g = {PeerFunction::Kind::LinearPeer, b_w, b_y};
  return s;
}

WeightSet uniform(std::size_t n) { return gen_dense_gaussian(n, {1.0, 0.0, 0.0, 0.0}, 0); }

std::vector<double> column_of(const OutcomePanel& p, Round t) { return p.column(t); }

}  // namespace

TEST_CASE("compute_exposure examples") {
  auto w2 = uniform(2);
  DynamicsSpec zero;
  std::vector<double> w{1, 0}, y{0, 0};
  CHECK(compute_exposure(w2, zero, w, y, 1) == std::vector<double>{0, 0});

  auto spec = linear_spec(0, 1, 1, 0);
  CHECK(compute_exposure(w2, spec, w, y, 1) == std::vector<double>{0.5, 0.5});

  DynamicsSpec thr;
  thr.exposure = {ExposureMechanism::Kind::MeanFieldThreshold, 0.4, 2.0};
  CHECK(compute_exposure(w2, thr, w, y, 1) == std::vector<double>{2, 2});
  std::vector<double> none{0, 0};
  CHECK(compute_exposure(w2, thr, none, y, 1) == std::vector<double>{0, 0});

  CHECK_THROWS_AS(compute_exposure(w2, spec, std::vector<double>{1, 0, 1}, y, 1), std::invalid_argument);
}

TEST_CASE("step examples") {
  auto spec = linear_spec(1, 1, 1, 0);
  std::vector<double> w{1, 0}, y{0, 0}, x{1, 1}, e{0.5, 0.5}, z{0, 0};
  CHECK(step(spec, w, y, x, 1, e, z, 1) == std::vector<double>{1.5, 0.5});

  DynamicsSpec ident;  // h = y_prev, g = 0
  std::vector<double> yp{0.3, -1.25};
  auto out = step(ident, w, yp, x, 1, std::vector<double>{0, 0}, z, 1);
  CHECK(out == yp);

  spec.unit_noise_sd = 0.0;
  CHECK(step(spec, w, y, x, 1, e, std::vector<double>{0.7, -0.2}, 1) ==
        step(spec, w, y, x, 1, e, std::vector<double>{0.7, -0.2}, 1));

  std::vector<double> huge{1e308, 1e308};
  spec.h.alpha_y = 10.0;
  CHECK_THROWS_WITH(step(spec, w, huge, x, 1, e, z, 3),
                    Catch::Matchers::ContainsSubstring("unit 0") && Catch::Matchers::ContainsSubstring("round 3"));
}

TEST_CASE("simulate_panel base case equals a single step") {
  auto spec = linear_spec(0.7, 0.9, 0.4, 0.2);
  spec.unit_noise_sd = 0.3;
  auto weights = gen_dense_gaussian(5, {1.0, 0.5, 0.0, 0.2}, 3);
  TreatmentPanel w(5, 1, {1, 0, 1, 1, 0});
  auto x = CovariatePanel::round_index(5, 1);
  std::vector<double> y0{0.1, 0.2, -0.3, 0.4, 0.0};
  auto sim = simulate_panel(spec, weights, w, x, y0, 17);
  auto wt = w.column(1);
  auto e = compute_exposure(weights, spec, wt, y0, 1);
  std::vector<double> z(5);
  for (std::size_t i = 0; i < 5; ++i) z[i] = unit_noise(17, i, 1);
  std::vector<double> xs{1, 1, 1, 1, 1};
  CHECK(column_of(sim.outcomes, 1) == step(spec, wt, y0, xs, 1, e, z, 1));
  CHECK(sim.exposures.column(1) == e);
}

TEST_CASE("two-unit two-round linear recursion") {
  // h = w + y_prev, g = w + 0.5 y_prev, weights 1/2, y0 = 0.
  // Round 1, w = [1, 0]: E = [0.5, 0.5], Y1 = [1.5, 0.5].
  // Round 2, w = [0, 1]: g = [0.75, 1.25], E = [1, 1], Y2 = [2.5, 2.5].
  auto spec = linear_spec(1, 1, 1, 0.5);
  TreatmentPanel w(2, 2, {1, 0, 0, 1});
  auto x = CovariatePanel::round_index(2, 2);
  auto sim = simulate_panel(spec, uniform(2), w, x, std::vector<double>{0, 0}, 1);
  CHECK(sim.outcomes == build_panel(2, 2, {0, 1.5, 2.5, 0, 0.5, 2.5}));
  CHECK(sim.exposures.column(1) == std::vector<double>{0.5, 0.5});
  CHECK(sim.exposures.column(2) == std::vector<double>{1.0, 1.0});
}

TEST_CASE("no treatment keeps the panel at its baseline") {
  auto spec = linear_spec(0, 1, 1, 0);
  auto sim = simulate_panel(spec, uniform(3), TreatmentPanel::constant(3, 4, false), CovariatePanel::round_index(3, 4),
                            std::vector<double>{1, 2, 3}, 5);
  for (Round t = 0; t <= 4; ++t) CHECK(column_of(sim.outcomes, t) == std::vector<double>{1, 2, 3});
}

TEST_CASE("counterfactual suite") {
  auto spec = linear_spec(1, 1, 1, 0.5);
  const auto x = CovariatePanel::round_index(2, 2);
  const std::vector<double> y0{0, 0};
  auto control = TreatmentPanel::constant(2, 2, false);
  auto treated = TreatmentPanel::constant(2, 2, true);

  SECTION("identical scenarios give identical panels") {
    auto out = counterfactual_suite(spec, uniform(2), {treated, treated}, x, y0, 1);
    CHECK(out[0].outcomes == out[1].outcomes);
  }
  SECTION("all-control vs all-treated matches hand recursion") {
    // Treated: E1 = 1, Y1 = 2; g2 = 2, E2 = 2, Y2 = 1 + 2 + 2 = 5. Control stays 0.
    auto out = counterfactual_suite(spec, uniform(2), {control, treated}, x, y0, 1);
    CHECK(ground_truth_tte(out[0].outcomes, out[1].outcomes, 1) == 2.0);
    CHECK(ground_truth_tte(out[0].outcomes, out[1].outcomes, 2) == 5.0);
    CHECK(ground_truth_tte(out[0].outcomes, out[1].outcomes, 0) == 0.0);
    CHECK_THROWS_AS(ground_truth_tte(out[0].outcomes, out[1].outcomes, 3), std::out_of_range);
  }
  SECTION("shape mismatch is rejected") {
    CHECK_THROWS_AS(counterfactual_suite(spec, uniform(2), {control, TreatmentPanel::constant(2, 3, true)}, x, y0, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("scenario order and batch composition do not change outputs") {
  auto spec = linear_spec(0.5, 0.8, 0.6, 0.1);
  spec.unit_noise_sd = 0.4;
  const std::size_t n = 30;
  const Round T = 3;
  auto weights = gen_dense_gaussian(n, {1.0, 1.0, 0.2, 0.5}, 8);
  auto x = CovariatePanel::round_index(n, T);
  std::vector<double> y0(n, 0.5);
  auto a = assign(DesignSpec::bernoulli(n, {0.2, 0.5, 0.7}), 1);
  auto b = assign(DesignSpec::bernoulli(n, {0.9, 0.1, 0.3}), 2);
  auto fwd = counterfactual_suite(spec, weights, {a, b}, x, y0, 4);
  auto rev = counterfactual_suite(spec, weights, {b, a}, x, y0, 4);
  auto solo = simulate_panel(spec, weights, b, x, y0, 4);
  CHECK(fwd[0].outcomes == rev[1].outcomes);
  CHECK(fwd[1].outcomes == rev[0].outcomes);
  CHECK(solo.outcomes == fwd[1].outcomes);
  CHECK(solo.exposures == fwd[1].exposures);
}

TEST_CASE("ground truth TTE closed forms") {
  DynamicsSpec direct;
  direct.h.alpha_w = 1.0;
  direct.h.alpha_y = 0.0;
  direct.unit_noise_sd = 0.5;
  const std::size_t n = 10;
  auto out = counterfactual_suite(direct, uniform(n),
                                  {TreatmentPanel::constant(n, 5, false), TreatmentPanel::constant(n, 5, true)},
                                  CovariatePanel::round_index(n, 5), std::vector<double>(n, 0.3), 2);
  for (Round t = 1; t <= 5; ++t) CHECK(ground_truth_tte(out[0].outcomes, out[1].outcomes, t) == Catch::Approx(1.0).margin(1e-12));
  CHECK(ground_truth_tte(out[0].outcomes, out[0].outcomes, 3) == 0.0);
}

TEST_CASE("common random numbers: inert treatment gives bit-identical panels") {
  DynamicsSpec inert;  // alpha_w = 0, g = 0
  inert.unit_noise_sd = 1.0;
  inert.h.alpha_y = 0.9;
  const std::size_t n = 40;
  auto weights = gen_dense_gaussian(n, {0.5, 1.0, 0.0, 0.3}, 21);
  auto x = CovariatePanel::round_index(n, 4);
  std::vector<double> y0(n, 1.0);
  std::vector<TreatmentPanel> scenarios{TreatmentPanel::constant(n, 4, false), TreatmentPanel::constant(n, 4, true),
                                        assign(ramp_design(n), 5)};
  auto out = counterfactual_suite(inert, weights, scenarios, x, y0, 99);
  CHECK(out[0].outcomes == out[1].outcomes);
  CHECK(out[0].outcomes == out[2].outcomes);

  // Treatment can also be made inert through alpha_w = b_w = 0 with a live peer channel.
  auto peer_only = linear_spec(0.0, 0.5, 0.0, 0.7);
  peer_only.unit_noise_sd = 1.0;
  auto out2 = counterfactual_suite(peer_only, weights, scenarios, x, y0, 99);
  CHECK(out2[0].outcomes == out2[1].outcomes);
  CHECK(out2[0].outcomes == out2[2].outcomes);
}

TEST_CASE("outcomes are exactly the image of their tuples") {
  auto spec = linear_spec(0.8, 0.7, 0.5, 0.3);
  spec.h.kind = UnitFunction::Kind::Saturating;
  spec.h.scale = 2.0;
  spec.h.alpha_x = {0.05};
  spec.h.trend = 0.1;
  spec.unit_noise_sd = 0.2;
  const std::size_t n = 25;
  auto weights = gen_clustered(n, 3, 1.0, 0.2);
  auto w = assign(DesignSpec::bernoulli(n, {0.3, 0.6, 0.1}), 4);
  auto x = CovariatePanel::round_index(n, 3);
  std::vector<double> y0(n, 0.2);
  auto sim = simulate_panel(spec, weights, w, x, y0, 12);
  CHECK(identity_residual(spec, w, x, sim, 12) == 0.0);
}

TEST_CASE("structured exposures equal brute-force dense sums") {
  std::mt19937_64 rng(31);
  for (std::size_t n : {std::size_t{2}, std::size_t{17}, std::size_t{50}}) {
    std::vector<WeightSet> sets{gen_dense_gaussian(n, {0.4, 0.8, -0.2, 0.5}, 77), gen_dense_gaussian(n, {0.4, 0.8, 0, 0}, 7),
                                gen_dense_gaussian(n, {0.4, 0, -0.2, 0.5}, 6), gen_clustered(n, std::min<std::size_t>(n, 4), 1.5, -0.3),
                                gen_influencer(n, n > 2 ? std::vector<std::size_t>{0, n / 2} : std::vector<std::size_t>{1}, 0.9, 0.2)};
    auto spec = linear_spec(0, 1, 0.8, -0.4);
    for (const auto& weights : sets) {
      for (Round t = 1; t <= 3; ++t) {
        std::vector<double> w(n), y(n);
        for (auto& v : w) v = static_cast<double>(rng() & 1U);
        for (auto& v : y) v = std::normal_distribution<double>()(rng);
        auto e = compute_exposure(weights, spec, w, y, t);
        for (std::size_t i = 0; i < n; ++i) {
          double brute = 0.0;
          for (std::size_t j = 0; j < n; ++j) brute += effective_weight(weights, i, j, t) * (0.8 * w[j] - 0.4 * y[j]);
          REQUIRE(e[i] == Catch::Approx(brute).margin(1e-12));
        }
      }
    }
  }
}

TEST_CASE("pointwise more treatment never lowers an outcome under non-negative dynamics") {
  // N = 3, T = 3: all 512 panels; monotone under single-bit raises implies
  // monotone under any pointwise increase.
  const std::size_t n = 3;
  const Round T = 3;
  auto spec = linear_spec(0.6, 0.8, 0.5, 0.3);
  spec.unit_noise_sd = 0.5;
  auto x = CovariatePanel::round_index(n, T);
  std::vector<double> y0{0.2, -0.1, 0.4};
  for (const auto& weights : {gen_clustered(n, 2, 1.0, 0.3), gen_influencer(n, {1}, 0.7, 0.2), uniform(n)}) {
    std::vector<TreatmentPanel> all;
    for (unsigned mask = 0; mask < (1U << (n * T)); ++mask) {
      std::vector<std::uint8_t> e(n * T);
      for (std::size_t k = 0; k < n * T; ++k) e[k] = (mask >> k) & 1U;
      all.emplace_back(n, T, e);
    }
    auto sims = counterfactual_suite(spec, weights, all, x, y0, 3);
    for (unsigned mask = 0; mask < all.size(); ++mask) {
      for (std::size_t k = 0; k < n * T; ++k) {
        if (mask & (1U << k)) continue;
        const auto& lo = sims[mask].outcomes.entries();
        const auto& hi = sims[mask | (1U << k)].outcomes.entries();
        for (std::size_t c = 0; c < lo.size(); ++c) REQUIRE(hi[c] >= lo[c]);
      }
    }
  }
}

TEST_CASE("mean exposure spread halves when N quadruples") {
  // Dense Gaussian weights, fresh network and assignment per replication.
  auto spec = linear_spec(0, 1, 1.0, 0.0);
  const int reps = 200;
  auto spread = [&](std::size_t n) {
    std::vector<double> means;
    for (int r = 0; r < reps; ++r) {
      auto weights = gen_dense_gaussian(n, {1.0, 1.0, 0.0, 0.0}, substream(1000 + r, "weights"));
      auto w = assign(DesignSpec::bernoulli(n, {0.5}), substream(1000 + r, "design")).column(1);
      auto e = compute_exposure(weights, spec, w, std::vector<double>(n, 0.0), 1);
      double s = 0;
      for (double v : e) s += v;
      means.push_back(s / static_cast<double>(n));
    }
    double m = 0;
    for (double v : means) m += v;
    m /= reps;
    double ss = 0;
    for (double v : means) ss += (v - m) * (v - m);
    return std::sqrt(ss / (reps - 1));
  };
  const double ratio = spread(200) / spread(800);
  CHECK(ratio >= 1.5);
  CHECK(ratio <= 2.5);
}

TEST_CASE("spec validation") {
  DynamicsSpec s;
  s.unit_noise_sd = -1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.unit_noise_sd = 0;
  s.exposure = {ExposureMechanism::Kind::MeanFieldThreshold, 1.0, 1.0};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.exposure.tau = 0.5;
  s.h.alpha_w = NAN;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}
