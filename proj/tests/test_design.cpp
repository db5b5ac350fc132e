#include "catch_amalgamated.hpp"

#include <cmath>

#include "ese/design.hpp"

using namespace ese;

TEST_CASE("degenerate probabilities give constant panels") {
  auto zeros = assign(DesignSpec::bernoulli(50, {0.0, 0.0, 0.0}), 3);
  auto ones = assign(DesignSpec::bernoulli(50, {1.0, 1.0, 1.0}), 3);
  CHECK(zeros == TreatmentPanel::constant(50, 3, false));
  CHECK(ones == TreatmentPanel::constant(50, 3, true));
  CHECK(assign(DesignSpec::constant(5, 2, 1), 0) == TreatmentPanel::constant(5, 2, true));
}

TEST_CASE("ramp design matches the four-round schedule") {
  auto d = ramp_design(5);
  CHECK(d.probs == std::vector<double>{0.0, 0.2, 0.4, 0.8});
  CHECK(d.n_rounds == 4);
  CHECK(d.n_units == 5);
  auto w = assign(d, 123);
  CHECK(column_mean(w, 1) == 0.0);
}

TEST_CASE("realized fractions stay within binomial 3-sigma bounds") {
  const std::size_t n = 10000;
  auto d = ramp_design(n);
  auto w = assign(d, 99);
  for (Round t = 1; t <= 4; ++t) {
    const double p = d.probs[t - 1];
    CHECK(std::abs(column_mean(w, t) - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("assign is a pure function of spec and seed") {
  auto d = DesignSpec::bernoulli(100, {0.3, 0.6});
  CHECK(assign(d, 5) == assign(d, 5));
  CHECK(!(assign(d, 5) == assign(d, 6)));
}

TEST_CASE("entries are pairwise uncorrelated across replications") {
  // Correlation of fixed entry pairs over 200 seeds with pi = 0.5.
  const int reps = 200;
  auto d = DesignSpec::bernoulli(6, {0.5, 0.5});
  std::vector<TreatmentPanel> panels;
  for (int r = 0; r < reps; ++r) panels.push_back(assign(d, static_cast<Seed>(r)));
  const std::vector<std::pair<std::pair<std::size_t, Round>, std::pair<std::size_t, Round>>> pairs{
      {{0, 1}, {1, 1}}, {{0, 1}, {0, 2}}, {{2, 2}, {5, 1}}, {{3, 1}, {4, 2}}};
  for (const auto& [a, b] : pairs) {
    double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    for (const auto& p : panels) {
      const double x = p.at(a.first, a.second), y = p.at(b.first, b.second);
      sa += x;
      sb += y;
      sab += x * y;
      saa += x * x;
      sbb += y * y;
    }
    const double ma = sa / reps, mb = sb / reps;
    const double cov = sab / reps - ma * mb;
    const double corr = cov / std::sqrt((saa / reps - ma * ma) * (sbb / reps - mb * mb));
    CHECK(std::abs(corr) <= 4.0 / std::sqrt(static_cast<double>(reps)));
  }
}

TEST_CASE("invalid designs are rejected") {
  CHECK_THROWS_AS(DesignSpec::bernoulli(3, {0.2, 1.5}), std::invalid_argument);
  CHECK_THROWS_AS(DesignSpec::bernoulli(3, {-0.1}), std::invalid_argument);
  CHECK_THROWS_AS(DesignSpec::constant(3, 2, 2), std::invalid_argument);
  DesignSpec bad{DesignSpec::Kind::IidBernoulli, 3, 2, {0.5}, 0};
  CHECK_THROWS_AS(assign(bad, 1), std::invalid_argument);
}
