// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ese/ese.hpp"

using namespace ese;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double limit_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o{false, ""};
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit_seconds > 0 && secs >= limit_seconds) {
    o.pass = false;
    o.detail += "; exceeded time limit";
  }
  if (!o.pass) ++failures;
  std::printf("[%s] %d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<double> ramp_probs(Round T) {
  std::vector<double> p(T);
  for (Round t = 1; t <= T; ++t) p[t - 1] = 0.8 * static_cast<double>(t - 1) / static_cast<double>(T - 1);
  return p;
}

// 1: every stored outcome re-evaluates exactly from its own tuple.
Outcome identity() {
  double worst = 0.0;
  int panels = 0;
  std::vector<std::string> kinds{"dense_gaussian", "clustered", "influencer", "explicit"};
  for (std::size_t n : {std::size_t{10}, std::size_t{1000}}) {
    for (Round T : {Round{2}, Round{8}}) {
      for (const auto& kind : kinds) {
        WeightSet w = gen_clustered(n, 1, 1.0, 1.0);
        if (kind == "dense_gaussian") w = gen_dense_gaussian(n, {1.0, 0.5, 0.1, 0.3}, 11);
        if (kind == "clustered") w = gen_clustered(n, 3, 1.2, 0.1);
        if (kind == "influencer") w = gen_influencer(n, {0, n / 2}, 2.0, 0.3);
        if (kind == "explicit") {
          std::vector<double> m(n * n);
          CounterStream(substream(5, "explicit")).fill_normal(0, m);
          for (auto& v : m) v /= static_cast<double>(n);
          w = explicit_dense(n, std::move(m));
        }
        for (auto mech : {ExposureMechanism::Kind::WeightedSum, ExposureMechanism::Kind::MeanFieldThreshold}) {
          for (auto hk : {UnitFunction::Kind::Linear, UnitFunction::Kind::Saturating}) {
            DynamicsSpec s;
            s.h = {hk, 0.9, 0.6, {0.05}, 0.1, 0.02, 2.0};
            s.g = {PeerFunction::Kind::LinearPeer, 0.8, 0.3};
            s.exposure = {mech, 0.3, 1.5};
            s.unit_noise_sd = 0.7;
            const Seed seed = 100 + static_cast<Seed>(panels);
            auto a = assign(DesignSpec::bernoulli(n, ramp_probs(T)), seed);
            auto x = CovariatePanel::round_index(n, T);
            std::vector<double> y0(n);
            CounterStream(seed).fill_normal(0, y0);
            auto sim = simulate_panel(s, w, a, x, y0, seed);
            worst = std::max(worst, identity_residual(s, a, x, sim, seed));
            ++panels;
          }
        }
      }
    }
  }
  return {worst <= 1e-12, std::to_string(panels) + " panels, max |Y - f(tuple)| = " + fmt("%.3g", worst)};
}

// 2: DM and HT against hand-computed values, then the half-treated identity.
Outcome classical() {
  struct Fixture {
    std::vector<double> y, w;
    double pi;
    std::optional<double> dm;
    double ht;
  };
  const std::vector<Fixture> fixtures{
      {{2, 4}, {1, 0}, 0.5, -2.0, -2.0},
      {{5, 1, 2}, {1, 0, 0}, 0.5, 3.5, 4.0 / 3.0},
      {{1, 3, 3, 3}, {1, 0, 0, 0}, 0.25, -2.0, -2.0},
      {{0, 0, 0}, {1, 0, 1}, 0.3, 0.0, 0.0},
      {{3.5, 3.5}, {1, 0}, 0.5, 0.0, 0.0},
      {{6, 2, 4, 8}, {1, 1, 0, 0}, 0.5, -2.0, -2.0},
      {{1, 2, 3, 4, 5, 6, 7, 8}, {1, 0, 1, 0, 1, 0, 1, 0}, 0.5, -1.0, -1.0},
      {{8, 0, 0, 0}, {1, 0, 0, 0}, 0.25, 8.0, 8.0},
      {{-1, -1, 2, 2}, {0, 0, 1, 1}, 0.5, 3.0, 3.0},
      {{1.5, 0.5, 2.5}, {1, 1, 0}, 0.5, -1.5, -1.0 / 3.0},
      {{1, 2}, {1, 1}, 0.5, std::nullopt, 3.0},
      {{3, 3, 0, 0}, {1, 1, 0, 0}, 0.75, 3.0, 2.0},
  };
  int exact = 0;
  for (const auto& f : fixtures) {
    const auto dm = dm_estimate(f.y, f.w);
    const double ht = ht_estimate(f.y, f.w, f.pi);
    if (dm == f.dm && ht == f.ht) ++exact;
  }
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd(0.0, 2.0);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t half = 1 + rng() % 50;
    std::vector<double> y(2 * half), w(2 * half, 0.0);
    for (auto& v : y) v = nd(rng);
    std::fill(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(half), 1.0);
    std::shuffle(w.begin(), w.end(), rng);
    worst = std::max(worst, std::abs(ht_estimate(y, w, 0.5) - *dm_estimate(y, w)));
  }
  const bool ok = exact == static_cast<int>(fixtures.size()) && worst <= 1e-12;
  return {ok, std::to_string(exact) + "/" + std::to_string(fixtures.size()) +
                  " fixtures exact; max |HT - DM| on 100 half-treated = " + fmt("%.3g", worst)};
}

// 3: analytic coefficients vs finite differences; exact propagation for
// maps whose expansion has no remainder.
Outcome coefficient_oracle() {
  double worst_fd = 0.0, worst_path = 0.0;
  int maps = 0, exact_maps = 0;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (const auto& m : mapping_catalog()) {
    ++maps;
    for (const Baseline b : {Baseline{0.0, 0.0}, Baseline{0.7, -0.3}, Baseline{-1.2, 0.9}}) {
      const auto exact = taylor_coefficients(m, b);
      const auto numeric = taylor_coefficients(finite_diff_partials(m, b, 1e-4), b);
      for (std::size_t k = 0; k < exact.values.size(); ++k)
        worst_fd = std::max(worst_fd, std::abs(exact.values[k] - numeric.values[k]));
      if (!m.expansion_exact()) continue;
      std::vector<double> w(10), v(10);
      for (auto& x : w) x = static_cast<double>(rng() & 1U);
      for (auto& x : v) x = u(rng);
      const auto path = propagate_expansion(exact, 0.5, w, v);
      double y = 0.5;
      for (std::size_t t = 0; t < 10; ++t) {
        y = m(w[t], y, v[t]);
        worst_path = std::max(worst_path, std::abs(path[t + 1] - y));
      }
    }
    exact_maps += m.expansion_exact();
  }
  const bool ok = worst_fd <= 1e-4 && worst_path <= 1e-10 && exact_maps >= 3;
  return {ok, std::to_string(maps) + " maps: max coefficient gap " + fmt("%.3g", worst_fd) + "; " +
                  std::to_string(exact_maps) + " exact maps, max path gap over T=10 " + fmt("%.3g", worst_path)};
}

// 4: noiseless linear dynamics on uniform weights are recovered exactly.
Outcome exact_recovery() {
  const std::size_t n = 1000;
  const Round T = 8;
  DynamicsSpec s;
  s.h.alpha_w = 1.2;
  s.h.alpha_y = 0.7;
  s.h.alpha_0 = 0.3;
  s.g = {PeerFunction::Kind::LinearPeer, 0.8, 0.2};
  auto w = gen_dense_gaussian(n, {1.0, 0.0, 0.0, 0.0}, 1);
  auto a = assign(DesignSpec::bernoulli(n, {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8}), 4);
  auto x = CovariatePanel::round_index(n, T);
  std::vector<double> y0(n);
  CounterStream(7).fill_normal(0, y0);
  auto suite = counterfactual_suite(s, w, {a, TreatmentPanel::constant(n, T, false), TreatmentPanel::constant(n, T, true)},
                                    x, y0, 9);
  const auto f = basic_features();
  const auto c = fit_ese(suite[0].outcomes, a, f);
  const double est = tte_from_coeffs(c, f, column_mean(suite[0].outcomes, 0), T);
  const double gt = ground_truth_tte(suite[1].outcomes, suite[2].outcomes, T);
  return {std::abs(est - gt) <= 1e-6, "estimate " + fmt("%.10f", est) + " vs truth " + fmt("%.10f", gt) +
                                          ", gap " + fmt("%.3g", std::abs(est - gt))};
}

ScenarioConfig spillover(std::size_t n) {
  ScenarioConfig c;
  c.name = "spillover";
  c.n_units = n;
  c.n_rounds = 4;
  c.y0_sd = 1.0;
  c.weights.gaussian = {1.0, 0.5, 0.0, 0.5};
  c.dynamics.h.alpha_w = 1.0;
  c.dynamics.h.alpha_y = 0.5;
  c.dynamics.g = {PeerFunction::Kind::LinearPeer, 1.5, 0.3};
  c.dynamics.unit_noise_sd = 1.0;
  c.design = ramp_design(n);
  c.estimators = {{EstimatorKind::DM, {}}, {EstimatorKind::EseBasic, {}}};
  c.base_seed = 1;
  return c;
}

// 5: with strong spillovers the evolution estimator beats DM.
Outcome spillover_benchmark() {
  const auto r = replicate(spillover(2000), 100);
  const auto& dm = r.estimator("dm");
  const auto& ese = r.estimator("ese_basic");
  int wins = 0;
  double sd = 0.0, se = 0.0;
  for (std::size_t k = 0; k < r.reps; ++k) {
    if (!dm.errors[k] || !ese.errors[k]) continue;
    const double a = std::abs(*ese.errors[k]), b = std::abs(*dm.errors[k]);
    wins += a < b;
    se += a;
    sd += b;
  }
  const bool ok = wins >= 80 && se <= 0.5 * sd;
  return {ok, std::to_string(wins) + "/100 reps with smaller ESE error; mean |ESE err| " + fmt("%.3f", se / 100) +
                  " vs mean |DM err| " + fmt("%.3f", sd / 100) + " (GT " + fmt("%.3f", r.mean_gt_tte) + ")"};
}

ScenarioConfig weak_signal(std::size_t n) {
  auto c = spillover(n);
  c.name = "weak";
  c.dynamics.h.alpha_w = 0.2;
  c.dynamics.g = {PeerFunction::Kind::LinearPeer, 0.3, 0.2};
  c.reps = 20;
  return c;
}

// 6a: a common time trend breaks the weak-signal fit.
Outcome trend_failure() {
  const auto t = failure_sweep(weak_signal(2000), SweepParameter::Trend, {0.0, 3.0});
  const double b0 = std::abs(t.points[0].report.estimator("ese_basic").bias);
  const double b1 = std::abs(t.points[1].report.estimator("ese_basic").bias);
  return {b1 >= 5.0 * b0, "|ESE bias| " + fmt("%.4f", b0) + " at trend 0, " + fmt("%.4f", b1) + " at trend 3 (ratio " +
                              fmt("%.1f", b1 / b0) + ")"};
}

// 6b: a threshold the experiment never crosses leaves a bias that does not shrink with N.
Outcome threshold_failure() {
  auto bias_at = [](std::size_t n) {
    auto c = weak_signal(n);
    c.dynamics.g = {};
    c.dynamics.exposure = {ExposureMechanism::Kind::MeanFieldThreshold, 0.9, 1.0};
    c.reps = 10;
    return replicate(c).estimator("ese_basic").bias;
  };
  const double b2 = bias_at(2000), b4 = bias_at(4000);
  return {std::abs(b4) >= 0.5 * std::abs(b2),
          "ESE bias " + fmt("%.4f", b2) + " at N=2000, " + fmt("%.4f", b4) + " at N=4000"};
}

// 7: mean exposure concentrates at rate N^-1/2.
Outcome concentration() {
  DynamicsSpec s;
  s.g = {PeerFunction::Kind::LinearPeer, 1.0, 0.0};
  std::vector<double> lx, ly;
  std::string detail;
  for (std::size_t n : {std::size_t{500}, std::size_t{2000}, std::size_t{8000}}) {
    std::vector<double> means;
    for (Seed r = 0; r < 50; ++r) {
      const auto seeds = ReplicationSeeds::of(r);
      auto w = gen_dense_gaussian(n, {1.0, 1.0, 0.0, 0.0}, seeds.weights);
      auto a = assign(DesignSpec::bernoulli(n, {0.5}), seeds.design);
      const std::vector<double> y0(n, 0.0);
      const auto e = compute_exposure(w, s, a.column(1), y0, 1);
      double sum = 0.0;
      for (double v : e) sum += v;
      means.push_back(sum / static_cast<double>(n));
    }
    double m = 0.0, ss = 0.0;
    for (double v : means) m += v;
    m /= static_cast<double>(means.size());
    for (double v : means) ss += (v - m) * (v - m);
    const double sd = std::sqrt(ss / static_cast<double>(means.size() - 1));
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(sd));
    detail += "sd(N=" + std::to_string(n) + ")=" + fmt("%.5f", sd) + " ";
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    mx += lx[k] / 3.0;
    my += ly[k] / 3.0;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  const double slope = sxy / sxx;
  return {std::abs(slope + 0.5) <= 0.1, detail + "slope " + fmt("%.3f", slope)};
}

// 8: realized ramp fractions stay inside binomial 3-sigma bounds.
Outcome design_statistics() {
  const std::size_t n = 10000;
  const auto d = ramp_design(n);
  std::vector<int> inside(4, 0);
  for (Seed seed = 0; seed < 100; ++seed) {
    const auto w = assign(d, seed);
    for (Round t = 1; t <= 4; ++t) {
      const double p = d.probs[t - 1];
      inside[t - 1] += std::abs(column_mean(w, t) - p) <= 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(n));
    }
  }
  bool ok = true;
  std::string detail = "within bounds per round:";
  for (int k : inside) {
    ok = ok && k >= 95;
    detail += " " + std::to_string(k) + "/100";
  }
  return {ok, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// 9: demo output is byte-identical across runs.
Outcome determinism() {
  const fs::path root = fs::path(ESE_TEST_TMP) / "acceptance_demo";
  fs::remove_all(root);
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string(ESE_LAB_EXE) + " demo --seed 2024 --out " + (root / run).string();
    if (std::system(cmd.c_str()) != 0) return {false, "demo exited nonzero"};
  }
  std::size_t files = 0, same = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    ++files;
    const auto other = root / "b" / e.path().filename();
    same += fs::exists(other) && slurp(e.path()) == slurp(other);
  }
  std::size_t files_b = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(root / "b")) ++files_b;
  return {files > 0 && same == files && files_b == files,
          std::to_string(same) + "/" + std::to_string(files) + " output files identical"};
}

}  // namespace

int main() {
  criterion(1, "finite-N identity", 10, identity);
  criterion(2, "estimator oracles", 0, classical);
  criterion(3, "coefficient oracle", 0, coefficient_oracle);
  criterion(4, "end-to-end exact recovery", 30, exact_recovery);
  criterion(5, "spillover benchmark", 300, spillover_benchmark);
  criterion(6, "failure mode: time trend", 300, trend_failure);
  criterion(6, "failure mode: threshold exposure", 300, threshold_failure);
  criterion(7, "exposure concentration", 300, concentration);
  criterion(8, "design statistics", 0, design_statistics);
  criterion(9, "demo determinism", 0, determinism);
  std::printf("%s: %d failing\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
