#pragma once

// ese_lab command-line driver: simulate, estimate, benchmark, sweep, demo.
// Failures print one JSON line on the error stream and return nonzero.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "harness.hpp"
#include "json.hpp"

#define ESE_LAB_VERSION "0.1.0"

namespace ese {

struct CliInvocation {
  std::string subcommand;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<Seed> seed;
  std::optional<std::size_t> reps;
  std::string outcomes_path;   // estimate only
  std::string treatments_path;
};

class CliError : public std::runtime_error {
 public:
  CliError(std::string kind, const std::string& what, std::string key = {})
      : std::runtime_error(what), kind_(std::move(kind)), key_(std::move(key)) {}
  const std::string& kind() const noexcept { return kind_; }
  const std::string& key() const noexcept { return key_; }

 private:
  std::string kind_;
  std::string key_;
};

namespace cli {

inline std::string hex(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

inline std::filesystem::path prepare_out(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw CliError("io", "cannot create output directory " + dir);
  return dir;
}

template <class F>
void write_file(const std::filesystem::path& p, F&& body) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw CliError("io", "cannot write " + p.string());
  body(os);
  os.flush();
  if (!os) throw CliError("io", "write failed for " + p.string());
}

inline void write_json(const std::filesystem::path& p, const nlohmann::ordered_json& j) {
  write_file(p, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

inline config::ParsedConfig load_config(const CliInvocation& inv) {
  if (inv.config_path.empty()) throw CliError("usage", "--config is required for " + inv.subcommand);
  std::string text;
  try {
    text = read_text_file(inv.config_path);
  } catch (const std::exception& e) {
    throw CliError("io", e.what());
  }
  auto parsed = parse_config_full(text);
  if (inv.seed) parsed.scenario.base_seed = *inv.seed;
  if (inv.reps) {
    if (*inv.reps < 1) throw CliError("usage", "--reps must be at least 1");
    parsed.scenario.reps = *inv.reps;
  }
  return parsed;
}

inline nlohmann::ordered_json manifest(const std::string& sub, const ScenarioConfig& c, const std::vector<std::string>& files) {
  nlohmann::ordered_json m;
  m["tool"] = "ese_lab";
  m["version"] = ESE_LAB_VERSION;
  m["subcommand"] = sub;
  m["scenario"] = c.name;
  m["seed"] = c.base_seed;
  m["reps"] = c.reps;
  m["config_hash"] = hex(config_hash(c));
  m["spec_hash"] = hex(spec_hash(c.dynamics));
  m["substreams"] = {"weights", "noise", "design", "baseline"};
  m["files"] = files;
  m["config"] = to_json(c);
  return m;
}

inline void write_outcome_panel(const std::filesystem::path& p, const OutcomePanel& y) {
  write_file(p, [&](std::ostream& os) { csv::write_outcomes(os, y); });
}

inline void run_simulate(const CliInvocation& inv) {
  const auto c = load_config(inv).scenario;
  const auto dir = prepare_out(inv.out_dir);
  const auto world = simulate_world(c, c.base_seed);
  write_outcome_panel(dir / "outcomes.csv", world.observed.outcomes);
  write_file(dir / "treatments.csv", [&](std::ostream& os) { csv::write_treatments(os, world.observed_w); });
  write_file(dir / "exposures.csv", [&](std::ostream& os) { csv::write_exposures(os, world.observed.exposures); });
  write_outcome_panel(dir / "scenario_control.csv", world.control.outcomes);
  write_outcome_panel(dir / "scenario_treated.csv", world.treated.outcomes);
  auto m = manifest("simulate", c, {"outcomes.csv", "treatments.csv", "exposures.csv", "scenario_control.csv",
                                    "scenario_treated.csv", "manifest.json"});
  m["weights"] = to_descriptor(world.weights);
  m["ground_truth_tte"] = ground_truth_tte(world.control.outcomes, world.treated.outcomes, c.n_rounds);
  write_json(dir / "manifest.json", m);
}

inline void run_estimate(const CliInvocation& inv) {
  const auto c = load_config(inv).scenario;
  if (inv.outcomes_path.empty() || inv.treatments_path.empty())
    throw CliError("usage", "estimate requires --outcomes and --treatments");
  OutcomePanel y(1, 1, std::vector<double>(2, 0.0));
  TreatmentPanel w(1, 1, {0});
  try {
    y = csv::read_outcomes_file(inv.outcomes_path);
    w = csv::read_treatments_file(inv.treatments_path);
  } catch (const std::invalid_argument& e) {
    throw CliError("input", e.what());
  } catch (const std::exception& e) {
    throw CliError("io", e.what());
  }
  if (y.n_units() != w.n_units() || y.n_rounds() != w.n_rounds())
    throw CliError("input", "outcome and treatment panels have different shapes");
  if (y.n_units() != c.n_units) throw CliError("config", "panel has " + std::to_string(y.n_units()) + " units", "population.n_units");
  if (y.n_rounds() != c.n_rounds)
    throw CliError("config", "panel has " + std::to_string(y.n_rounds()) + " rounds", "population.n_rounds");

  const auto dir = prepare_out(inv.out_dir);
  const auto meta = structure_of(c.weights, c.n_units);
  const Round T = c.n_rounds;
  std::vector<std::tuple<std::string, Round, std::optional<double>>> rows;
  nlohmann::ordered_json coeffs = nlohmann::ordered_json::object();
  for (const auto& e : c.estimators) {
    const auto name = estimator_name(e.kind);
    if (!is_ese(e.kind)) {
      for (Round t = 1; t <= T; ++t) {
        const auto yt = y.column(t);
        const auto wt = w.column(t);
        std::optional<double> v;
        if (e.kind == EstimatorKind::DM) {
          v = dm_estimate(yt, wt);
        } else {
          const double pi = c.design.prob(t);
          if (pi > 0.0 && pi < 1.0) v = ht_estimate(yt, wt, pi);
        }
        rows.emplace_back(name, t, v);
      }
      continue;
    }
    const auto features = c.features_for(e);
    const auto fit = fit_ese(y, w, features, meta);
    const double m0 = column_mean(y, 0);
    auto j = to_json(fit);
    auto tte = nlohmann::ordered_json::array();
    for (Round t = 1; t <= T; ++t) {
      const double v = tte_from_coeffs(fit, features, m0, t, meta);
      rows.emplace_back(name, t, v);
      tte.push_back(v);
    }
    j["tte"] = tte;
    coeffs[name] = j;
  }
  write_json(dir / "coefficients.json", coeffs);
  write_file(dir / "estimates.csv", [&](std::ostream& os) { write_estimates_csv(os, rows); });
  auto m = manifest("estimate", c, {"coefficients.json", "estimates.csv", "manifest.json"});
  m["inputs"] = {{"outcomes", inv.outcomes_path}, {"treatments", inv.treatments_path}};
  write_json(dir / "manifest.json", m);
}

inline void run_benchmark(const CliInvocation& inv) {
  const auto c = load_config(inv).scenario;
  const auto dir = prepare_out(inv.out_dir);
  const auto report = replicate(c);
  write_json(dir / "report.json", to_json(report));
  write_file(dir / "report.csv", [&](std::ostream& os) { write_report_csv(os, report); });
  write_json(dir / "manifest.json", manifest("benchmark", c, {"report.json", "report.csv", "manifest.json"}));
}

inline void run_sweep(const CliInvocation& inv) {
  const auto parsed = load_config(inv);
  if (!parsed.sweep) throw CliError("config", "sweep requires a [sweep] section", "sweep");
  const auto dir = prepare_out(inv.out_dir);
  const auto table = failure_sweep(parsed.scenario, parsed.sweep->parameter, parsed.sweep->grid);
  write_file(dir / "sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, table); });
  auto m = manifest("sweep", parsed.scenario, {"sweep.csv", "manifest.json"});
  m["sweep"] = {{"parameter", sweep_parameter_name(table.parameter)}, {"grid", parsed.sweep->grid}};
  write_json(dir / "manifest.json", m);
}

/// Built-in spillover scenario: dense Gaussian network, ramp design.
inline ScenarioConfig demo_config() {
  ScenarioConfig c;
  c.name = "demo";
  c.n_units = 1000;
  c.n_rounds = 4;
  c.y0_sd = 1.0;
  c.weights.gaussian = {1.0, 0.5, 0.0, 0.5};
  c.dynamics.h.alpha_w = 1.0;
  c.dynamics.h.alpha_y = 0.5;
  c.dynamics.g = {PeerFunction::Kind::LinearPeer, 1.5, 0.3};
  c.dynamics.unit_noise_sd = 1.0;
  c.design = ramp_design(c.n_units);
  c.estimators = {{EstimatorKind::DM, {}}, {EstimatorKind::HT, {}}, {EstimatorKind::EseBasic, {}}};
  c.base_seed = 2024;
  c.reps = 1;
  c.threads = 1;
  return c;
}

inline void run_demo(const CliInvocation& inv) {
  auto c = demo_config();
  if (inv.seed) c.base_seed = *inv.seed;
  if (inv.reps) {
    if (*inv.reps < 1) throw CliError("usage", "--reps must be at least 1");
    c.reps = *inv.reps;
  }
  const auto dir = prepare_out(inv.out_dir);
  const auto report = replicate(c);
  const auto& ese = report.estimator("ese_basic");
  write_file(dir / "demo_trajectories.csv", [&](std::ostream& os) {
    os << "round,gt_control,gt_treated,gt_tte,ese_control,ese_treated,ese_tte\n";
    for (Round t = 0; t <= c.n_rounds; ++t) {
      const double gc = report.gt_control_path[t], gt = report.gt_treated_path[t];
      os << t << ',' << csv::format_double(gc) << ',' << csv::format_double(gt) << ',' << csv::format_double(gt - gc);
      if (ese.mean_control_path.empty()) {
        os << ",NA,NA,NA\n";
      } else {
        const double ec = ese.mean_control_path[t], et = ese.mean_treated_path[t];
        os << ',' << csv::format_double(ec) << ',' << csv::format_double(et) << ',' << csv::format_double(et - ec)
           << '\n';
      }
    }
  });
  write_file(dir / "demo_summary.csv", [&](std::ostream& os) {
    os << "estimator,mean_estimate,mean_gt,bias,rmse,included,excluded\n";
    for (const auto& s : report.estimators)
      os << s.name << ',' << detail::cell(s.mean_estimate) << ',' << csv::format_double(report.mean_gt_tte) << ','
         << detail::cell(s.bias) << ',' << detail::cell(s.rmse) << ',' << s.included << ',' << s.excluded << '\n';
  });
  write_json(dir / "manifest.json",
             manifest("demo", c, {"demo_trajectories.csv", "demo_summary.csv", "manifest.json"}));
}

inline std::string error_line(const std::string& kind, const std::string& message, const std::string& key = {}) {
  nlohmann::ordered_json j;
  j["status"] = "error";
  j["kind"] = kind;
  if (!key.empty()) j["key"] = key;
  j["message"] = message;
  return j.dump();
}

}  // namespace cli

inline void run_invocation(const CliInvocation& inv) {
  if (inv.subcommand == "simulate") return cli::run_simulate(inv);
  if (inv.subcommand == "estimate") return cli::run_estimate(inv);
  if (inv.subcommand == "benchmark") return cli::run_benchmark(inv);
  if (inv.subcommand == "sweep") return cli::run_sweep(inv);
  if (inv.subcommand == "demo") return cli::run_demo(inv);
  throw CliError("usage", "unknown subcommand '" + inv.subcommand + "'");
}

/// Parses argv, runs the subcommand, returns the process exit status.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulation and estimation lab for experiments under network interference", "ese_lab"};
  app.set_version_flag("--version", ESE_LAB_VERSION);
  app.require_subcommand(1);
  CliInvocation inv;
  Seed seed = 0;
  std::size_t reps = 0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", inv.config_path, "Scenario config file");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--out", inv.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Base seed override");
    sub->add_option("--reps", reps, "Replication count override")->check(CLI::PositiveNumber);
  };
  auto* simulate = app.add_subcommand("simulate", "Simulate observed and counterfactual panels");
  add_common(simulate, true);
  auto* estimate = app.add_subcommand("estimate", "Fit estimators to a given panel");
  add_common(estimate, true);
  estimate->add_option("--outcomes", inv.outcomes_path, "Outcome panel CSV")->required()->check(CLI::ExistingFile);
  estimate->add_option("--treatments", inv.treatments_path, "Treatment panel CSV")->required()->check(CLI::ExistingFile);
  auto* benchmark = app.add_subcommand("benchmark", "Monte Carlo benchmark against ground truth");
  add_common(benchmark, true);
  auto* sweep = app.add_subcommand("sweep", "Failure-mode parameter sweep");
  add_common(sweep, true);
  auto* demo = app.add_subcommand("demo", "Built-in dense-Gaussian ramp scenario");
  add_common(demo, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << ESE_LAB_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << cli::error_line("usage", e.what()) << '\n';
    return 2;
  }

  for (auto* sub : app.get_subcommands()) {
    inv.subcommand = sub->get_name();
    if (sub->count("--seed")) inv.seed = seed;
    if (sub->count("--reps")) inv.reps = reps;
  }
  try {
    run_invocation(inv);
  } catch (const CliError& e) {
    err << cli::error_line(e.kind(), e.what(), e.key()) << '\n';
    return e.kind() == "usage" ? 2 : 1;
  } catch (const ConfigError& e) {
    err << cli::error_line("config", e.what(), e.key()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << cli::error_line("runtime", e.what()) << '\n';
    return 1;
  }
  return 0;
}

}  // namespace ese
