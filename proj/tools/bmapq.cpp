// bmapq: queue-level QoS of a finite buffer with BMAP arrivals and an
// AMC-limited server. Exit status: 0 ok, 1 configuration error, 2 numerical
// failure, 3 verification z-score above 3.

#include <bmapq/errors.hpp>
#include <bmapq/experiment.hpp>
#include <bmapq/report.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitVerification = 3;

struct Options {
  std::string config_path;
  std::string output;
  std::string preset_name;
  std::optional<std::uint64_t> seed;
  std::string fault;
  std::size_t point = 0;
};

bmapq::ExperimentConfig load(const Options& opt) {
  using namespace bmapq;
  ExperimentConfig base = opt.preset_name.empty() ? default_config() : preset(opt.preset_name);
  if (opt.config_path.empty() && opt.preset_name.empty())
    throw ConfigError("", "give a config file or --preset");
  ExperimentConfig cfg = opt.config_path.empty() ? base : load_config(opt.config_path, base);
  if (opt.seed) {
    if (!cfg.simulation) cfg.simulation = SimulationSettings{};
    cfg.simulation->seed = *opt.seed;
  }
  if (!opt.output.empty()) cfg.output = opt.output;
  return cfg;
}

void emit(const bmapq::ExperimentConfig& cfg, const std::string& text) {
  if (cfg.output.empty() || cfg.output == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(cfg.output, std::ios::binary);
  if (!out) throw bmapq::ConfigError("output", "cannot write " + cfg.output);
  out << text;
}

void report_errors(const bmapq::SweepResult& sweep) {
  for (const auto& r : sweep.rows)
    if (!r.error.empty())
      std::cerr << "bmapq: point " << bmapq::format_number(r.value) << ": " << r.error << "\n";
}

int analyze(const Options& opt) {
  const auto cfg = load(opt);
  bmapq::SweepOptions so;
  so.simulate = cfg.simulation.has_value();
  const auto sweep = bmapq::run_sweep(cfg, so);
  emit(cfg, bmapq::analysis_csv(cfg, sweep));
  report_errors(sweep);
  return sweep.status();
}

int simulate(const Options& opt) {
  auto cfg = load(opt);
  if (!cfg.simulation) cfg.simulation = bmapq::SimulationSettings{};
  bmapq::SweepOptions so;
  so.analytic = false;
  so.simulate = true;
  const auto sweep = bmapq::run_sweep(cfg, so);
  emit(cfg, bmapq::simulation_csv(cfg, sweep));
  report_errors(sweep);
  return sweep.status();
}

int verify(const Options& opt) {
  const auto cfg = load(opt);
  if (!cfg.simulation) throw bmapq::ConfigError("simulation", "verify needs a simulation block");
  if (cfg.simulation->arrival_mode != bmapq::ArrivalMode::kPoissonPerPhase)
    throw bmapq::ConfigError("simulation.arrival_mode",
                             "verify compares against the analytic model; use poisson_per_phase");
  bmapq::SweepOptions so;
  so.simulate = true;
  if (opt.fault == "theta-flip") so.flip_success_exponent = true;
  else if (!opt.fault.empty())
    throw bmapq::ConfigError("--inject-fault", "unknown fault '" + opt.fault + "'");
  const auto sweep = bmapq::run_sweep(cfg, so);
  emit(cfg, bmapq::verification_csv(cfg, sweep));
  report_errors(sweep);
  for (const auto& r : sweep.rows)
    if (r.comparison)
      for (const auto& m : r.comparison->rows)
        if (m.flagged)
          std::cerr << "bmapq: value " << bmapq::format_number(r.value) << " " << m.metric
                    << " z=" << bmapq::format_number(m.z) << "\n";
  if (sweep.status() != 0) return sweep.status();
  return sweep.any_flagged() ? kExitVerification : kExitOk;
}

int dump_matrix(const Options& opt) {
  auto cfg = load(opt);
  bmapq::validate(cfg);
  auto values = cfg.values;
  std::sort(values.begin(), values.end());
  if (opt.point >= values.size())
    throw bmapq::ConfigError("--point", "sweep has " + std::to_string(values.size()) + " points");
  const auto point = bmapq::point_model(cfg, values[opt.point]);
  const auto result = bmapq::analyze_point(point);
  emit(cfg, bmapq::to_triplets(result.matrix));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-buffer BMAP queue with adaptive modulation and coding"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", opt.config_path, "YAML experiment config");
    sub->add_option("-o,--output", opt.output, "Write CSV here instead of stdout");
    sub->add_option("--preset", opt.preset_name, "Base configuration: defaults or desk");
    sub->add_option("--seed", opt.seed, "Simulation seed (overrides the config)");
  };
  auto* analyze_cmd = app.add_subcommand("analyze", "Solve the queue chain over the sweep");
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo estimates over the sweep");
  auto* verify_cmd = app.add_subcommand("verify", "Analytic vs simulated z-scores");
  auto* dump_cmd = app.add_subcommand("dump-matrix", "Sparse triplets of the transition matrix");
  for (auto* sub : {analyze_cmd, simulate_cmd, verify_cmd, dump_cmd}) add_common(sub);
  verify_cmd->add_option("--inject-fault", opt.fault, "theta-flip: analytic side uses 1 - p_success");
  dump_cmd->add_option("--point", opt.point, "Index of the sweep point (sorted), default 0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*analyze_cmd) return analyze(opt);
    if (*simulate_cmd) return simulate(opt);
    if (*verify_cmd) return verify(opt);
    if (*dump_cmd) return dump_matrix(opt);
  } catch (const bmapq::NumericalError& e) {
    std::cerr << "bmapq: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const bmapq::ConfigError& e) {
    std::cerr << "bmapq: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "bmapq: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
