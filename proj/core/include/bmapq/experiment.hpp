#pragma once

#include <bmapq/amc.hpp>
#include <bmapq/bmap.hpp>
#include <bmapq/metrics.hpp>
#include <bmapq/queue_chain.hpp>
#include <bmapq/simulator.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bmapq {

enum class SweepAxis { kTrafficIntensity, kRateId, kBandwidth };

std::string to_string(SweepAxis axis);

// How the per-frame rate ID is chosen, as written in the config file.
struct ChannelSpec {
  enum class Kind { kRateId, kSnr, kDistribution } kind = Kind::kRateId;
  int rate_id = 0;
  double snr_db = 0.0;
  double outage = 0.0;
  std::vector<double> rate_probabilities;

  ChannelModel resolve(const RateTable& table) const;
};

struct SimulationSettings {
  std::int64_t frames = 1'000'000;
  std::int64_t warmup = 100'000;
  std::uint64_t seed = 1;
  int replications = 1;
  int batches = 20;
  ArrivalMode arrival_mode = ArrivalMode::kPoissonPerPhase;
};

struct ExperimentConfig {
  BmapSpec bmap;
  PoissonRateBasis basis = PoissonRateBasis::kSojourn;
  RateTable table = RateTable::ieee80216();
  ChannelSpec channel;
  TransmissionModel transmission;
  int buffer_size = 150;
  double er = 1e-9;
  SweepAxis axis = SweepAxis::kTrafficIntensity;
  std::vector<double> values{1.0};
  std::optional<SimulationSettings> simulation;
  std::string output;
};

// The default matrices: two phases, batches of at most two packets.
BmapSpec default_bmap();

// X = 150, b = 150, rate ID 0, T = 1, er = 1e-9, one point at rho = 1.
ExperimentConfig default_config();

// "defaults" (default_config) or "desk" (X = 50, b = 3, rho sweep 0.25..3).
ExperimentConfig preset(std::string_view name);

// Parses YAML on top of `base`. Omitted fields keep the base values.
// Throws ConfigError naming the field path, or "line L, column C" on a
// syntax error.
ExperimentConfig parse_config(std::string_view text,
                              const ExperimentConfig& base = default_config());
ExperimentConfig load_config(const std::filesystem::path& path,
                             const ExperimentConfig& base = default_config());

// Semantic checks shared by parse_config and programmatic callers.
void validate(const ExperimentConfig& config);

// Fully resolved model for one sweep value.
struct PointModel {
  double value = 0.0;
  BmapSpec spec;
  Vector poisson_rates;  // per unit time
  ServiceModel service;
  int buffer_size = 1;
  double er = 1e-9;
  bool zero_traffic = false;
  // rho * lambda_BMAP * T / mean capacity.
  double intensity = 0.0;
};

PointModel point_model(const ExperimentConfig& config, double value);

struct AnalysisResult {
  QueueChainSpec chain;
  TransitionMatrix matrix;
  StationaryDistribution distribution;
  MetricsReport report;
};

// Kernel, chain, solve, metrics, invariant checks.
AnalysisResult analyze_point(const PointModel& point);

SimConfig make_sim_config(const PointModel& point,
                          const SimulationSettings& settings);

struct SweepOptions {
  bool analytic = true;
  bool simulate = false;
  // Analytic side uses 1 - p_success in the success exponent. Used to check
  // that verification catches a flipped parameter.
  bool flip_success_exponent = false;
};

struct SweepRow {
  double value = 0.0;
  double intensity = 0.0;
  std::optional<MetricsReport> analytic;
  std::optional<SimResult> simulated;
  std::optional<ComparisonReport> comparison;
  std::string error;
  // 0 ok, 1 invalid parameters at this point, 2 numerical failure.
  int status = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  bool ok() const;
  bool any_flagged() const;
  // Worst row status.
  int status() const;
};

// One row per sweep value in increasing order of the value. A failing point
// keeps its row with the error text and the sweep continues.
SweepResult run_sweep(const ExperimentConfig& config, const SweepOptions& options);

}  // namespace bmapq
