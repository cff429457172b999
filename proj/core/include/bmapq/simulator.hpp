#pragma once

#include <bmapq/amc.hpp>
#include <bmapq/bmap.hpp>
#include <bmapq/metrics.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace bmapq {

enum class ArrivalMode {
  // Poisson count per frame with the rate of the phase at the frame end,
  // the arrival model of the analytic chain.
  kPoissonPerPhase,
  // Batches generated at the transition epochs of the BMAP.
  kExactBmap,
};

std::string to_string(ArrivalMode mode);

struct SimConfig {
  BmapSpec spec;
  // Per-unit-time Poisson rate of each phase (kPoissonPerPhase only). Empty
  // means poisson_rates(spec, basis).
  Vector poisson_rates;
  PoissonRateBasis basis = PoissonRateBasis::kSojourn;
  ServiceModel service;
  int buffer_size = 1;
  ArrivalMode arrival_mode = ArrivalMode::kPoissonPerPhase;
  std::int64_t frames = 1'000'000;
  std::int64_t warmup = 100'000;
  std::uint64_t seed = 1;
  int replications = 1;
  // Batches used for the standard error when replications == 1.
  int batches = 20;
  // Worker threads for replications; 0 picks hardware concurrency.
  unsigned threads = 0;
};

void validate(const SimConfig& config);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

// Integer counters of one replication over all frames, warmup included.
struct ReplicationCounters {
  std::int64_t arrivals = 0;
  std::int64_t departures = 0;
  std::int64_t drops = 0;
  std::int64_t initial_occupancy = 0;
  std::int64_t final_occupancy = 0;
};

struct SimResult {
  Estimate avg_queue_length;
  Estimate drop_probability;
  Estimate throughput;
  Estimate avg_delay_frames;  // measured per packet, FIFO
  Estimate lambda_frame;      // arrivals per frame
  std::vector<Estimate> phase_occupancy;
  std::int64_t measured_frames = 0;  // post-warmup, all replications
  std::int64_t arrivals = 0;         // post-warmup
  std::int64_t drops = 0;            // post-warmup
  int replications = 0;
  ArrivalMode arrival_mode = ArrivalMode::kPoissonPerPhase;
  std::vector<ReplicationCounters> counters;
};

// Seed of the random stream of replication r:
// splitmix64(seed + 0x9E3779B97F4A7C15 * (r + 1)).
std::uint64_t replication_seed(std::uint64_t seed, int replication);

SimResult run(const SimConfig& config);

struct MetricComparison {
  std::string metric;
  double analytic = 0.0;
  double simulated = 0.0;
  double se = 0.0;
  double z = 0.0;
  bool flagged = false;
};

struct ComparisonReport {
  std::vector<MetricComparison> rows;
  bool any_flagged() const;
};

inline constexpr double kZThreshold = 3.0;

// z = |analytic - simulated| / se per metric, flagged above 3. When no drop
// was observed at all, the drop probability uses the binomial standard error
// sqrt(p (1 - p) / arrivals) at the analytic p. Any other zero standard error
// counts as agreement only when the two values coincide to 1e-12. Throws
// StructuralError unless the simulation ran kPoissonPerPhase.
ComparisonReport compare(const MetricsReport& analytic, const SimResult& simulated);

}  // namespace bmapq
