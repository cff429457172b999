#pragma once

#include <bmapq/experiment.hpp>

#include <string>

namespace bmapq {

// 17 significant digits, "nan" for missing values.
std::string format_number(double value);

// Header of the analytic table. Optional simulated columns follow when the
// sweep carried a simulation:
// axis,value,avg_queue_len,drop_prob,throughput,avg_delay_frames,lambda_frame
//   [,sim_avg_queue_len,...,sim_lambda_frame,se_avg_queue_len,...,se_lambda_frame]
std::string analysis_csv(const ExperimentConfig& config, const SweepResult& sweep);

// Simulated means in the metric columns, then se_* and replications.
std::string simulation_csv(const ExperimentConfig& config, const SweepResult& sweep);

// axis,value,metric,analytic,simulated,se,z,flagged
std::string verification_csv(const ExperimentConfig& config, const SweepResult& sweep);

}  // namespace bmapq
