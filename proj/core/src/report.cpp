#include <bmapq/report.hpp>

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace bmapq {
namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string metadata(const ExperimentConfig& cfg, const SweepResult& sweep,
                     const char* kind) {
  std::string out = fmt::format("# bmapq {}\n", kind);
  out += fmt::format("# axis: {}\n", to_string(cfg.axis));
  out += fmt::format("# frame_duration: {}\n", format_number(cfg.bmap.frame_duration));
  out += fmt::format("# buffer_size: {}\n", cfg.buffer_size);
  out += "# intensity = rho * lambda_bmap * T / mean capacity (packets/frame)\n";
  out += "# lambda_frame = mean packets offered per frame by the arrival model\n";
  out += "# avg_delay_frames in frames\n";
  for (const auto& r : sweep.rows) {
    out += fmt::format("# point value={} intensity={}", format_number(r.value),
                       format_number(r.intensity));
    if (r.analytic)
      out += fmt::format(" lambda_bmap_frame={}", format_number(r.analytic->lambda_bmap_frame));
    if (!r.error.empty()) out += fmt::format(" error=\"{}\"", r.error);
    out += "\n";
  }
  return out;
}

void metric_cells(std::string& line, const MetricsReport* r) {
  const double v[] = {r ? r->avg_queue_length : kMissing, r ? r->drop_probability : kMissing,
                      r ? r->throughput : kMissing, r ? r->avg_delay_frames : kMissing,
                      r ? r->lambda_frame : kMissing};
  for (double x : v) line += "," + format_number(x);
}

void sim_cells(std::string& line, const SimResult* s, bool means, bool errors) {
  const Estimate none{kMissing, kMissing};
  const Estimate e[] = {s ? s->avg_queue_length : none, s ? s->drop_probability : none,
                        s ? s->throughput : none, s ? s->avg_delay_frames : none,
                        s ? s->lambda_frame : none};
  if (means)
    for (const auto& x : e) line += "," + format_number(x.mean);
  if (errors)
    for (const auto& x : e) line += "," + format_number(x.se);
}

const char* kMetricColumns = "avg_queue_len,drop_prob,throughput,avg_delay_frames,lambda_frame";

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", value);
}

std::string analysis_csv(const ExperimentConfig& cfg, const SweepResult& sweep) {
  bool with_sim = false;
  for (const auto& r : sweep.rows) with_sim = with_sim || r.simulated.has_value();

  std::string out = metadata(cfg, sweep, "analyze");
  out += fmt::format("axis,value,{}", kMetricColumns);
  if (with_sim)
    out += ",sim_avg_queue_len,sim_drop_prob,sim_throughput,sim_avg_delay_frames,sim_lambda_frame"
           ",se_avg_queue_len,se_drop_prob,se_throughput,se_avg_delay_frames,se_lambda_frame";
  out += "\n";
  for (const auto& r : sweep.rows) {
    std::string line = to_string(cfg.axis) + "," + format_number(r.value);
    metric_cells(line, r.analytic ? &*r.analytic : nullptr);
    if (with_sim) sim_cells(line, r.simulated ? &*r.simulated : nullptr, true, true);
    out += line + "\n";
  }
  return out;
}

std::string simulation_csv(const ExperimentConfig& cfg, const SweepResult& sweep) {
  std::string out = metadata(cfg, sweep, "simulate");
  if (cfg.simulation)
    out += fmt::format("# arrival_mode: {}\n# seed: {}\n",
                       to_string(cfg.simulation->arrival_mode), cfg.simulation->seed);
  out += fmt::format(
      "axis,value,{},se_avg_queue_len,se_drop_prob,se_throughput,se_avg_delay_frames,"
      "se_lambda_frame,replications\n",
      kMetricColumns);
  for (const auto& r : sweep.rows) {
    std::string line = to_string(cfg.axis) + "," + format_number(r.value);
    const SimResult* s = r.simulated ? &*r.simulated : nullptr;
    sim_cells(line, s, true, true);
    line += "," + std::to_string(s ? s->replications : 0);
    out += line + "\n";
  }
  return out;
}

std::string verification_csv(const ExperimentConfig& cfg, const SweepResult& sweep) {
  std::string out = metadata(cfg, sweep, "verify");
  out += "axis,value,metric,analytic,simulated,se,z,flagged\n";
  for (const auto& r : sweep.rows) {
    if (!r.comparison) {
      out += fmt::format("{},{},error,nan,nan,nan,nan,1\n", to_string(cfg.axis),
                         format_number(r.value));
      continue;
    }
    for (const auto& m : r.comparison->rows)
      out += fmt::format("{},{},{},{},{},{},{},{}\n", to_string(cfg.axis),
                         format_number(r.value), m.metric, format_number(m.analytic),
                         format_number(m.simulated), format_number(m.se),
                         format_number(m.z), m.flagged ? 1 : 0);
  }
  return out;
}

}  // namespace bmapq
