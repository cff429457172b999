#pragma once

#include <bmapq/queue_chain.hpp>

namespace bmapq {

struct MetricsReport {
  double avg_queue_length = 0.0;        // packets
  double avg_dropped_per_frame = 0.0;   // packets / frame
  double drop_probability = 0.0;
  double throughput = 0.0;              // packets / frame
  double avg_delay_frames = 0.0;
  double lambda_frame = 0.0;            // offered packets / frame of the chain
  double lambda_bmap_frame = 0.0;       // lambda_BMAP * T
  double frame_duration = 1.0;

  double avg_delay_seconds() const { return avg_delay_frames * frame_duration; }
};

double average_queue_length(const StationaryDistribution& dist);

// Expected overshoot past X per frame, computed from the pre-fold blocks.
double average_dropped_per_frame(const StationaryDistribution& dist,
                                 const TransitionMatrix& m);

// Expected arrivals per frame offered to the chain. Arrivals depend on the
// phase at the end of the frame, whose stationary law is the phase marginal.
double offered_load_per_frame(const StationaryDistribution& dist,
                              const FrameArrivalKernel& kernel);

inline constexpr double kDropProbabilitySlack = 1e-9;
inline constexpr double kSaturationRoundoff = 1e-12;

// X_drop / lambda. 0 / 0 is 0 (an idle system drops nothing); anything
// outside [0, 1 + 1e-9] throws NumericalError. Values within 1e-12 of 1 or
// above it are reported as exactly 1.
double drop_probability(double avg_dropped, double lambda_frame);

double throughput(double lambda_frame, double p_drop);

// Little's law in frames. X = 0 gives 0; phi = 0 with X > 0 throws.
double average_delay(double avg_queue_length, double throughput);

// Expected departures per frame, sum_x q(x) E[k | x].
double departure_throughput(const StationaryDistribution& dist,
                            const ServiceModel& service);

MetricsReport evaluate(const StationaryDistribution& dist,
                       const TransitionMatrix& m, const QueueChainSpec& spec,
                       double lambda_bmap_frame, double frame_duration);

inline constexpr double kFlowBalanceTolerance = 1e-9;

// Bounds and flow balance; throws NumericalError naming the first broken
// identity.
void check_invariants(const MetricsReport& report, const StationaryDistribution& dist,
                      const ServiceModel& service);

}  // namespace bmapq
