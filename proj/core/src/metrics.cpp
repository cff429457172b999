#include <bmapq/errors.hpp>
#include <bmapq/metrics.hpp>

#include <fmt/format.h>

#include <cmath>

namespace bmapq {

double average_queue_length(const StationaryDistribution& dist) {
  const Vector queue = dist.pi.rowwise().sum();
  double mean = 0.0;
  for (Eigen::Index x = 1; x < queue.size(); ++x) mean += x * queue(x);
  return mean;
}

double average_dropped_per_frame(const StationaryDistribution& dist,
                                 const TransitionMatrix& m) {
  if (dist.levels() != m.levels() || dist.phases() != m.phases())
    throw StructuralError("distribution and transition matrix disagree in shape");
  const int buffer = m.buffer_size();
  double dropped = 0.0;
  for (int x = 0; x <= buffer; ++x) {
    for (int n : m.overflow_increments(x)) {
      const Vector increase = m.overflow_block(x, n).rowwise().sum();
      const double overshoot = n - (buffer - x);
      for (int s = 0; s < m.phases(); ++s)
        dropped += increase(s) * overshoot * dist.pi(x, s);
    }
  }
  return dropped;
}

double offered_load_per_frame(const StationaryDistribution& dist,
                              const FrameArrivalKernel& kernel) {
  const Vector phase = dist.pi.colwise().sum().transpose();
  return phase.dot(kernel.mean_arrivals());
}

double drop_probability(double avg_dropped, double lambda_frame) {
  if (lambda_frame == 0.0) {
    if (avg_dropped == 0.0) return 0.0;
    throw NumericalError("packets dropped with zero offered load");
  }
  const double p = avg_dropped / lambda_frame;
  if (!(p >= 0.0 && p <= 1.0 + kDropProbabilitySlack))
    throw NumericalError("drop probability " + fmt::format("{:.17g}", p) +
                         " outside [0, 1]");
  // Rounding in the overshoot sum leaves a saturated queue a few ulps short
  // of 1, which would otherwise turn into a tiny throughput and a huge delay.
  return p >= 1.0 - kSaturationRoundoff ? 1.0 : p;
}

double throughput(double lambda_frame, double p_drop) {
  return lambda_frame * (1.0 - p_drop);
}

double average_delay(double avg_queue_length, double throughput) {
  if (avg_queue_length == 0.0) return 0.0;
  if (!(throughput > 0.0))
    throw NumericalError("average delay undefined: zero throughput with " +
                         fmt::format("{:.6g}", avg_queue_length) + " packets queued");
  return avg_queue_length / throughput;
}

double departure_throughput(const StationaryDistribution& dist,
                            const ServiceModel& service) {
  const Vector queue = dist.pi.rowwise().sum();
  double departures = 0.0;
  for (Eigen::Index x = 1; x < queue.size(); ++x)
    departures += queue(x) * service.mean_departures(static_cast<int>(x));
  return departures;
}

MetricsReport evaluate(const StationaryDistribution& dist, const TransitionMatrix& m,
                       const QueueChainSpec& spec, double lambda_bmap_frame,
                       double frame_duration) {
  MetricsReport r;
  r.avg_queue_length = average_queue_length(dist);
  r.avg_dropped_per_frame = average_dropped_per_frame(dist, m);
  r.lambda_frame = offered_load_per_frame(dist, spec.kernel);
  r.lambda_bmap_frame = lambda_bmap_frame;
  r.frame_duration = frame_duration;
  r.drop_probability = drop_probability(r.avg_dropped_per_frame, r.lambda_frame);
  r.throughput = throughput(r.lambda_frame, r.drop_probability);
  r.avg_delay_frames = average_delay(r.avg_queue_length, r.throughput);
  return r;
}

void check_invariants(const MetricsReport& r, const StationaryDistribution& dist,
                      const ServiceModel& service) {
  const double buffer = dist.levels() - 1;
  if (!(r.drop_probability >= 0.0 && r.drop_probability <= 1.0))
    throw NumericalError("drop probability outside [0, 1]");
  if (!(r.avg_queue_length >= 0.0 && r.avg_queue_length <= buffer * (1.0 + 1e-12)))
    throw NumericalError("average queue length outside [0, X]");
  if (!(r.throughput <= r.lambda_frame))
    throw NumericalError("throughput exceeds offered load");
  const double departures = departure_throughput(dist, service);
  if (std::abs(departures - r.throughput) > kFlowBalanceTolerance)
    throw NumericalError("flow balance broken: arrival side " +
                         fmt::format("{:.17g}", r.throughput) + ", departure side " +
                         fmt::format("{:.17g}", departures));
}

}  // namespace bmapq
