#include <bmapq/errors.hpp>
#include <bmapq/simulator.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

namespace bmapq {
namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  std::int64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean > 30.0) {
      const int parts = static_cast<int>(std::ceil(mean / 30.0));
      std::int64_t total = 0;
      for (int i = 0; i < parts; ++i) total += poisson(mean / parts);
      return total;
    }
    double p = std::exp(-mean);
    double cdf = p;
    const double u = uniform();
    std::int64_t k = 0;
    while (u > cdf && k < 100000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }

 private:
  std::mt19937_64 engine_;
};

struct PhaseEvent {
  int to = 0;
  int batch = 0;
  double rate = 0.0;
};

struct PhaseTables {
  std::vector<std::vector<PhaseEvent>> events;
  std::vector<double> total;
};

PhaseTables make_phase_tables(const BmapSpec& spec) {
  const int s = spec.phases();
  PhaseTables t;
  t.events.resize(s);
  t.total.assign(s, 0.0);
  for (int i = 0; i < s; ++i) {
    for (std::size_t k = 0; k < spec.d.size(); ++k) {
      for (int j = 0; j < s; ++j) {
        if (k == 0 && i == j) continue;
        const double rate = spec.d[k](i, j);
        if (rate > 0.0) {
          t.events[i].push_back({j, static_cast<int>(k), rate});
          t.total[i] += rate;
        }
      }
    }
  }
  return t;
}

struct Accumulator {
  std::int64_t frames = 0;
  double occupancy_sum = 0.0;
  std::int64_t arrivals = 0;
  std::int64_t drops = 0;
  std::int64_t departures = 0;
  double sojourn_sum = 0.0;
  std::int64_t sojourn_count = 0;
  std::vector<std::int64_t> phase_frames;

  void merge(const Accumulator& o) {
    frames += o.frames;
    occupancy_sum += o.occupancy_sum;
    arrivals += o.arrivals;
    drops += o.drops;
    departures += o.departures;
    sojourn_sum += o.sojourn_sum;
    sojourn_count += o.sojourn_count;
    if (phase_frames.size() < o.phase_frames.size())
      phase_frames.resize(o.phase_frames.size(), 0);
    for (std::size_t i = 0; i < o.phase_frames.size(); ++i)
      phase_frames[i] += o.phase_frames[i];
  }
};

struct UnitEstimate {
  double queue, drop, throughput, delay, lambda;
  std::vector<double> phase;
};

UnitEstimate estimate(const Accumulator& a) {
  const double n = static_cast<double>(a.frames);
  UnitEstimate e;
  e.queue = a.occupancy_sum / n;
  e.drop = a.arrivals > 0 ? static_cast<double>(a.drops) / a.arrivals : 0.0;
  e.throughput = a.departures / n;
  e.delay = a.sojourn_count > 0 ? a.sojourn_sum / a.sojourn_count : 0.0;
  e.lambda = a.arrivals / n;
  for (auto f : a.phase_frames) e.phase.push_back(f / n);
  return e;
}

struct Replication {
  std::vector<Accumulator> batches;
  ReplicationCounters counters;
};

struct Prepared {
  PhaseTables phases;
  Vector poisson_means;  // per frame
  std::vector<double> initial_phase_cdf;
  std::vector<std::pair<int, double>> capacities;  // cumulative probability
};

Replication simulate_one(const SimConfig& cfg, const Prepared& prep, int index,
                         int batch_count) {
  Stream rng(replication_seed(cfg.seed, index));
  const int phases = cfg.spec.phases();
  const double frame = cfg.spec.frame_duration;
  const double p_success = cfg.service.transmission.p_success;
  const bool all_queued =
      cfg.service.transmission.mode == TransmissionMode::kAllQueued;
  const bool exact = cfg.arrival_mode == ArrivalMode::kExactBmap;
  const std::int64_t measured = cfg.frames - cfg.warmup;

  Replication rep;
  rep.batches.resize(batch_count);
  for (auto& b : rep.batches) b.phase_frames.assign(phases, 0);

  int phase = 0;
  {
    const double u = rng.uniform();
    while (phase + 1 < phases && u >= prep.initial_phase_cdf[phase]) ++phase;
  }
  std::int64_t occupancy = 0;
  // FIFO of (arrival frame, packet count).
  std::deque<std::pair<std::int64_t, std::int64_t>> fifo;

  for (std::int64_t t = 0; t < cfg.frames; ++t) {
    Accumulator* acc = nullptr;
    if (t >= cfg.warmup) {
      const auto b = static_cast<std::size_t>((t - cfg.warmup) * batch_count / measured);
      acc = &rep.batches[b];
      acc->frames += 1;
      acc->occupancy_sum += static_cast<double>(occupancy);
      acc->phase_frames[phase] += 1;
    }

    // Departures are limited by the start-of-frame occupancy.
    int capacity = prep.capacities.front().first;
    if (prep.capacities.size() > 1) {
      const double u = rng.uniform();
      std::size_t i = 0;
      while (i + 1 < prep.capacities.size() && u >= prep.capacities[i].second) ++i;
      capacity = prep.capacities[i].first;
    }
    const std::int64_t limit = std::min<std::int64_t>(occupancy, capacity);
    std::int64_t sent = 0;
    if (limit > 0) {
      if (p_success >= 1.0) {
        sent = limit;
      } else {
        const std::int64_t trials = all_queued ? occupancy : limit;
        for (std::int64_t i = 0; i < trials && sent < limit; ++i)
          if (rng.uniform() < p_success) ++sent;
      }
    }
    for (std::int64_t left = sent; left > 0;) {
      auto& head = fifo.front();
      const std::int64_t take = std::min(left, head.second);
      if (acc) {
        acc->sojourn_sum += static_cast<double>(take) * static_cast<double>(t - head.first);
        acc->sojourn_count += take;
      }
      head.second -= take;
      left -= take;
      if (head.second == 0) fifo.pop_front();
    }

    // Phase path over the frame; batches counted for the exact process.
    std::int64_t arrived = 0;
    double clock = 0.0;
    while (prep.phases.total[phase] > 0.0) {
      const double rate = prep.phases.total[phase];
      clock += rng.exponential(rate);
      if (clock >= frame) break;
      const double pick = rng.uniform() * rate;
      const auto& events = prep.phases.events[phase];
      std::size_t e = 0;
      double cum = events[0].rate;
      while (e + 1 < events.size() && pick >= cum) cum += events[++e].rate;
      phase = events[e].to;
      if (exact) arrived += events[e].batch;
    }
    if (!exact) arrived = rng.poisson(prep.poisson_means(phase));

    const std::int64_t raw = occupancy - sent + arrived;
    const std::int64_t dropped = std::max<std::int64_t>(0, raw - cfg.buffer_size);
    const std::int64_t admitted = arrived - dropped;
    if (admitted > 0) fifo.emplace_back(t, admitted);
    occupancy = raw - dropped;

    rep.counters.arrivals += arrived;
    rep.counters.departures += sent;
    rep.counters.drops += dropped;
    if (acc) {
      acc->arrivals += arrived;
      acc->departures += sent;
      acc->drops += dropped;
    }
  }
  rep.counters.final_occupancy = occupancy;
  return rep;
}

Estimate summarize(const std::vector<double>& units, double pooled) {
  Estimate e{pooled, 0.0};
  const auto n = units.size();
  if (n < 2) return e;
  double mean = 0.0;
  for (double v : units) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : units) ss += (v - mean) * (v - mean);
  e.se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  return e;
}

}  // namespace

std::string to_string(ArrivalMode mode) {
  return mode == ArrivalMode::kPoissonPerPhase ? "poisson_per_phase" : "exact_bmap";
}

std::uint64_t replication_seed(std::uint64_t seed, int replication) {
  return splitmix64(seed + 0x9E3779B97F4A7C15ULL *
                               (static_cast<std::uint64_t>(replication) + 1));
}

void validate(const SimConfig& c) {
  const auto report = validate(c.spec);
  if (!report.ok())
    throw std::invalid_argument("invalid BMAP: " + report.violations.front().message);
  validate(c.service.transmission);
  if (c.buffer_size < 1) throw std::invalid_argument("buffer size X must be >= 1");
  if (!(c.warmup >= 0 && c.frames > c.warmup))
    throw std::invalid_argument("need frames > warmup >= 0");
  if (c.replications < 1) throw std::invalid_argument("replications must be >= 1");
  if (c.batches < 2) throw std::invalid_argument("batches must be >= 2");
  if (c.poisson_rates.size() != 0 &&
      (c.poisson_rates.size() != c.spec.phases() || (c.poisson_rates.array() < 0.0).any()))
    throw std::invalid_argument("poisson_rates must hold one nonnegative rate per phase");
}

SimResult run(const SimConfig& config) {
  validate(config);
  const int phases = config.spec.phases();

  Prepared prep;
  prep.phases = make_phase_tables(config.spec);
  const Vector rates = config.poisson_rates.size()
                           ? config.poisson_rates
                           : poisson_rates(config.spec, config.basis);
  prep.poisson_means = rates * config.spec.frame_duration;
  const RowVector pi = stationary_phase_vector(config.spec);
  double cum = 0.0;
  for (int s = 0; s < phases; ++s) prep.initial_phase_cdf.push_back(cum += pi(s));
  cum = 0.0;
  for (const auto& [cap, p] : config.service.capacities())
    prep.capacities.emplace_back(cap, cum += p);

  const int reps = config.replications;
  const int batch_count =
      reps == 1 ? static_cast<int>(std::min<std::int64_t>(config.batches,
                                                          config.frames - config.warmup))
                : 1;

  std::vector<Replication> results(reps);
  unsigned workers = config.threads ? config.threads : std::thread::hardware_concurrency();
  workers = std::clamp<unsigned>(workers, 1u, static_cast<unsigned>(reps));
  if (workers == 1) {
    for (int r = 0; r < reps; ++r) results[r] = simulate_one(config, prep, r, batch_count);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int r = next++; r < reps; r = next++)
          results[r] = simulate_one(config, prep, r, batch_count);
      });
  }

  // Reduction in replication order.
  Accumulator total;
  std::vector<UnitEstimate> units;
  SimResult out;
  for (const auto& rep : results) {
    Accumulator whole;
    for (const auto& b : rep.batches) {
      whole.merge(b);
      if (reps == 1) units.push_back(estimate(b));
    }
    if (reps > 1) units.push_back(estimate(whole));
    total.merge(whole);
    out.counters.push_back(rep.counters);
  }
  const UnitEstimate pooled = estimate(total);
  auto column = [&](auto member) {
    std::vector<double> v;
    for (const auto& u : units) v.push_back(member(u));
    return v;
  };
  out.avg_queue_length = summarize(column([](const UnitEstimate& u) { return u.queue; }), pooled.queue);
  out.drop_probability = summarize(column([](const UnitEstimate& u) { return u.drop; }), pooled.drop);
  out.throughput = summarize(column([](const UnitEstimate& u) { return u.throughput; }), pooled.throughput);
  out.avg_delay_frames = summarize(column([](const UnitEstimate& u) { return u.delay; }), pooled.delay);
  out.lambda_frame = summarize(column([](const UnitEstimate& u) { return u.lambda; }), pooled.lambda);
  for (int s = 0; s < phases; ++s)
    out.phase_occupancy.push_back(
        summarize(column([s](const UnitEstimate& u) { return u.phase[s]; }), pooled.phase[s]));
  out.measured_frames = total.frames;
  out.arrivals = total.arrivals;
  out.drops = total.drops;
  out.replications = reps;
  out.arrival_mode = config.arrival_mode;
  return out;
}

bool ComparisonReport::any_flagged() const {
  return std::any_of(rows.begin(), rows.end(),
                     [](const MetricComparison& m) { return m.flagged; });
}

ComparisonReport compare(const MetricsReport& analytic, const SimResult& sim) {
  if (sim.arrival_mode != ArrivalMode::kPoissonPerPhase)
    throw StructuralError(
        "comparison needs a poisson_per_phase simulation; exact_bmap does not "
        "follow the analytic arrival model");
  ComparisonReport report;
  auto add = [&](const char* name, double a, Estimate e) {
    MetricComparison m{name, a, e.mean, e.se, 0.0, false};
    const double diff = std::abs(a - e.mean);
    if (e.se > 0.0) {
      m.z = diff / e.se;
    } else {
      m.z = diff <= 1e-12 * std::max(1.0, std::abs(a))
                ? 0.0
                : std::numeric_limits<double>::infinity();
    }
    m.flagged = m.z > kZThreshold;
    report.rows.push_back(m);
  };
  add("avg_queue_len", analytic.avg_queue_length, sim.avg_queue_length);
  Estimate drop = sim.drop_probability;
  if (drop.se == 0.0 && sim.drops == 0 && sim.arrivals > 0) {
    // No drop observed anywhere: binomial standard error under the analytic
    // value instead of the degenerate sample one.
    const double a = std::clamp(analytic.drop_probability, 0.0, 1.0);
    drop.se = std::sqrt(a * (1.0 - a) / static_cast<double>(sim.arrivals));
  }
  add("drop_prob", analytic.drop_probability, drop);
  add("throughput", analytic.throughput, sim.throughput);
  add("avg_delay_frames", analytic.avg_delay_frames, sim.avg_delay_frames);
  add("lambda_frame", analytic.lambda_frame, sim.lambda_frame);
  return report;
}

}  // namespace bmapq
