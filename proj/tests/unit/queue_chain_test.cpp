#include <bmapq/errors.hpp>
#include <bmapq/experiment.hpp>
#include <bmapq/markov.hpp>
#include <bmapq/metrics.hpp>
#include <bmapq/queue_chain.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "support/fixtures.hpp"
#include "support/oracle.hpp"

using namespace bmapq;

namespace {

ServiceModel fixed_service(int b, double p, int rate_id = 0,
                           TransmissionMode mode = TransmissionMode::kAllQueued) {
  ServiceModel s;
  s.channel = ChannelModel::fixed(rate_id);
  s.transmission = TransmissionModel{b, p, mode};
  return s;
}

QueueChainSpec chain_for(const BmapSpec& spec, int buffer, ServiceModel service,
                         double er = 1e-9) {
  return QueueChainSpec{buffer, arrival_count_matrices(spec, er), std::move(service)};
}

double max_row_deviation(const TransitionMatrix& m) {
  std::vector<double> sums(m.dimension(), 0.0);
  m.for_each_nonzero([&](std::size_t r, std::size_t, double v) { sums[r] += v; });
  double worst = 0.0;
  for (double s : sums) worst = std::max(worst, std::abs(s - 1.0));
  return worst;
}

}  // namespace

TEST(Markov, TwoStateChain) {
  markov::DenseSquare m(2);
  m(0, 0) = 0.9;
  m(0, 1) = 0.1;
  m(1, 0) = 0.5;
  m(1, 1) = 0.5;
  const auto pi = markov::gth_stationary(m);
  EXPECT_NEAR(pi[0], 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(pi[1], 1.0 / 6.0, 1e-15);
}

TEST(Markov, IdentityIsRejected) {
  markov::DenseSquare m(3);
  for (int i = 0; i < 3; ++i) m(i, i) = 1.0;
  EXPECT_THROW(markov::gth_stationary(m), IrreducibilityError);
}

TEST(Markov, ClosedClasses) {
  // 0 -> 1 <-> 2, 3 -> 3
  markov::Adjacency g{{1}, {2}, {1}, {}};
  const auto closed = markov::closed_classes(g);
  ASSERT_EQ(closed.size(), 2u);
  const auto scc = markov::strongly_connected_components(g);
  EXPECT_EQ(scc.size(), 3u);
}

TEST(QueueChain, DeterministicDrain) {
  const auto spec = fixtures::two_phase();
  const QueueChainSpec chain{5, no_arrival_kernel(spec), fixed_service(10, 1.0)};
  const auto m = build_transition_matrix(chain);
  const Matrix phi = phase_transition_matrix(spec);
  for (int x = 0; x <= 5; ++x)
    for (int y = 0; y <= 5; ++y) {
      const Matrix b = m.block(x, y);
      if (y == 0)
        EXPECT_LT((b - phi).cwiseAbs().maxCoeff(), 1e-15) << x;
      else
        EXPECT_EQ(b.cwiseAbs().maxCoeff(), 0.0) << x << "," << y;
    }
  const auto dist = solve_stationary(m);
  const auto marg = extract_marginals(dist);
  EXPECT_NEAR(marg.queue(0), 1.0, 1e-15);
}

TEST(QueueChain, HandEnumeratedSinglePhase) {
  const double mu = 0.5;
  auto kernel = poisson_arrival_kernel(Matrix::Identity(1, 1), Vector::Constant(1, mu), 2, 0.05);
  ASSERT_EQ(kernel.max_arrivals, 2);
  const auto m = build_transition_matrix(QueueChainSpec{2, kernel, fixed_service(1, 1.0)});
  const double f0 = std::exp(-mu), f1 = mu * f0, f2 = 1.0 - f0 - f1;
  const double expected[3][3] = {{f0, f1, f2}, {f0, f1, f2}, {0.0, f0, f1 + f2}};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(m.entry(r, c), expected[r][c], 1e-15) << r << c;
  // overshoot by one when two arrive at a full buffer with one departure
  ASSERT_EQ(m.overflow_increments(2), (std::vector<int>{1, 2}));
  EXPECT_NEAR(m.overflow_block(2, 1)(0, 0), f2, 1e-15);
  EXPECT_EQ(m.overflow_block(2, 2)(0, 0), 0.0);
  EXPECT_EQ(m.overflow_block(1, 2)(0, 0), 0.0);
}

TEST(QueueChain, RowSumsAndBand) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int phases = 1 + static_cast<int>(rng() % 3);
    const int k = 1 + static_cast<int>(rng() % 3);
    const auto spec = fixtures::random_bmap(rng, phases, k);
    const int buffer = 1 + static_cast<int>(rng() % 25);
    const int b = 1 + static_cast<int>(rng() % 6);
    const double p = 0.05 + 0.95 * static_cast<double>(rng() % 100) / 100.0;
    const int rate = static_cast<int>(rng() % 7);
    const auto chain = chain_for(spec, buffer, fixed_service(b, p, rate));
    const auto m = build_transition_matrix(chain);
    EXPECT_LE(max_row_deviation(m), 1e-10);
    const int d = chain.service.max_capacity();
    const int a = chain.kernel.max_arrivals;
    for (int x = 0; x <= buffer; ++x) {
      const int low = x - std::min(x, d);
      const int high = std::min(x + a, buffer);
      EXPECT_GE(m.band_low(x), low);
      EXPECT_LE(m.band_high(x), high);
      for (int y = 0; y <= buffer; ++y)
        if (y < low || y > high) EXPECT_EQ(m.block(x, y).cwiseAbs().maxCoeff(), 0.0);
      m.for_each_nonzero([&](std::size_t r, std::size_t, double v) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0 + 1e-15);
        (void)r;
      });
    }
  }
}

TEST(QueueChain, FoldConservesMass) {
  const auto chain = chain_for(fixtures::two_phase(), 8, fixed_service(2, 0.7));
  const auto m = build_transition_matrix(chain);
  int boundary_rows = 0;
  for (int x = 0; x <= 8; ++x) {
    const auto incs = m.overflow_increments(x);
    if (incs.empty()) continue;
    ++boundary_rows;
    Matrix unfolded = m.prefold_full_block(x);
    for (int n : incs) unfolded += m.overflow_block(x, n);
    EXPECT_LT((unfolded - m.block(x, 8)).cwiseAbs().maxCoeff(), 1e-15);
    for (int s = 0; s < 2; ++s) {
      double folded = 0.0, raw = 0.0;
      for (int y = m.band_low(x); y <= 8; ++y) folded += m.block(x, y).row(s).sum();
      for (int y = m.band_low(x); y < 8; ++y) raw += m.block(x, y).row(s).sum();
      raw += m.prefold_full_block(x).row(s).sum();
      for (int n : incs) raw += m.overflow_block(x, n).row(s).sum();
      EXPECT_NEAR(folded, raw, 1e-12);
    }
  }
  EXPECT_GT(boundary_rows, 0);
  EXPECT_THROW(m.overflow_block(0, 1), StructuralError);
}

TEST(QueueChain, SolverMatchesPowerIterationPath) {
  const auto chain = chain_for(fixtures::two_phase(), 30, fixed_service(2, 0.8));
  const auto m = build_transition_matrix(chain);
  const auto gth = solve_stationary(m);
  EXPECT_EQ(gth.method, StationaryDistribution::Method::kGth);
  SolverOptions opts;
  opts.gth_max_states = 0;
  const auto power = solve_stationary(m, opts);
  EXPECT_EQ(power.method, StationaryDistribution::Method::kPowerIteration);
  EXPECT_LT((gth.pi - power.pi).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(gth.residual, 1e-10);
  EXPECT_NEAR(gth.pi.sum(), 1.0, 1e-12);
  EXPECT_GE(gth.pi.minCoeff(), 0.0);

  opts.power_max_iterations = 3;
  try {
    solve_stationary(m, opts);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.last_residual(), 0.0);
  }
}

TEST(QueueChain, ReducibleChainIsRejected) {
  auto kernel = poisson_arrival_kernel(Matrix::Identity(2, 2), Vector::Constant(2, 0.5), 1, 1e-9);
  const auto m = build_transition_matrix(QueueChainSpec{3, kernel, fixed_service(1, 0.5)});
  try {
    solve_stationary(m);
    FAIL() << "expected IrreducibilityError";
  } catch (const IrreducibilityError& e) {
    EXPECT_NE(std::string(e.what()).find("state"), std::string::npos);
  }
}

TEST(QueueChain, UniformMarginals) {
  StationaryDistribution d;
  d.pi = Matrix::Constant(2, 2, 0.25);
  const auto marg = extract_marginals(d);
  EXPECT_DOUBLE_EQ(marg.queue(0), 0.5);
  EXPECT_DOUBLE_EQ(marg.queue(1), 0.5);
  EXPECT_DOUBLE_EQ(marg.phase(0), 0.5);
  EXPECT_DOUBLE_EQ(marg.phase(1), 0.5);
}

TEST(QueueChain, PhaseMarginalIsStationaryPhaseVector) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto spec = trial == 0 ? fixtures::two_phase() : fixtures::random_bmap(rng, 3, 2);
    const auto m = build_transition_matrix(chain_for(spec, 50, fixed_service(3, 0.9)));
    const auto marg = extract_marginals(solve_stationary(m));
    const RowVector pi = stationary_phase_vector(spec);
    EXPECT_NEAR(marg.queue.sum(), 1.0, 1e-12);
    EXPECT_NEAR(marg.phase.sum(), 1.0, 1e-12);
    for (int s = 0; s < spec.phases(); ++s) EXPECT_NEAR(marg.phase(s), pi(s), 1e-8);
  }
}

TEST(QueueChain, MatchesBruteForceEnumeration) {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int phases = 1 + static_cast<int>(rng() % 2);
    const int k = 1 + static_cast<int>(rng() % 2);
    auto spec = fixtures::random_bmap(rng, phases, k);
    const double fastest = poisson_rates(spec, PoissonRateBasis::kSojourn).maxCoeff();
    spec = scale_intensity(spec, (0.1 + 0.5 * (rng() % 10) / 10.0) / fastest);
    const auto kernel = arrival_count_matrices(spec, 0.02);
    if (kernel.max_arrivals > 3) continue;
    const int buffer = 1 + static_cast<int>(rng() % 5);
    const bool all_queued = rng() % 2 == 0;
    const double p = 0.1 + 0.85 * static_cast<double>(rng() % 100) / 100.0;
    ServiceModel service = fixed_service(1 + static_cast<int>(rng() % 2), p, 0,
                                         all_queued ? TransmissionMode::kAllQueued
                                                 : TransmissionMode::kAttemptedOnly);
    if (rng() % 2) service.channel = ChannelModel::distribution(0.2, {0.5, 0.0, 0.3});
    const QueueChainSpec chain{buffer, kernel, service};

    const auto m = build_transition_matrix(chain);
    const auto brute = oracle::enumerate_chain(kernel, buffer, service.capacities(), p, all_queued);
    const Matrix dense = m.dense();
    ASSERT_EQ(dense.rows(), brute.m.rows());
    EXPECT_LT((dense - brute.m).cwiseAbs().maxCoeff(), 1e-12);

    const auto dist = solve_stationary(m);
    const Eigen::RowVectorXd pi_ref = oracle::power_stationary(brute.m);
    for (int x = 0; x <= buffer; ++x)
      for (int s = 0; s < phases; ++s) EXPECT_NEAR(dist.pi(x, s), pi_ref(x * phases + s), 1e-9);

    const auto report = evaluate(dist, m, chain, mean_arrival_rate(spec), 1.0);
    const auto ref = oracle::brute_metrics(brute, pi_ref, phases);
    EXPECT_NEAR(report.avg_queue_length, ref.avg_queue_length, 1e-9);
    EXPECT_NEAR(report.avg_dropped_per_frame, ref.avg_dropped, 1e-9);
    EXPECT_NEAR(report.lambda_frame, ref.lambda_frame, 1e-9);
    EXPECT_NEAR(report.drop_probability, ref.drop_probability, 1e-9);
    EXPECT_NEAR(report.throughput, ref.throughput, 1e-9);
    EXPECT_NEAR(report.avg_delay_frames, ref.avg_delay, 1e-9);
    ++checked;
  }
  EXPECT_GE(checked, 30);
}

TEST(QueueChain, QueueLengthGrowsWithLoad) {
  auto cfg = preset("desk");
  double previous = -1.0;
  for (double rho = 0.25; rho <= 3.0; rho += 0.25) {
    const auto r = analyze_point(point_model(cfg, rho));
    EXPECT_GE(r.report.avg_queue_length, previous - 1e-12) << rho;
    previous = r.report.avg_queue_length;
  }
}

TEST(QueueChain, TripletDumpRoundTrips) {
  const auto m = build_transition_matrix(chain_for(fixtures::two_phase(), 4, fixed_service(2, 0.6)));
  std::istringstream in(to_triplets(m));
  std::size_t row = 0, col = 0, lines = 0;
  double value = 0.0;
  while (in >> row >> col >> value) {
    EXPECT_EQ(value, m.entry(row, col));
    ++lines;
  }
  std::size_t nonzero = 0;
  m.for_each_nonzero([&](std::size_t, std::size_t, double) { ++nonzero; });
  EXPECT_EQ(lines, nonzero);
}

TEST(QueueChain, RejectsDegenerateSpecs) {
  const auto kernel = arrival_count_matrices(fixtures::two_phase(), 1e-9);
  EXPECT_THROW(build_transition_matrix(QueueChainSpec{0, kernel, fixed_service(1, 0.5)}),
               StructuralError);
}
