#include <bmapq/errors.hpp>
#include <bmapq/markov.hpp>
#include <bmapq/queue_chain.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace bmapq {
namespace {

std::string state_name(std::size_t index, int phases) {
  return "(x=" + std::to_string(index / phases) +
         ", s=" + std::to_string(index % phases) + ")";
}

// Phi * diag(c): every column s' of Phi scaled by c(s').
Matrix left_phase_block(const Matrix& phi, const Vector& c) {
  return phi * c.asDiagonal();
}

}  // namespace

Matrix TransitionMatrix::block(int x, int y) const {
  const auto& row = rows_.at(x);
  const int offset = y - row.low;
  if (offset < 0 || offset >= static_cast<int>(row.blocks.size()))
    return Matrix::Zero(phases_, phases_);
  return row.blocks[offset];
}

const Matrix& TransitionMatrix::overflow_block(int x, int n) const {
  const auto& row = rows_.at(x);
  const int first = buffer_size() - x + 1;
  const int offset = n - first;
  if (offset < 0 || offset >= static_cast<int>(row.overflow.size()))
    throw StructuralError("no pre-fold block retained for x=" + std::to_string(x) +
                          ", increase " + std::to_string(n));
  return row.overflow[offset];
}

std::vector<int> TransitionMatrix::overflow_increments(int x) const {
  const auto& row = rows_.at(x);
  std::vector<int> out;
  const int first = buffer_size() - x + 1;
  for (std::size_t i = 0; i < row.overflow.size(); ++i)
    out.push_back(first + static_cast<int>(i));
  return out;
}

const Matrix& TransitionMatrix::prefold_full_block(int x) const {
  return rows_.at(x).prefold_full;
}

double TransitionMatrix::entry(std::size_t r, std::size_t c) const {
  const int x = static_cast<int>(r / phases_);
  const int y = static_cast<int>(c / phases_);
  const auto& row = rows_.at(x);
  const int offset = y - row.low;
  if (offset < 0 || offset >= static_cast<int>(row.blocks.size())) return 0.0;
  return row.blocks[offset](r % phases_, c % phases_);
}

Matrix TransitionMatrix::dense() const {
  const auto n = static_cast<Eigen::Index>(dimension());
  Matrix m = Matrix::Zero(n, n);
  for_each_nonzero([&](std::size_t r, std::size_t c, double v) { m(r, c) = v; });
  return m;
}

RowVector TransitionMatrix::left_multiply(const RowVector& pi) const {
  if (pi.size() != static_cast<Eigen::Index>(dimension()))
    throw StructuralError("vector length does not match chain dimension");
  RowVector out = RowVector::Zero(pi.size());
  for (int x = 0; x < levels(); ++x) {
    const auto piece = pi.segment(x * phases_, phases_);
    if ((piece.array() == 0.0).all()) continue;
    const auto& row = rows_[x];
    for (std::size_t b = 0; b < row.blocks.size(); ++b) {
      const int y = row.low + static_cast<int>(b);
      out.segment(y * phases_, phases_) += piece * row.blocks[b];
    }
  }
  return out;
}

TransitionMatrix build_transition_matrix(const QueueChainSpec& spec) {
  const int buffer = spec.buffer_size;
  const auto& kernel = spec.kernel;
  if (buffer < 1) throw StructuralError("queue capacity X must be at least 1");
  if (kernel.max_arrivals < 1)
    throw StructuralError("arrival bound A must be at least 1");
  const int phases = kernel.phases();
  const int arrivals = kernel.max_arrivals;
  const Matrix& phi = kernel.phase_transition;

  std::vector<Vector> xi;
  xi.reserve(arrivals + 1);
  for (int a = 0; a <= arrivals; ++a) xi.push_back(kernel.censored_xi(a));

  TransitionMatrix m;
  m.phases_ = phases;
  m.rows_.resize(buffer + 1);

  for (int x = 0; x <= buffer; ++x) {
    const auto pmf = spec.service.departure_pmf(x);
    const int most_departures = static_cast<int>(pmf.size()) - 1;

    // weight[n + most_departures](s') = P(net increase n, end phase s').
    std::vector<Vector> weight(most_departures + arrivals + 1, Vector::Zero(phases));
    for (int a = 0; a <= arrivals; ++a)
      for (int k = 0; k <= most_departures; ++k)
        if (pmf[k] != 0.0) weight[a - k + most_departures] += xi[a] * pmf[k];

    auto& row = m.rows_[x];
    row.low = x - most_departures;
    const int high = std::min(x + arrivals, buffer);
    for (int y = row.low; y <= high; ++y)
      row.blocks.push_back(left_phase_block(phi, weight[y - x + most_departures]));

    row.prefold_full = Matrix::Zero(phases, phases);
    if (x + arrivals >= buffer) {
      row.prefold_full = row.blocks.back();
      for (int y = buffer + 1; y <= x + arrivals; ++y) {
        row.overflow.push_back(left_phase_block(phi, weight[y - x + most_departures]));
        row.blocks.back() += row.overflow.back();
      }
    }

    for (int s = 0; s < phases; ++s) {
      double sum = 0.0;
      for (const auto& b : row.blocks) sum += b.row(s).sum();
      if (std::abs(sum - 1.0) > kRowSumFailTolerance)
        throw NumericalError("row " + state_name(static_cast<std::size_t>(x) * phases + s, phases) +
                             " of M sums to " + fmt::format("{:.17g}", sum) +
                             " (deficit " + fmt::format("{:.3g}", 1.0 - sum) + ")");
    }
  }
  return m;
}

StationaryDistribution solve_stationary(const TransitionMatrix& m,
                                        const SolverOptions& options) {
  const std::size_t n = m.dimension();
  const int phases = m.phases();

  markov::Adjacency graph(n);
  m.for_each_nonzero([&](std::size_t r, std::size_t c, double v) {
    if (r != c && v > 0.0) graph[r].push_back(static_cast<int>(c));
  });
  const auto closed = markov::closed_classes(graph);
  if (closed.size() != 1) {
    // The second closed class can never reach the first.
    throw IrreducibilityError(
        "chain has " + std::to_string(closed.size()) +
        " closed classes; state " + state_name(closed[1].front(), phases) +
        " cannot reach " + state_name(closed[0].front(), phases));
  }
  const auto& recurrent = closed.front();

  StationaryDistribution dist;
  RowVector pi = RowVector::Zero(static_cast<Eigen::Index>(n));
  if (recurrent.size() <= options.gth_max_states) {
    const std::size_t r = recurrent.size();
    std::vector<int> local(n, -1);
    for (std::size_t i = 0; i < r; ++i) local[recurrent[i]] = static_cast<int>(i);
    markov::DenseSquare work(r);
    m.for_each_nonzero([&](std::size_t row, std::size_t col, double v) {
      if (local[row] >= 0 && local[col] >= 0) work(local[row], local[col]) = v;
    });
    const auto solved = markov::gth_stationary(std::move(work));
    for (std::size_t i = 0; i < r; ++i) pi(recurrent[i]) = solved[i];
    dist.method = StationaryDistribution::Method::kGth;
  } else {
    // Lazy chain (I + M) / 2 has the same stationary vector and is aperiodic.
    pi.setConstant(1.0 / static_cast<double>(n));
    double change = 0.0;
    long it = 0;
    for (; it < options.power_max_iterations; ++it) {
      RowVector next = 0.5 * (pi + m.left_multiply(pi));
      next /= next.sum();
      change = (next - pi).cwiseAbs().maxCoeff();
      pi = std::move(next);
      if (change < options.power_tolerance) break;
    }
    if (it == options.power_max_iterations)
      throw ConvergenceError("power iteration did not converge in " +
                                 std::to_string(options.power_max_iterations) +
                                 " iterations (last change " +
                                 fmt::format("{:.3g}", change) + ")",
                             change);
    dist.method = StationaryDistribution::Method::kPowerIteration;
  }

  dist.residual = (m.left_multiply(pi) - pi).cwiseAbs().maxCoeff();
  if (dist.residual > 1e-8)
    throw NumericalError("stationary residual " + fmt::format("{:.3g}", dist.residual) +
                         " exceeds 1e-8");
  dist.pi = Matrix::Zero(m.levels(), phases);
  for (int x = 0; x < m.levels(); ++x)
    for (int s = 0; s < phases; ++s) dist.pi(x, s) = pi(x * phases + s);
  return dist;
}

Marginals extract_marginals(const StationaryDistribution& dist) {
  return {dist.pi.rowwise().sum(), dist.pi.colwise().sum().transpose()};
}

std::string to_triplets(const TransitionMatrix& m) {
  std::string out;
  m.for_each_nonzero([&](std::size_t r, std::size_t c, double v) {
    out += fmt::format("{} {} {:.17g}\n", r, c, v);
  });
  return out;
}

}  // namespace bmapq
