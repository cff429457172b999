#pragma once

#include <bmapq/amc.hpp>
#include <bmapq/bmap.hpp>

#include <cstddef>
#include <string>
#include <vector>

namespace bmapq {

struct QueueChainSpec {
  int buffer_size = 1;  // X
  FrameArrivalKernel kernel;
  ServiceModel service;
};

// Block transition matrix of the (occupancy, phase) chain. Levels are
// x = 0..X, each level holds S phases; state (x, s) has index x * S + s.
// Only the band of nonzero blocks is stored. The blocks that would land
// past the buffer before folding are kept for drop accounting.
class TransitionMatrix {
 public:
  int levels() const { return static_cast<int>(rows_.size()); }
  int phases() const { return phases_; }
  int buffer_size() const { return levels() - 1; }
  std::size_t dimension() const {
    return static_cast<std::size_t>(levels()) * phases_;
  }

  // Lowest and highest destination level reachable from level x.
  int band_low(int x) const { return rows_.at(x).low; }
  int band_high(int x) const {
    return rows_.at(x).low + static_cast<int>(rows_.at(x).blocks.size()) - 1;
  }

  // m_{x,y}; a zero block outside the band.
  Matrix block(int x, int y) const;

  // Pre-fold block m'_{x,x+n} for a net increase n that lands past X
  // (x + n > X). Throws StructuralError if it was not retained.
  const Matrix& overflow_block(int x, int n) const;
  // Net increases n with x + n > X, in increasing order.
  std::vector<int> overflow_increments(int x) const;
  // m'_{x,X}: the unfolded block that lands exactly on X.
  const Matrix& prefold_full_block(int x) const;

  double entry(std::size_t row, std::size_t col) const;
  Matrix dense() const;
  // pi * M for a row vector of length dimension().
  RowVector left_multiply(const RowVector& pi) const;

  template <typename F>
  void for_each_nonzero(F&& f) const {
    for (int x = 0; x < levels(); ++x) {
      const auto& row = rows_[x];
      for (std::size_t b = 0; b < row.blocks.size(); ++b) {
        const int y = row.low + static_cast<int>(b);
        const Matrix& m = row.blocks[b];
        for (int s = 0; s < phases_; ++s)
          for (int t = 0; t < phases_; ++t)
            if (m(s, t) != 0.0)
              f(static_cast<std::size_t>(x) * phases_ + s,
                static_cast<std::size_t>(y) * phases_ + t, m(s, t));
      }
    }
  }

 private:
  friend TransitionMatrix build_transition_matrix(const QueueChainSpec& spec);

  struct BlockRow {
    int low = 0;
    std::vector<Matrix> blocks;            // levels low..high
    std::vector<Matrix> overflow;          // n = X - x + 1 .. X - x + size
    Matrix prefold_full;                   // m'_{x,X}
  };

  int phases_ = 0;
  std::vector<BlockRow> rows_;
};

inline constexpr double kRowSumFailTolerance = 1e-8;

// Assembles M. Arrivals beyond the truncation bound are counted as
// max_arrivals. Throws NumericalError if a row misses 1 by more than 1e-8.
TransitionMatrix build_transition_matrix(const QueueChainSpec& spec);

struct StationaryDistribution {
  Matrix pi;  // (X + 1) x S, pi(x, s)
  double residual = 0.0;
  enum class Method { kGth, kPowerIteration } method = Method::kGth;

  int levels() const { return static_cast<int>(pi.rows()); }
  int phases() const { return static_cast<int>(pi.cols()); }
};

struct SolverOptions {
  std::size_t gth_max_states = 2000;
  double power_tolerance = 1e-12;
  long power_max_iterations = 1'000'000;
};

// Solves pi M = pi, pi 1 = 1. States outside the single closed class get
// probability zero; more than one closed class throws IrreducibilityError.
StationaryDistribution solve_stationary(const TransitionMatrix& m,
                                        const SolverOptions& options = {});

struct Marginals {
  Vector queue;  // q(x), x = 0..X
  Vector phase;  // p(s)
};

Marginals extract_marginals(const StationaryDistribution& dist);

// Triplet dump "row col value", one nonzero per line, 17 significant digits.
std::string to_triplets(const TransitionMatrix& m);

}  // namespace bmapq
