#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace bmapq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Batch Markovian arrival process. d[0] holds the rates of phase changes
// without arrivals, d[k] (k >= 1) the rates of phase changes that bring a
// batch of k packets. Rates are per unit time; frame_duration converts them
// to per-frame quantities.
struct BmapSpec {
  std::vector<Matrix> d;
  double frame_duration = 1.0;

  int phases() const { return d.empty() ? 0 : static_cast<int>(d.front().rows()); }
  int max_batch() const { return static_cast<int>(d.size()) - 1; }

  // D = sum_k D_k, the generator of the phase process.
  Matrix generator() const;
  // Total event rate out of each phase, -[D_0]_ss.
  Vector sojourn_rates() const;
  // Mean packets per unit time generated while in each phase,
  // sum_k k * D_k * e.
  Vector batch_mean_rates() const;
};

enum class BmapCheck {
  kD0Diagonal,
  kD0OffDiagonal,
  kBatchNonnegative,
  kGeneratorRowSum,
  kArrivalsOccur,
  kIrreducible,
};

std::string to_string(BmapCheck check);

struct BmapViolation {
  BmapCheck check;
  int matrix = -1;  // index k of D_k, -1 for the generator
  int row = -1;
  int col = -1;
  double magnitude = 0.0;
  std::string message;
};

struct ValidationReport {
  std::vector<BmapViolation> violations;

  bool ok() const { return violations.empty(); }
  bool has(BmapCheck check) const;
};

inline constexpr double kGeneratorRowSumTolerance = 1e-9;

// Checks every structural invariant of a BMAP. Dimension problems throw
// StructuralError; invariant violations are listed in the report.
ValidationReport validate(const BmapSpec& spec);

// pi * D = 0, pi * e = 1. Throws IrreducibilityError if D has more than one
// communicating class.
RowVector stationary_phase_vector(const BmapSpec& spec);

// pi * (sum_k k D_k) * e, packets per unit time.
double mean_arrival_rate(const BmapSpec& spec);

// Every D_k multiplied by rho (> 0).
BmapSpec scale_intensity(const BmapSpec& spec, double rho);

// exp(generator * t) by uniformization. The generator must have nonnegative
// off-diagonal entries and nonpositive row sums.
Matrix expm_uniformized(const Matrix& generator, double t);

// Phase transition probabilities over one frame, exp(D * T).
Matrix phase_transition_matrix(const BmapSpec& spec);

// Which per-phase rate drives the Poisson arrival count of a frame.
//   kSojourn    lambda_s = -[D_0]_ss, the total leaving rate of phase s
//   kBatchMean  lambda_s = [sum_k k D_k e]_s, preserves the BMAP mean rate
enum class PoissonRateBasis { kSojourn, kBatchMean };

Vector poisson_rates(const BmapSpec& spec, PoissonRateBasis basis);

// Per-frame building blocks of the queue chain. xi[a](s) is the probability
// of a arrivals in a frame spent in phase s; xi[a] is the diagonal of the
// matrix xi_a. tail(s) is the Poisson mass beyond max_arrivals.
struct FrameArrivalKernel {
  Matrix phase_transition;
  int max_arrivals = 0;
  std::vector<Vector> xi;
  Vector tail;
  double er = 0.0;

  int phases() const { return static_cast<int>(phase_transition.rows()); }
  Matrix xi_matrix(int a) const { return xi.at(a).asDiagonal(); }
  double tail_mass() const { return tail.size() ? tail.maxCoeff() : 0.0; }
  // Arrival-count distribution seen by the queue chain: xi with the tail
  // mass of every phase assigned to max_arrivals.
  Vector censored_xi(int a) const;
  // Mean arrivals per frame in each phase under censored_xi.
  Vector mean_arrivals() const;
};

struct TruncationOptions {
  // Hard cap on the truncation bound. Default 10 * max_s(lambda_s T) + 50.
  std::optional<int> max_arrivals_cap;
};

// Poisson arrival kernel for given per-frame means (lambda_s * T). The bound
// is the smallest A >= min_arrivals with P(a > A) < er in every phase.
FrameArrivalKernel poisson_arrival_kernel(Matrix phase_transition,
                                          const Vector& frame_means,
                                          int min_arrivals, double er,
                                          TruncationOptions options = {});

// Kernel of a BMAP with A >= K.
FrameArrivalKernel arrival_count_matrices(
    const BmapSpec& spec, double er,
    PoissonRateBasis basis = PoissonRateBasis::kSojourn,
    TruncationOptions options = {});

// Kernel for a frame in which nothing arrives; the phase still evolves.
FrameArrivalKernel no_arrival_kernel(const BmapSpec& spec);

}  // namespace bmapq
