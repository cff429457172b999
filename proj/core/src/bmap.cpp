#include <bmapq/bmap.hpp>
#include <bmapq/errors.hpp>
#include <bmapq/markov.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bmapq {
namespace {

void check_dimensions(const BmapSpec& spec) {
  if (spec.d.size() < 2)
    throw StructuralError("BMAP needs D_0 and at least one batch matrix D_1");
  const auto s = spec.d.front().rows();
  if (s < 1) throw StructuralError("BMAP needs at least one phase");
  for (std::size_t k = 0; k < spec.d.size(); ++k) {
    if (spec.d[k].rows() != s || spec.d[k].cols() != s)
      throw StructuralError("D_" + std::to_string(k) + " is " +
                            std::to_string(spec.d[k].rows()) + "x" +
                            std::to_string(spec.d[k].cols()) + ", expected " +
                            std::to_string(s) + "x" + std::to_string(s));
    if (!spec.d[k].allFinite())
      throw StructuralError("D_" + std::to_string(k) + " has non-finite entries");
  }
  if (!(spec.frame_duration >= 0.0) || !std::isfinite(spec.frame_duration))
    throw StructuralError("frame duration must be finite and nonnegative");
}

markov::Adjacency phase_graph(const Matrix& generator) {
  const int s = static_cast<int>(generator.rows());
  markov::Adjacency graph(s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j)
      if (i != j && generator(i, j) > 0.0) graph[i].push_back(j);
  return graph;
}

std::string phase_list(const std::vector<int>& phases) {
  std::string out = "{";
  for (std::size_t i = 0; i < phases.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(phases[i]);
  }
  return out + "}";
}

// Phases that cannot be reached from phase 0 or cannot reach it back.
std::vector<int> outside_main_class(const Matrix& generator) {
  const auto components =
      markov::strongly_connected_components(phase_graph(generator));
  std::vector<int> outside;
  for (const auto& c : components)
    if (std::find(c.begin(), c.end(), 0) == c.end())
      outside.insert(outside.end(), c.begin(), c.end());
  std::sort(outside.begin(), outside.end());
  return outside;
}

}  // namespace

Matrix BmapSpec::generator() const {
  Matrix sum = Matrix::Zero(phases(), phases());
  for (const auto& m : d) sum += m;
  return sum;
}

Vector BmapSpec::sojourn_rates() const { return -d.front().diagonal(); }

Vector BmapSpec::batch_mean_rates() const {
  Vector rates = Vector::Zero(phases());
  for (std::size_t k = 1; k < d.size(); ++k)
    rates += static_cast<double>(k) * d[k].rowwise().sum();
  return rates;
}

std::string to_string(BmapCheck check) {
  switch (check) {
    case BmapCheck::kD0Diagonal: return "d0_diagonal_negative";
    case BmapCheck::kD0OffDiagonal: return "d0_offdiagonal_nonnegative";
    case BmapCheck::kBatchNonnegative: return "batch_matrix_nonnegative";
    case BmapCheck::kGeneratorRowSum: return "generator_row_sum_zero";
    case BmapCheck::kArrivalsOccur: return "arrivals_occur";
    case BmapCheck::kIrreducible: return "generator_irreducible";
  }
  return "unknown";
}

bool ValidationReport::has(BmapCheck check) const {
  return std::any_of(violations.begin(), violations.end(),
                     [check](const BmapViolation& v) { return v.check == check; });
}

ValidationReport validate(const BmapSpec& spec) {
  check_dimensions(spec);
  ValidationReport report;
  const int s = spec.phases();
  const Matrix& d0 = spec.d.front();

  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      const double v = d0(i, j);
      if (i == j && !(v < 0.0)) {
        report.violations.push_back(
            {BmapCheck::kD0Diagonal, 0, i, j, v,
             "D_0[" + std::to_string(i) + "][" + std::to_string(j) +
                 "] must be strictly negative"});
      } else if (i != j && v < 0.0) {
        report.violations.push_back(
            {BmapCheck::kD0OffDiagonal, 0, i, j, -v,
             "D_0[" + std::to_string(i) + "][" + std::to_string(j) +
                 "] must be nonnegative"});
      }
    }
  }

  Matrix arrivals = Matrix::Zero(s, s);
  for (std::size_t k = 1; k < spec.d.size(); ++k) {
    const Matrix& dk = spec.d[k];
    arrivals += dk;
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j)
        if (dk(i, j) < 0.0)
          report.violations.push_back(
              {BmapCheck::kBatchNonnegative, static_cast<int>(k), i, j, -dk(i, j),
               "D_" + std::to_string(k) + "[" + std::to_string(i) + "][" +
                   std::to_string(j) + "] must be nonnegative"});
  }

  const Matrix generator = spec.generator();
  for (int i = 0; i < s; ++i) {
    const double row = generator.row(i).sum();
    if (std::abs(row) > kGeneratorRowSumTolerance)
      report.violations.push_back(
          {BmapCheck::kGeneratorRowSum, -1, i, -1, std::abs(row),
           "row " + std::to_string(i) + " of D sums to " + std::to_string(row)});
  }

  if ((arrivals.array() == 0.0).all())
    report.violations.push_back({BmapCheck::kArrivalsOccur, -1, -1, -1, 0.0,
                                 "D_1..D_K are all zero; no arrivals occur"});

  const auto outside = outside_main_class(generator);
  if (!outside.empty())
    report.violations.push_back(
        {BmapCheck::kIrreducible, -1, outside.front(), -1,
         static_cast<double>(outside.size()),
         "phases " + phase_list(outside) +
             " do not communicate with phase 0; D is reducible"});
  return report;
}

RowVector stationary_phase_vector(const BmapSpec& spec) {
  check_dimensions(spec);
  const Matrix generator = spec.generator();
  const auto outside = outside_main_class(generator);
  if (!outside.empty())
    throw IrreducibilityError("phases " + phase_list(outside) +
                              " do not communicate with phase 0; D is reducible");
  const int s = spec.phases();
  markov::DenseSquare work(s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) work(i, j) = generator(i, j);
  const auto pi = markov::gth_stationary(std::move(work));
  RowVector out(s);
  for (int i = 0; i < s; ++i) out(i) = pi[i];
  return out;
}

double mean_arrival_rate(const BmapSpec& spec) {
  return stationary_phase_vector(spec).dot(spec.batch_mean_rates());
}

BmapSpec scale_intensity(const BmapSpec& spec, double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho))
    throw std::invalid_argument("traffic scale rho must be positive");
  BmapSpec scaled = spec;
  for (auto& m : scaled.d) m *= rho;
  return scaled;
}

Matrix expm_uniformized(const Matrix& generator, double t) {
  const auto n = generator.rows();
  if (generator.cols() != n) throw StructuralError("generator must be square");
  if (t < 0.0) throw std::invalid_argument("time must be nonnegative");
  const Matrix identity = Matrix::Identity(n, n);
  double rate = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) rate = std::max(rate, -generator(i, i));
  if (t == 0.0 || rate == 0.0) return identity;
  rate *= 1.001;

  // Keep the Poisson weight exp(-rate * t) away from underflow; squaring a
  // stochastic matrix stays in nonnegative arithmetic.
  constexpr double kMaxStep = 30.0;
  int squarings = 0;
  double step = t;
  while (rate * step > kMaxStep) {
    step *= 0.5;
    ++squarings;
  }

  const Matrix p = identity + generator / rate;
  const double q = rate * step;
  double weight = std::exp(-q);
  double cumulative = weight;
  Matrix power = identity;
  Matrix result = weight * identity;
  for (int k = 1; cumulative < 1.0 - 1e-14 && k < 100000; ++k) {
    power = power * p;
    weight *= q / k;
    result += weight * power;
    cumulative += weight;
    if (weight == 0.0 && k > q) break;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

Matrix phase_transition_matrix(const BmapSpec& spec) {
  check_dimensions(spec);
  return expm_uniformized(spec.generator(), spec.frame_duration);
}

Vector poisson_rates(const BmapSpec& spec, PoissonRateBasis basis) {
  return basis == PoissonRateBasis::kSojourn ? spec.sojourn_rates()
                                             : spec.batch_mean_rates();
}

Vector FrameArrivalKernel::censored_xi(int a) const {
  Vector v = xi.at(a);
  if (a == max_arrivals) v += tail;
  return v;
}

Vector FrameArrivalKernel::mean_arrivals() const {
  Vector mean = Vector::Zero(phases());
  for (int a = 1; a <= max_arrivals; ++a) mean += a * censored_xi(a);
  return mean;
}

FrameArrivalKernel poisson_arrival_kernel(Matrix phase_transition,
                                          const Vector& frame_means,
                                          int min_arrivals, double er,
                                          TruncationOptions options) {
  if (!(er > 0.0 && er < 1.0))
    throw std::invalid_argument("truncation error er must lie in (0, 1)");
  const int s = static_cast<int>(phase_transition.rows());
  if (phase_transition.cols() != s || frame_means.size() != s)
    throw StructuralError("arrival kernel dimensions disagree");
  if ((frame_means.array() < 0.0).any() || !frame_means.allFinite())
    throw std::invalid_argument("per-frame arrival means must be finite and >= 0");

  const double top = frame_means.size() ? frame_means.maxCoeff() : 0.0;
  const int cap = options.max_arrivals_cap.value_or(
      static_cast<int>(std::floor(10.0 * top)) + 50);
  // Enough terms past the cap that the remaining Poisson mass is below
  // double precision.
  const int horizon = std::max(
      cap, static_cast<int>(top + 50.0 * std::sqrt(top) + 100.0)) + 1;

  std::vector<std::vector<double>> pmf(s, std::vector<double>(horizon + 1, 0.0));
  std::vector<std::vector<double>> tail_after(s, std::vector<double>(horizon + 1, 0.0));
  int required = std::max(min_arrivals, 0);
  for (int p = 0; p < s; ++p) {
    const double mu = frame_means(p);
    for (int a = 0; a <= horizon; ++a) {
      if (mu == 0.0) {
        pmf[p][a] = a == 0 ? 1.0 : 0.0;
      } else {
        pmf[p][a] = std::exp(-mu + a * std::log(mu) - std::lgamma(a + 1.0));
      }
    }
    // tail_after[a] = P(N > a), summed from the small end.
    double acc = 0.0;
    for (int a = horizon; a >= 0; --a) {
      tail_after[p][a] = acc;
      acc += pmf[p][a];
    }
    int a_p = 0;
    while (a_p <= horizon && !(tail_after[p][a_p] < er)) ++a_p;
    required = std::max(required, a_p);
  }
  if (required > cap)
    throw TruncationError("arrival bound A = " + std::to_string(required) +
                          " exceeds cap " + std::to_string(cap) +
                          " for er = " + std::to_string(er));

  FrameArrivalKernel kernel;
  kernel.phase_transition = std::move(phase_transition);
  kernel.max_arrivals = required;
  kernel.er = er;
  kernel.xi.assign(required + 1, Vector::Zero(s));
  kernel.tail = Vector::Zero(s);
  for (int p = 0; p < s; ++p) {
    for (int a = 0; a <= required; ++a) kernel.xi[a](p) = pmf[p][a];
    kernel.tail(p) = tail_after[p][required];
  }
  return kernel;
}

FrameArrivalKernel arrival_count_matrices(const BmapSpec& spec, double er,
                                          PoissonRateBasis basis,
                                          TruncationOptions options) {
  check_dimensions(spec);
  const Vector means = poisson_rates(spec, basis) * spec.frame_duration;
  return poisson_arrival_kernel(phase_transition_matrix(spec), means,
                                spec.max_batch(), er, options);
}

FrameArrivalKernel no_arrival_kernel(const BmapSpec& spec) {
  check_dimensions(spec);
  return poisson_arrival_kernel(phase_transition_matrix(spec),
                                Vector::Zero(spec.phases()), spec.max_batch(),
                                1e-9);
}

}  // namespace bmapq
