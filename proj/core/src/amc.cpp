#include <bmapq/amc.hpp>
#include <bmapq/errors.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace bmapq {
namespace {

double log_binomial_pmf(int n, int k, double p) {
  const double log_choose =
      std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return log_choose + k * std::log(p) + (n - k) * std::log1p(-p);
}

// Binomial(n, p) pmf for k = 0..n.
std::vector<double> binomial_pmf(int n, double p) {
  std::vector<double> pmf(n + 1, 0.0);
  if (p >= 1.0) {
    pmf[n] = 1.0;
    return pmf;
  }
  for (int k = 0; k <= n; ++k) pmf[k] = std::exp(log_binomial_pmf(n, k, p));
  return pmf;
}

}  // namespace

RateTable::RateTable(std::vector<RateRow> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw StructuralError("rate table is empty");
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    if (r.rate_id != static_cast<int>(i))
      throw StructuralError("rate table row " + std::to_string(i) +
                            " has rate_id " + std::to_string(r.rate_id));
    if (!(r.bits_per_symbol > 0.0))
      throw StructuralError("rate " + std::to_string(i) +
                            ": bits per symbol must be positive");
    if (i > 0) {
      if (!(r.snr_threshold_db > rows_[i - 1].snr_threshold_db))
        throw StructuralError("SNR thresholds must strictly increase (rate " +
                              std::to_string(i) + ")");
      if (!(r.bits_per_symbol > rows_[i - 1].bits_per_symbol))
        throw StructuralError("bits per symbol must strictly increase (rate " +
                              std::to_string(i) + ")");
    }
  }
}

RateTable RateTable::ieee80216() {
  return RateTable({
      {0, "BPSK (1/2)", 0.5, 6.4},
      {1, "QPSK (1/2)", 1.0, 9.4},
      {2, "QPSK (3/4)", 1.5, 11.2},
      {3, "16QAM (1/2)", 2.0, 16.4},
      {4, "16QAM (3/4)", 3.0, 18.2},
      {5, "64QAM (2/3)", 4.0, 22.7},
      {6, "64QAM (3/4)", 4.5, 24.4},
  });
}

const RateRow& RateTable::row(int rate_id) const {
  if (rate_id < 0 || rate_id >= size())
    throw StructuralError("rate ID " + std::to_string(rate_id) +
                          " outside table of " + std::to_string(size()) + " rows");
  return rows_[rate_id];
}

std::optional<int> rate_id_for_snr(double gamma_db, const RateTable& table) {
  std::optional<int> chosen;
  for (const auto& r : table.rows()) {
    if (r.snr_threshold_db <= gamma_db) chosen = r.rate_id;
    else break;
  }
  return chosen;
}

void validate(const TransmissionModel& model) {
  if (model.bandwidth_b < 1)
    throw std::invalid_argument("bandwidth b must be at least 1 packet/frame");
  if (!(model.p_success > 0.0 && model.p_success <= 1.0))
    throw std::invalid_argument("p_success must lie in (0, 1]");
}

int capacity_packets(std::optional<int> rate_id, const TransmissionModel& model,
                     const RateTable& table) {
  if (!rate_id) return 0;
  const double ratio =
      table.row(*rate_id).bits_per_symbol / table.row(0).bits_per_symbol;
  return static_cast<int>(std::floor(model.bandwidth_b * ratio + 1e-9));
}

std::vector<double> transmit_count_pmf(int x, int capacity,
                                       const TransmissionModel& model) {
  if (x < 0 || capacity < 0)
    throw std::invalid_argument("occupancy and capacity must be nonnegative");
  const int limit = std::min(x, capacity);
  if (limit == 0) return {1.0};
  const int trials = model.mode == TransmissionMode::kAllQueued ? x : limit;
  const auto binom = binomial_pmf(trials, model.p_success);
  std::vector<double> pmf(binom.begin(), binom.begin() + limit);
  double saturated = 0.0;
  for (int j = trials; j >= limit; --j) saturated += binom[j];
  pmf.push_back(saturated);
  return pmf;
}

ChannelModel ChannelModel::fixed(std::optional<int> rate_id) {
  ChannelModel c;
  c.outcomes_.push_back({rate_id, 1.0});
  return c;
}

ChannelModel ChannelModel::from_snr(double gamma_db, const RateTable& table) {
  return fixed(rate_id_for_snr(gamma_db, table));
}

ChannelModel ChannelModel::distribution(double outage,
                                        const std::vector<double>& rate_probabilities) {
  double total = outage;
  if (outage < 0.0) throw std::invalid_argument("outage probability is negative");
  ChannelModel c;
  if (outage > 0.0) c.outcomes_.push_back({std::nullopt, outage});
  for (std::size_t n = 0; n < rate_probabilities.size(); ++n) {
    const double p = rate_probabilities[n];
    if (p < 0.0) throw std::invalid_argument("rate probability is negative");
    total += p;
    if (p > 0.0) c.outcomes_.push_back({static_cast<int>(n), p});
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("channel distribution sums to " +
                                std::to_string(total) + ", expected 1");
  return c;
}

std::vector<std::pair<int, double>> ServiceModel::capacities() const {
  std::map<int, double> merged;
  for (const auto& o : channel.outcomes())
    merged[capacity_packets(o.rate_id, transmission, table)] += o.probability;
  return {merged.begin(), merged.end()};
}

int ServiceModel::max_capacity() const {
  int top = 0;
  for (const auto& [cap, p] : capacities()) top = std::max(top, cap);
  return top;
}

double ServiceModel::mean_capacity() const {
  double mean = 0.0;
  for (const auto& [cap, p] : capacities()) mean += cap * p;
  return mean;
}

std::vector<double> ServiceModel::departure_pmf(int x) const {
  const auto caps = capacities();
  if (caps.size() == 1) return transmit_count_pmf(x, caps.front().first, transmission);
  std::vector<double> mixed(std::min(x, max_capacity()) + 1, 0.0);
  for (const auto& [cap, p] : caps) {
    const auto pmf = transmit_count_pmf(x, cap, transmission);
    for (std::size_t k = 0; k < pmf.size(); ++k) mixed[k] += p * pmf[k];
  }
  return mixed;
}

double ServiceModel::mean_departures(int x) const {
  const auto pmf = departure_pmf(x);
  double mean = 0.0;
  for (std::size_t k = 1; k < pmf.size(); ++k) mean += k * pmf[k];
  return mean;
}

}  // namespace bmapq
