#pragma once

#include <optional>
#include <string>
#include <vector>

namespace bmapq {

struct RateRow {
  int rate_id = 0;
  std::string modulation;
  double bits_per_symbol = 0.0;
  double snr_threshold_db = 0.0;
};

// Adaptive modulation and coding profiles ordered by rate ID. Thresholds
// and bits/symbol are strictly increasing.
class RateTable {
 public:
  // Throws StructuralError on an empty table, rate IDs that are not 0..N-1,
  // or thresholds / bits per symbol that do not strictly increase.
  explicit RateTable(std::vector<RateRow> rows);

  // The seven IEEE 802.16 profiles (BPSK 1/2 .. 64QAM 3/4).
  static RateTable ieee80216();

  int size() const { return static_cast<int>(rows_.size()); }
  const RateRow& row(int rate_id) const;
  const std::vector<RateRow>& rows() const { return rows_; }

 private:
  std::vector<RateRow> rows_;
};

// Rate ID n with threshold_n <= gamma_db < threshold_{n+1}; nullopt below
// the first threshold (no transmission).
std::optional<int> rate_id_for_snr(double gamma_db, const RateTable& table);

enum class TransmissionMode {
  // Binomial over every queued packet, truncated at the frame capacity.
  kAllQueued,
  // Binomial over the min(x, D) packets that fit in the frame.
  kAttemptedOnly,
};

struct TransmissionModel {
  int bandwidth_b = 1;     // packets per frame at rate ID 0
  double p_success = 1.0;  // per-packet success probability
  TransmissionMode mode = TransmissionMode::kAllQueued;
};

void validate(const TransmissionModel& model);

// Packets per frame at a rate ID: floor(b * bps(n) / bps(0)); 0 for outage.
int capacity_packets(std::optional<int> rate_id,
                     const TransmissionModel& model, const RateTable& table);

// P(k packets leave in a frame), k = 0..min(x, capacity).
std::vector<double> transmit_count_pmf(int x, int capacity,
                                       const TransmissionModel& model);

// Rate ID chosen per frame. A fixed rate, or an i.i.d. draw per frame from
// a distribution over {outage, 0, ..., N-1}.
class ChannelModel {
 public:
  struct Outcome {
    std::optional<int> rate_id;  // nullopt: below the first SNR threshold
    double probability = 1.0;
  };

  static ChannelModel fixed(std::optional<int> rate_id);
  static ChannelModel from_snr(double gamma_db, const RateTable& table);
  // rate_probabilities[n] is P(rate ID n); outage receives the rest of the
  // mass given explicitly. Probabilities must sum to 1 within 1e-9.
  static ChannelModel distribution(double outage,
                                   const std::vector<double>& rate_probabilities);

  const std::vector<Outcome>& outcomes() const { return outcomes_; }
  bool is_fixed() const { return outcomes_.size() == 1; }

 private:
  std::vector<Outcome> outcomes_;
};

// Everything that determines how many packets leave in a frame.
struct ServiceModel {
  ChannelModel channel = ChannelModel::fixed(0);
  TransmissionModel transmission;
  RateTable table = RateTable::ieee80216();

  // Capacity mixture over channel outcomes, as (capacity, probability).
  std::vector<std::pair<int, double>> capacities() const;
  int max_capacity() const;
  double mean_capacity() const;
  // Departure pmf mixed over the channel distribution.
  std::vector<double> departure_pmf(int x) const;
  double mean_departures(int x) const;
};

}  // namespace bmapq
