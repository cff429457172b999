#include <bmapq/errors.hpp>
#include <bmapq/experiment.hpp>

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace bmapq {
namespace {

std::string where(const YAML::Node& node) {
  const auto mark = node.Mark();
  if (mark.line < 0) return "";
  return " (line " + std::to_string(mark.line + 1) + ", column " +
         std::to_string(mark.column + 1) + ")";
}

void expect_map(const YAML::Node& node, const std::string& path,
                const std::set<std::string>& keys) {
  if (!node.IsMap()) throw ConfigError(path, "expected a mapping" + where(node));
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!keys.count(key))
      throw ConfigError(path.empty() ? key : path + "." + key,
                        "unknown field" + where(kv.first));
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& path, const char* expected) {
  if (!node.IsScalar()) throw ConfigError(path, std::string("expected ") + expected + where(node));
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(path, std::string("expected ") + expected + where(node));
  }
}

double number(const YAML::Node& node, const std::string& path) {
  const double v = scalar<double>(node, path, "a number");
  if (!std::isfinite(v)) throw ConfigError(path, "must be finite" + where(node));
  return v;
}

long long integer(const YAML::Node& node, const std::string& path) {
  return scalar<long long>(node, path, "an integer");
}

std::vector<double> number_list(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence()) throw ConfigError(path, "expected a list" + where(node));
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i)
    out.push_back(number(node[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

Matrix matrix(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence() || node.size() == 0)
    throw ConfigError(path, "expected a nonempty list of rows" + where(node));
  const auto rows = static_cast<Eigen::Index>(node.size());
  Matrix m;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto row = number_list(node[i], path + "[" + std::to_string(i) + "]");
    if (i == 0) m.resize(rows, static_cast<Eigen::Index>(row.size()));
    if (static_cast<Eigen::Index>(row.size()) != m.cols())
      throw ConfigError(path, "rows have different lengths" + where(node[i]));
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = row[j];
  }
  return m;
}

PoissonRateBasis parse_basis(const YAML::Node& node, const std::string& path) {
  const auto v = scalar<std::string>(node, path, "a string");
  if (v == "sojourn") return PoissonRateBasis::kSojourn;
  if (v == "batch_mean") return PoissonRateBasis::kBatchMean;
  throw ConfigError(path, "expected sojourn or batch_mean" + where(node));
}

TransmissionMode parse_mode(const YAML::Node& node, const std::string& path) {
  const auto v = scalar<std::string>(node, path, "a string");
  if (v == "all_queued") return TransmissionMode::kAllQueued;
  if (v == "attempted_only") return TransmissionMode::kAttemptedOnly;
  throw ConfigError(path, "expected all_queued or attempted_only" + where(node));
}

ArrivalMode parse_arrival_mode(const YAML::Node& node, const std::string& path) {
  const auto v = scalar<std::string>(node, path, "a string");
  if (v == "poisson_per_phase") return ArrivalMode::kPoissonPerPhase;
  if (v == "exact_bmap") return ArrivalMode::kExactBmap;
  throw ConfigError(path, "expected poisson_per_phase or exact_bmap" + where(node));
}

void apply(const YAML::Node& root, ExperimentConfig& cfg) {
  if (!root || root.IsNull()) return;
  expect_map(root, "", {"bmap", "rate_table", "channel", "transmission", "queue",
                        "sweep", "simulation", "output"});

  if (const auto n = root["bmap"]) {
    expect_map(n, "bmap", {"D", "arrival_rate_basis"});
    if (const auto d = n["D"]) {
      if (!d.IsSequence() || d.size() < 2)
        throw ConfigError("bmap.D", "expected a list of at least two matrices D_0, D_1" + where(d));
      std::vector<Matrix> ms;
      for (std::size_t k = 0; k < d.size(); ++k)
        ms.push_back(matrix(d[k], "bmap.D[" + std::to_string(k) + "]"));
      cfg.bmap.d = std::move(ms);
    }
    if (const auto b = n["arrival_rate_basis"])
      cfg.basis = parse_basis(b, "bmap.arrival_rate_basis");
  }

  if (const auto n = root["rate_table"]) {
    if (!n.IsSequence() || n.size() == 0)
      throw ConfigError("rate_table", "expected a nonempty list of rows" + where(n));
    std::vector<RateRow> rows;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const std::string path = "rate_table[" + std::to_string(i) + "]";
      expect_map(n[i], path, {"modulation", "bits_per_symbol", "snr_threshold_db"});
      RateRow r;
      r.rate_id = static_cast<int>(i);
      if (n[i]["modulation"]) r.modulation = scalar<std::string>(n[i]["modulation"], path + ".modulation", "a string");
      if (!n[i]["bits_per_symbol"] || !n[i]["snr_threshold_db"])
        throw ConfigError(path, "needs bits_per_symbol and snr_threshold_db" + where(n[i]));
      r.bits_per_symbol = number(n[i]["bits_per_symbol"], path + ".bits_per_symbol");
      r.snr_threshold_db = number(n[i]["snr_threshold_db"], path + ".snr_threshold_db");
      rows.push_back(r);
    }
    try {
      cfg.table = RateTable(std::move(rows));
    } catch (const StructuralError& e) {
      throw ConfigError("rate_table", e.what());
    }
  }

  if (const auto n = root["channel"]) {
    expect_map(n, "channel", {"rate_id", "snr_db", "distribution"});
    if (n.size() != 1)
      throw ConfigError("channel", "give exactly one of rate_id, snr_db, distribution" + where(n));
    ChannelSpec c;
    if (const auto v = n["rate_id"]) {
      c.kind = ChannelSpec::Kind::kRateId;
      c.rate_id = static_cast<int>(integer(v, "channel.rate_id"));
    } else if (const auto v = n["snr_db"]) {
      c.kind = ChannelSpec::Kind::kSnr;
      c.snr_db = number(v, "channel.snr_db");
    } else {
      const auto dist = n["distribution"];
      expect_map(dist, "channel.distribution", {"outage", "rates"});
      c.kind = ChannelSpec::Kind::kDistribution;
      if (dist["outage"]) c.outage = number(dist["outage"], "channel.distribution.outage");
      if (!dist["rates"]) throw ConfigError("channel.distribution.rates", "missing" + where(dist));
      c.rate_probabilities = number_list(dist["rates"], "channel.distribution.rates");
    }
    cfg.channel = c;
  }

  if (const auto n = root["transmission"]) {
    expect_map(n, "transmission", {"bandwidth_b", "p_success", "mode"});
    if (n["bandwidth_b"]) {
      const auto b = integer(n["bandwidth_b"], "transmission.bandwidth_b");
      if (b < 1 || b > std::numeric_limits<int>::max())
        throw ConfigError("transmission.bandwidth_b", "must be a positive integer");
      cfg.transmission.bandwidth_b = static_cast<int>(b);
    }
    if (n["p_success"]) cfg.transmission.p_success = number(n["p_success"], "transmission.p_success");
    if (n["mode"]) cfg.transmission.mode = parse_mode(n["mode"], "transmission.mode");
  }

  if (const auto n = root["queue"]) {
    expect_map(n, "queue", {"X", "er", "T"});
    if (n["X"]) {
      const auto x = integer(n["X"], "queue.X");
      if (x < 1 || x > 1'000'000) throw ConfigError("queue.X", "must be a positive integer");
      cfg.buffer_size = static_cast<int>(x);
    }
    if (n["er"]) cfg.er = number(n["er"], "queue.er");
    if (n["T"]) cfg.bmap.frame_duration = number(n["T"], "queue.T");
  }

  if (const auto n = root["sweep"]) {
    expect_map(n, "sweep", {"traffic_intensity", "rate_id", "bandwidth_b"});
    if (n.size() != 1)
      throw ConfigError("sweep", "exactly one sweep axis per run" + where(n));
    const auto kv = *n.begin();
    const auto key = kv.first.as<std::string>();
    cfg.values = number_list(kv.second, "sweep." + key);
    cfg.axis = key == "traffic_intensity" ? SweepAxis::kTrafficIntensity
               : key == "rate_id"         ? SweepAxis::kRateId
                                          : SweepAxis::kBandwidth;
  }

  if (const auto n = root["simulation"]) {
    expect_map(n, "simulation",
               {"frames", "warmup", "seed", "replications", "batches", "arrival_mode"});
    SimulationSettings s = cfg.simulation.value_or(SimulationSettings{});
    bool warmup_given = false;
    if (n["frames"]) s.frames = integer(n["frames"], "simulation.frames");
    if (n["warmup"]) {
      s.warmup = integer(n["warmup"], "simulation.warmup");
      warmup_given = true;
    }
    if (!warmup_given) s.warmup = s.frames / 10;
    if (n["seed"]) s.seed = scalar<std::uint64_t>(n["seed"], "simulation.seed", "a 64-bit unsigned integer");
    if (n["replications"]) s.replications = static_cast<int>(integer(n["replications"], "simulation.replications"));
    if (n["batches"]) s.batches = static_cast<int>(integer(n["batches"], "simulation.batches"));
    if (n["arrival_mode"]) s.arrival_mode = parse_arrival_mode(n["arrival_mode"], "simulation.arrival_mode");
    cfg.simulation = s;
  }

  if (const auto n = root["output"]) cfg.output = scalar<std::string>(n, "output", "a path");
}

}  // namespace

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kTrafficIntensity: return "traffic_intensity";
    case SweepAxis::kRateId: return "rate_id";
    case SweepAxis::kBandwidth: return "bandwidth_b";
  }
  return "unknown";
}

ChannelModel ChannelSpec::resolve(const RateTable& table) const {
  switch (kind) {
    case Kind::kRateId:
      table.row(rate_id);
      return ChannelModel::fixed(rate_id);
    case Kind::kSnr:
      return ChannelModel::from_snr(snr_db, table);
    case Kind::kDistribution:
      if (static_cast<int>(rate_probabilities.size()) > table.size())
        throw StructuralError("channel distribution lists more rates than the table");
      return ChannelModel::distribution(outage, rate_probabilities);
  }
  return ChannelModel::fixed(0);
}

BmapSpec default_bmap() {
  BmapSpec spec;
  Matrix d0(2, 2), d1(2, 2), d2(2, 2);
  d0 << -2.0, 0.5, 0.125, -1.0;
  d1 << 0.5, 0.25, 0.25, 0.25;
  d2 << 0.25, 0.5, 0.25, 0.125;
  spec.d = {d0, d1, d2};
  spec.frame_duration = 1.0;
  return spec;
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.bmap = default_bmap();
  cfg.transmission.bandwidth_b = 150;
  cfg.transmission.p_success = 0.9;
  cfg.transmission.mode = TransmissionMode::kAllQueued;
  cfg.buffer_size = 150;
  cfg.er = 1e-9;
  cfg.axis = SweepAxis::kTrafficIntensity;
  cfg.values = {1.0};
  return cfg;
}

ExperimentConfig preset(std::string_view name) {
  if (name == "defaults") return default_config();
  if (name == "desk") {
    ExperimentConfig cfg = default_config();
    cfg.buffer_size = 50;
    cfg.transmission.bandwidth_b = 3;
    cfg.values.clear();
    for (int i = 1; i <= 12; ++i) cfg.values.push_back(0.25 * i);
    return cfg;
  }
  throw ConfigError("preset", "unknown preset '" + std::string(name) +
                                  "' (known: defaults, desk)");
}

void validate(const ExperimentConfig& cfg) {
  try {
    const auto report = validate(cfg.bmap);
    if (!report.ok()) throw ConfigError("bmap.D", report.violations.front().message);
  } catch (const StructuralError& e) {
    throw ConfigError("bmap.D", e.what());
  }
  if (!(cfg.bmap.frame_duration > 0.0)) throw ConfigError("queue.T", "must be positive");
  if (!(cfg.er > 0.0 && cfg.er < 1.0)) throw ConfigError("queue.er", "must lie in (0, 1)");
  if (cfg.buffer_size < 1) throw ConfigError("queue.X", "must be a positive integer");
  if (cfg.transmission.bandwidth_b < 1)
    throw ConfigError("transmission.bandwidth_b", "must be a positive integer");
  if (!(cfg.transmission.p_success > 0.0 && cfg.transmission.p_success <= 1.0))
    throw ConfigError("transmission.p_success", "must lie in (0, 1]");
  try {
    cfg.channel.resolve(cfg.table);
  } catch (const std::exception& e) {
    throw ConfigError("channel", e.what());
  }

  const std::string axis_path = "sweep." + to_string(cfg.axis);
  if (cfg.values.empty()) throw ConfigError(axis_path, "needs at least one value");
  for (double v : cfg.values) {
    switch (cfg.axis) {
      case SweepAxis::kTrafficIntensity:
        if (!(v >= 0.0)) throw ConfigError(axis_path, "traffic scale must be >= 0");
        if (v == 0.0 && cfg.simulation &&
            cfg.simulation->arrival_mode == ArrivalMode::kExactBmap)
          throw ConfigError(axis_path, "zero traffic cannot be simulated in exact_bmap mode");
        break;
      case SweepAxis::kRateId:
        if (v != std::floor(v) || v < 0 || v >= cfg.table.size())
          throw ConfigError(axis_path, "rate IDs must be integers in 0.." +
                                           std::to_string(cfg.table.size() - 1));
        break;
      case SweepAxis::kBandwidth:
        if (v != std::floor(v) || v < 1 || v > std::numeric_limits<int>::max())
          throw ConfigError(axis_path, "bandwidth values must be positive integers");
        break;
    }
  }
  if (cfg.simulation) {
    const auto& s = *cfg.simulation;
    if (s.frames < 1) throw ConfigError("simulation.frames", "must be positive");
    if (s.warmup < 0 || s.warmup >= s.frames)
      throw ConfigError("simulation.warmup", "must satisfy 0 <= warmup < frames");
    if (s.replications < 1) throw ConfigError("simulation.replications", "must be >= 1");
    if (s.batches < 2) throw ConfigError("simulation.batches", "must be >= 2");
  }
}

ExperimentConfig parse_config(std::string_view text, const ExperimentConfig& base) {
  ExperimentConfig cfg = base;
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError("", "parse error at line " + std::to_string(e.mark.line + 1) +
                              ", column " + std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  apply(root, cfg);
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const ExperimentConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), base);
}

PointModel point_model(const ExperimentConfig& cfg, double value) {
  PointModel p;
  p.value = value;
  p.spec = cfg.bmap;
  p.buffer_size = cfg.buffer_size;
  p.er = cfg.er;
  p.service.table = cfg.table;
  p.service.transmission = cfg.transmission;
  p.service.channel = cfg.channel.resolve(cfg.table);
  double rho = 1.0;
  switch (cfg.axis) {
    case SweepAxis::kTrafficIntensity:
      rho = value;
      if (value == 0.0) {
        p.zero_traffic = true;
      } else {
        p.spec = scale_intensity(cfg.bmap, value);
      }
      break;
    case SweepAxis::kRateId:
      p.service.channel = ChannelModel::fixed(static_cast<int>(value));
      break;
    case SweepAxis::kBandwidth:
      p.service.transmission.bandwidth_b = static_cast<int>(value);
      break;
  }
  p.poisson_rates = p.zero_traffic ? Vector(Vector::Zero(p.spec.phases()))
                                   : poisson_rates(p.spec, cfg.basis);
  const double capacity = p.service.mean_capacity();
  const double offered = rho * mean_arrival_rate(cfg.bmap) * cfg.bmap.frame_duration;
  p.intensity = capacity > 0.0 ? offered / capacity
                               : (offered > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  return p;
}

AnalysisResult analyze_point(const PointModel& p) {
  const double frame = p.spec.frame_duration;
  auto kernel = poisson_arrival_kernel(phase_transition_matrix(p.spec),
                                       p.poisson_rates * frame, p.spec.max_batch(), p.er);
  AnalysisResult r{QueueChainSpec{p.buffer_size, std::move(kernel), p.service}, {}, {}, {}};
  r.matrix = build_transition_matrix(r.chain);
  if (p.zero_traffic) {
    // Nothing ever arrives at the initially empty queue; the chain may have
    // other closed classes (no service at all) that are never entered.
    r.distribution.pi = Matrix::Zero(r.matrix.levels(), r.matrix.phases());
    r.distribution.pi.row(0) = stationary_phase_vector(p.spec);
    RowVector flat(static_cast<Eigen::Index>(r.matrix.dimension()));
    flat.setZero();
    flat.head(r.matrix.phases()) = r.distribution.pi.row(0);
    r.distribution.residual = (r.matrix.left_multiply(flat) - flat).cwiseAbs().maxCoeff();
  } else {
    r.distribution = solve_stationary(r.matrix);
  }
  const double lambda_bmap = p.zero_traffic ? 0.0 : mean_arrival_rate(p.spec) * frame;
  r.report = evaluate(r.distribution, r.matrix, r.chain, lambda_bmap, frame);
  check_invariants(r.report, r.distribution, p.service);
  return r;
}

SimConfig make_sim_config(const PointModel& p, const SimulationSettings& s) {
  if (p.zero_traffic && s.arrival_mode == ArrivalMode::kExactBmap)
    throw std::invalid_argument("zero traffic cannot be simulated in exact_bmap mode");
  SimConfig c;
  c.spec = p.spec;
  c.poisson_rates = p.poisson_rates;
  c.service = p.service;
  c.buffer_size = p.buffer_size;
  c.arrival_mode = s.arrival_mode;
  c.frames = s.frames;
  c.warmup = s.warmup;
  c.seed = s.seed;
  c.replications = s.replications;
  c.batches = s.batches;
  return c;
}

bool SweepResult::ok() const { return status() == 0; }

int SweepResult::status() const {
  int worst = 0;
  for (const auto& r : rows) worst = std::max(worst, r.status);
  return worst;
}

bool SweepResult::any_flagged() const {
  return std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) {
    return r.comparison && r.comparison->any_flagged();
  });
}

SweepResult run_sweep(const ExperimentConfig& cfg, const SweepOptions& options) {
  validate(cfg);
  if (options.simulate && !cfg.simulation)
    throw ConfigError("simulation", "simulation block required");
  std::vector<double> values = cfg.values;
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  SweepResult out;
  for (double v : values) {
    SweepRow row;
    row.value = v;
    try {
      PointModel point = point_model(cfg, v);
      row.intensity = point.intensity;
      if (options.analytic) {
        PointModel analytic = point;
        if (options.flip_success_exponent)
          analytic.service.transmission.p_success = 1.0 - point.service.transmission.p_success;
        validate(analytic.service.transmission);
        row.analytic = analyze_point(analytic).report;
      }
      if (options.simulate) {
        row.simulated = run(make_sim_config(point, *cfg.simulation));
        if (row.analytic && cfg.simulation->arrival_mode == ArrivalMode::kPoissonPerPhase)
          row.comparison = compare(*row.analytic, *row.simulated);
      }
    } catch (const NumericalError& e) {
      row.error = e.what();
      row.status = 2;
    } catch (const std::exception& e) {
      row.error = e.what();
      row.status = 1;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace bmapq
