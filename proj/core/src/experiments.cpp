#include "ldslab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <mutex>
#include <ostream>
#include <thread>

#include "ldslab/ols.hpp"
#include "ldslab/trajectory.hpp"

namespace ldslab {

namespace {

struct KindInfo {
  ExperimentKind kind;
  const char* name;
};

constexpr std::array<KindInfo, 8> kKinds{{
    {ExperimentKind::kDistanceConcentration, "distance_concentration"},
    {ExperimentKind::kSigmaExtremes, "sigma_extremes"},
    {ExperimentKind::kErrorRate, "error_rate"},
    {ExperimentKind::kExplosiveMode, "explosive_mode"},
    {ExperimentKind::kBlockSplit, "block_split"},
    {ExperimentKind::kDimensionSweep, "dimension_sweep"},
    {ExperimentKind::kCovarianceBlowup, "covariance_blowup"},
    {ExperimentKind::kGaussianProjection, "gaussian_projection"},
}};

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  const unsigned hardware = std::thread::hardware_concurrency();
  return hardware == 0 ? 1 : static_cast<int>(hardware);
}

void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& body) {
  const auto workers = static_cast<std::size_t>(
      std::min<long>(resolve_threads(threads), static_cast<long>(count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Flat layout: record (g, t) sits at index g*trials + t and consumes
// derive_trial_seed(master, g*trials + t). Paired arms inside one record
// therefore always share their noise seed.
std::vector<TrialRecord> run_grid(
    const std::vector<double>& axis_values, int trials,
    std::uint64_t master_seed, int threads,
    const std::function<void(std::size_t grid, TrialRecord&)>& body) {
  const std::size_t grid_size = axis_values.empty() ? 1 : axis_values.size();
  std::vector<TrialRecord> records(grid_size * static_cast<std::size_t>(trials));
  parallel_for(records.size(), threads, [&](std::size_t idx) {
    const std::size_t grid = idx / static_cast<std::size_t>(trials);
    TrialRecord& record = records[idx];
    record.axis_value = axis_values.empty() ? 0.0 : axis_values[grid];
    record.trial = static_cast<int>(idx % static_cast<std::size_t>(trials));
    record.seed = derive_trial_seed(master_seed, idx);
    body(grid, record);
  });
  return records;
}

std::vector<double> metric_values(const std::vector<TrialRecord>& records,
                                  const std::string& name,
                                  double axis_value = 0.0,
                                  bool any_axis = false) {
  std::vector<double> out;
  for (const auto& record : records) {
    if (!any_axis && record.axis_value != axis_value) continue;
    if (const double* v = record.metric(name)) out.push_back(*v);
  }
  return out;
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, 0.5);
}

double count_metric(const std::vector<TrialRecord>& records,
                    const std::string& name) {
  double count = 0.0;
  for (const auto& record : records) {
    if (record.metric(name) != nullptr) count += 1.0;
  }
  return count;
}

SystemSpec spread_diagonal(double rho, int n) {
  std::vector<double> eigenvalues(static_cast<std::size_t>(n));
  if (n == 1) {
    eigenvalues[0] = rho;
  } else {
    for (int j = 0; j < n; ++j) {
      eigenvalues[static_cast<std::size_t>(j)] =
          rho * (2.0 * j / (n - 1.0) - 1.0);
    }
  }
  return SystemSpec::diagonal(eigenvalues);
}

SystemSpec uniform_diagonal(double lambda, int n) {
  return SystemSpec::diagonal(std::vector<double>(static_cast<std::size_t>(n), lambda));
}

bool uses_system(ExperimentKind kind) {
  return kind == ExperimentKind::kDistanceConcentration ||
         kind == ExperimentKind::kSigmaExtremes ||
         kind == ExperimentKind::kErrorRate;
}

SystemSpec default_system(ExperimentKind kind, int n) {
  if (kind == ExperimentKind::kErrorRate) return spread_diagonal(0.9, n);
  return uniform_diagonal(0.9, n);
}

const std::vector<std::string>& allowed_keys(ExperimentKind kind) {
  static const std::vector<std::string> kTrajectory{
      "kind", "master_seed", "trials", "n", "trajectory_length", "system"};
  static const std::vector<std::string> kErrorRate{
      "kind", "master_seed", "trials", "n", "system", "sweep"};
  static const std::vector<std::string> kExplosive{
      "kind", "master_seed", "trials", "n", "trajectory_length",
      "lambda", "explosive_lambda"};
  static const std::vector<std::string> kBlockSplit{
      "kind", "master_seed", "trials", "n", "trajectory_length", "lambda"};
  static const std::vector<std::string> kDimensionSweep{
      "kind", "master_seed", "trials", "trajectory_length", "sweep"};
  static const std::vector<std::string> kCovariance{
      "kind", "master_seed", "n", "lambda", "k_max"};
  static const std::vector<std::string> kProjection{
      "kind", "master_seed", "trials", "n", "subspace_dim", "delta"};
  switch (kind) {
    case ExperimentKind::kDistanceConcentration:
    case ExperimentKind::kSigmaExtremes:
      return kTrajectory;
    case ExperimentKind::kErrorRate:
      return kErrorRate;
    case ExperimentKind::kExplosiveMode:
      return kExplosive;
    case ExperimentKind::kBlockSplit:
      return kBlockSplit;
    case ExperimentKind::kDimensionSweep:
      return kDimensionSweep;
    case ExperimentKind::kCovarianceBlowup:
      return kCovariance;
    case ExperimentKind::kGaussianProjection:
      return kProjection;
  }
  throw ConfigError("kind", "unhandled experiment kind");
}

std::uint64_t parse_seed(const nlohmann::json& value) {
  if (value.is_number_unsigned()) return value.get<std::uint64_t>();
  if (value.is_number_integer()) {
    const auto v = value.get<std::int64_t>();
    if (v < 0) throw ConfigError("master_seed", "must be non-negative");
    return static_cast<std::uint64_t>(v);
  }
  throw ConfigError("master_seed", "expected an unsigned integer");
}

long parse_positive_integer(const nlohmann::json& value, const char* field) {
  if (!value.is_number_integer() && !value.is_number_unsigned()) {
    throw ConfigError(field, "expected an integer");
  }
  const auto v = value.get<std::int64_t>();
  if (v < 1) throw ConfigError(field, "must be >= 1");
  return static_cast<long>(v);
}

TrajectoryLength parse_trajectory_length(const nlohmann::json& value) {
  if (value.is_number_integer() || value.is_number_unsigned()) {
    return TrajectoryLength::fixed(
        parse_positive_integer(value, "trajectory_length"));
  }
  if (value.is_object()) {
    if (value.size() != 1 || !value.contains("ratio_of_n")) {
      throw ConfigError("trajectory_length",
                        "expected an integer or {\"ratio_of_n\": k}");
    }
    return TrajectoryLength::ratio_of_n(
        parse_positive_integer(value.at("ratio_of_n"), "ratio_of_n"));
  }
  throw ConfigError("trajectory_length",
                    "expected an integer or {\"ratio_of_n\": k}");
}

SweepSpec parse_sweep(const nlohmann::json& value, const std::string& expected_axis) {
  if (!value.is_object()) {
    throw ConfigError("sweep", "expected {\"axis\": ..., \"values\": [...]}");
  }
  SweepSpec sweep;
  bool saw_axis = false;
  bool saw_values = false;
  for (const auto& [key, item] : value.items()) {
    if (key == "axis") {
      if (!item.is_string()) throw ConfigError("axis", "expected a string");
      sweep.axis = item.get<std::string>();
      saw_axis = true;
    } else if (key == "values") {
      if (!item.is_array() || item.empty()) {
        throw ConfigError("values", "expected a non-empty array");
      }
      for (const auto& v : item) {
        if (!v.is_number()) throw ConfigError("values", "expected numbers");
        sweep.values.push_back(v.get<double>());
      }
      saw_values = true;
    } else {
      throw ConfigError(key, "unrecognized key in sweep");
    }
  }
  if (!saw_axis) throw ConfigError("axis", "missing in sweep");
  if (!saw_values) throw ConfigError("values", "missing in sweep");
  if (sweep.axis != expected_axis) {
    throw ConfigError("axis", "must be \"" + expected_axis + "\" for this experiment");
  }
  for (std::size_t i = 0; i + 1 < sweep.values.size(); ++i) {
    if (!(sweep.values[i] < sweep.values[i + 1])) {
      throw ConfigError("values", "grid values must be strictly increasing");
    }
  }
  for (double v : sweep.values) {
    if (v < 1.0 || v != std::floor(v)) {
      throw ConfigError("values", "grid values must be positive integers");
    }
  }
  return sweep;
}

nlohmann::json trajectory_length_to_json(const TrajectoryLength& length) {
  if (length.kind == TrajectoryLength::Kind::kFixed) {
    return length.value;
  }
  return nlohmann::json{{"ratio_of_n", length.value}};
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  for (const auto& info : kKinds) {
    if (info.kind == kind) return info.name;
  }
  throw ConfigError("kind", "unhandled experiment kind");
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (const auto& info : kKinds) {
    if (name == info.name) return info.kind;
  }
  throw ConfigError("kind", "unknown experiment kind '" + name + "'");
}

std::vector<ExperimentKind> all_experiment_kinds() {
  std::vector<ExperimentKind> out;
  for (const auto& info : kKinds) out.push_back(info.kind);
  return out;
}

ExperimentConfig default_experiment_config(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  cfg.master_seed = 42;
  switch (kind) {
    case ExperimentKind::kDistanceConcentration:
    case ExperimentKind::kSigmaExtremes:
      cfg.trials = 100;
      cfg.n = 30;
      cfg.trajectory_length = TrajectoryLength::fixed(300);
      cfg.system = default_system(kind, cfg.n);
      break;
    case ExperimentKind::kErrorRate:
      cfg.trials = 50;
      cfg.n = 10;
      cfg.system = default_system(kind, cfg.n);
      cfg.sweep = SweepSpec{"N", {100, 200, 400, 800, 1600}};
      break;
    case ExperimentKind::kExplosiveMode:
      cfg.trials = 100;
      cfg.n = 30;
      cfg.trajectory_length = TrajectoryLength::fixed(90);
      cfg.lambda = 0.9;
      cfg.explosive_lambda = 1.9;
      break;
    case ExperimentKind::kBlockSplit:
      cfg.trials = 50;
      cfg.n = 50;
      cfg.trajectory_length = TrajectoryLength::fixed(150);
      cfg.lambda = 0.9;
      break;
    case ExperimentKind::kDimensionSweep:
      cfg.trials = 25;
      cfg.trajectory_length = TrajectoryLength::ratio_of_n(3);
      cfg.sweep = SweepSpec{"n", {5, 10, 20, 35, 50, 70}};
      break;
    case ExperimentKind::kCovarianceBlowup:
      cfg.trials = 1;
      cfg.n = 20;
      cfg.lambda = 0.9;
      cfg.k_max = 600;
      break;
    case ExperimentKind::kGaussianProjection:
      cfg.trials = 10000;
      cfg.n = 400;
      cfg.subspace_dim = 100;
      cfg.delta = 0.3;
      break;
  }
  return cfg;
}

ExperimentConfig parse_experiment_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config", "expected a JSON object");
  if (!doc.contains("kind")) throw ConfigError("kind", "missing");
  if (!doc.at("kind").is_string()) throw ConfigError("kind", "expected a string");
  const ExperimentKind kind =
      experiment_kind_from_string(doc.at("kind").get<std::string>());

  ExperimentConfig cfg = default_experiment_config(kind);
  const auto& keys = allowed_keys(kind);
  bool system_given = false;
  bool n_given = false;

  for (const auto& [key, value] : doc.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError(key, "unrecognized key for experiment '" +
                                 to_string(kind) + "'");
    }
    if (key == "kind") {
      continue;
    } else if (key == "master_seed") {
      cfg.master_seed = parse_seed(value);
    } else if (key == "trials") {
      cfg.trials = static_cast<int>(parse_positive_integer(value, "trials"));
    } else if (key == "n") {
      cfg.n = static_cast<int>(parse_positive_integer(value, "n"));
      n_given = true;
    } else if (key == "trajectory_length") {
      cfg.trajectory_length = parse_trajectory_length(value);
    } else if (key == "system") {
      cfg.system = SystemSpec::from_json(value);
      system_given = true;
    } else if (key == "sweep") {
      cfg.sweep = parse_sweep(
          value, kind == ExperimentKind::kErrorRate ? "N" : "n");
    } else if (key == "lambda") {
      if (!value.is_number()) throw ConfigError("lambda", "expected a number");
      cfg.lambda = value.get<double>();
      if (!std::isfinite(*cfg.lambda)) throw ConfigError("lambda", "must be finite");
    } else if (key == "explosive_lambda") {
      if (!value.is_number()) {
        throw ConfigError("explosive_lambda", "expected a number");
      }
      cfg.explosive_lambda = value.get<double>();
      if (!std::isfinite(*cfg.explosive_lambda)) {
        throw ConfigError("explosive_lambda", "must be finite");
      }
    } else if (key == "k_max") {
      cfg.k_max = parse_positive_integer(value, "k_max");
    } else if (key == "subspace_dim") {
      cfg.subspace_dim =
          static_cast<int>(parse_positive_integer(value, "subspace_dim"));
    } else if (key == "delta") {
      if (!value.is_number()) throw ConfigError("delta", "expected a number");
      cfg.delta = value.get<double>();
    }
  }

  if (uses_system(kind)) {
    if (system_given) {
      cfg.system->validate();
      if (n_given && cfg.system->dimension() != cfg.n) {
        throw ConfigError("n", "does not match the system dimension " +
                                   std::to_string(cfg.system->dimension()));
      }
      cfg.n = cfg.system->dimension();
      if (!cfg.system->diagonalizable()) {
        throw ConfigError("system",
                          "this experiment requires all block sizes equal 1");
      }
      if (cfg.system->spectral_radius() >= 1.0) {
        throw ConfigError("system", "spectral radius must be < 1");
      }
    } else {
      cfg.system = default_system(kind, cfg.n);
    }
  }

  switch (kind) {
    case ExperimentKind::kDistanceConcentration:
    case ExperimentKind::kSigmaExtremes:
      if (cfg.trajectory_length.resolve(cfg.n) < cfg.n) {
        throw ConfigError("trajectory_length", "must be >= n");
      }
      break;
    case ExperimentKind::kErrorRate:
      for (double v : cfg.sweep->values) {
        if (v < cfg.n) {
          throw ConfigError("values", "every trajectory length must be >= n");
        }
      }
      break;
    case ExperimentKind::kExplosiveMode:
      if (cfg.trajectory_length.resolve(cfg.n) < cfg.n) {
        throw ConfigError("trajectory_length", "must be >= n");
      }
      if (std::abs(*cfg.lambda) >= 1.0) {
        throw ConfigError("lambda", "stable arm eigenvalue must satisfy |lambda| < 1");
      }
      break;
    case ExperimentKind::kBlockSplit:
      if (cfg.n < 3) throw ConfigError("n", "must be >= 3 for three partitions");
      if (cfg.trajectory_length.resolve(cfg.n) < cfg.n) {
        throw ConfigError("trajectory_length", "must be >= n");
      }
      break;
    case ExperimentKind::kDimensionSweep:
      for (double v : cfg.sweep->values) {
        if (v < 4) {
          throw ConfigError("values", "dimensions must be >= 4 (one block has size n-3)");
        }
      }
      break;
    case ExperimentKind::kCovarianceBlowup:
      cfg.trials = 1;
      break;
    case ExperimentKind::kGaussianProjection:
      if (*cfg.subspace_dim > cfg.n) {
        throw ConfigError("subspace_dim", "must be <= n");
      }
      if (!(*cfg.delta > 0.0) || !(*cfg.delta < 1.0)) {
        throw ConfigError("delta", "must lie in (0, 1)");
      }
      break;
  }
  return cfg;
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json doc;
  doc["kind"] = to_string(cfg.kind);
  doc["master_seed"] = cfg.master_seed;
  switch (cfg.kind) {
    case ExperimentKind::kDistanceConcentration:
    case ExperimentKind::kSigmaExtremes:
      doc["trials"] = cfg.trials;
      doc["n"] = cfg.n;
      doc["trajectory_length"] = trajectory_length_to_json(cfg.trajectory_length);
      doc["system"] = cfg.system->to_json();
      break;
    case ExperimentKind::kErrorRate:
      doc["trials"] = cfg.trials;
      doc["n"] = cfg.n;
      doc["system"] = cfg.system->to_json();
      doc["sweep"] = {{"axis", cfg.sweep->axis}, {"values", cfg.sweep->values}};
      break;
    case ExperimentKind::kExplosiveMode:
      doc["trials"] = cfg.trials;
      doc["n"] = cfg.n;
      doc["trajectory_length"] = trajectory_length_to_json(cfg.trajectory_length);
      doc["lambda"] = *cfg.lambda;
      doc["explosive_lambda"] = *cfg.explosive_lambda;
      break;
    case ExperimentKind::kBlockSplit:
      doc["trials"] = cfg.trials;
      doc["n"] = cfg.n;
      doc["trajectory_length"] = trajectory_length_to_json(cfg.trajectory_length);
      doc["lambda"] = *cfg.lambda;
      break;
    case ExperimentKind::kDimensionSweep:
      doc["trials"] = cfg.trials;
      doc["trajectory_length"] = trajectory_length_to_json(cfg.trajectory_length);
      doc["sweep"] = {{"axis", cfg.sweep->axis}, {"values", cfg.sweep->values}};
      break;
    case ExperimentKind::kCovarianceBlowup:
      doc["n"] = cfg.n;
      doc["lambda"] = *cfg.lambda;
      doc["k_max"] = *cfg.k_max;
      break;
    case ExperimentKind::kGaussianProjection:
      doc["trials"] = cfg.trials;
      doc["n"] = cfg.n;
      doc["subspace_dim"] = *cfg.subspace_dim;
      doc["delta"] = *cfg.delta;
      break;
  }
  return doc;
}

const double* ExperimentResult::derived_value(const std::string& name) const {
  for (const auto& [key, value] : derived) {
    if (key == name) return &value;
  }
  return nullptr;
}

const MetricStats* ExperimentResult::stats(const std::string& metric,
                                           double axis_value) const {
  for (const auto& entry : summary) {
    if (entry.metric == metric && entry.axis_value == axis_value) {
      return &entry.stats;
    }
  }
  return nullptr;
}

nlohmann::json ExperimentResult::to_json() const {
  nlohmann::json doc;
  doc["config"] = experiment_config_to_json(config);
  doc["axis_name"] = axis_name;
  nlohmann::json trials_json = nlohmann::json::array();
  for (const auto& record : per_trial) {
    nlohmann::json metrics_json = nlohmann::json::object();
    for (const auto& [name, value] : record.metrics) metrics_json[name] = value;
    trials_json.push_back({{"axis_value", record.axis_value},
                           {"trial", record.trial},
                           {"seed", record.seed},
                           {"metrics", metrics_json}});
  }
  doc["per_trial"] = std::move(trials_json);
  nlohmann::json summary_json = nlohmann::json::array();
  for (const auto& entry : summary) {
    summary_json.push_back({{"metric", entry.metric},
                            {"axis_value", entry.axis_value},
                            {"mean", entry.stats.mean},
                            {"stddev", entry.stats.stddev},
                            {"q05", entry.stats.q05},
                            {"q25", entry.stats.q25},
                            {"q50", entry.stats.q50},
                            {"q75", entry.stats.q75},
                            {"q95", entry.stats.q95},
                            {"count", entry.stats.count}});
  }
  doc["summary"] = std::move(summary_json);
  nlohmann::json bands_json = nlohmann::json::array();
  for (const auto& band : bands) {
    bands_json.push_back({{"name", band.name},
                          {"axis_value", band.axis_value},
                          {"value", band.value}});
  }
  doc["bands"] = std::move(bands_json);
  nlohmann::json derived_json = nlohmann::json::object();
  for (const auto& [name, value] : derived) derived_json[name] = value;
  doc["derived"] = std::move(derived_json);
  return doc;
}

void ExperimentResult::write_long_csv(
    std::ostream& out, const std::vector<std::string>& metric_filter) const {
  const std::string experiment = to_string(config.kind);
  out << "experiment,axis_name,axis_value,trial,metric,value\n";
  for (const auto& record : per_trial) {
    for (const auto& [name, value] : record.metrics) {
      if (!metric_filter.empty() &&
          std::find(metric_filter.begin(), metric_filter.end(), name) ==
              metric_filter.end()) {
        continue;
      }
      out << experiment << ',' << axis_name << ','
          << format_double(record.axis_value) << ',' << record.trial << ','
          << name << ',' << format_double(value) << '\n';
    }
  }
}

std::string format_double(double value) {
  std::array<char, 64> buffer{};
  const auto result =
      std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  return std::string(buffer.data(), result.ptr);
}

namespace {

ExperimentResult run_distance_concentration(const ExperimentConfig& cfg,
                                            int threads) {
  const Mat a = build_system(*cfg.system);
  const int n = cfg.n;
  const long N = cfg.trajectory_length.resolve(n);
  const double rho = cfg.system->spectral_radius();
  const double center = static_cast<double>(N - n + 1);
  const double halfwidth = std::sqrt(center) / (1.0 - rho);

  ExperimentResult result;
  result.per_trial = run_grid({}, cfg.trials, cfg.master_seed, threads,
                              [&](std::size_t, TrialRecord& record) {
    try {
      const Trajectory traj = simulate(a, static_cast<int>(N), record.seed);
      const std::vector<double> distances =
          row_hyperplane_distances(assemble(traj).x_minus);
      double sum = 0.0;
      double lo = std::numeric_limits<double>::infinity();
      double hi = 0.0;
      std::array<int, 3> inside{0, 0, 0};
      for (double d : distances) {
        const double d2 = d * d;
        sum += d2;
        lo = std::min(lo, d2);
        hi = std::max(hi, d2);
        for (int c = 1; c <= 3; ++c) {
          if (d2 >= center - c * halfwidth && d2 <= center + c * halfwidth) {
            inside[static_cast<std::size_t>(c - 1)] += 1;
          }
        }
      }
      const double count = static_cast<double>(distances.size());
      record.metrics = {{"mean_d2", sum / count},
                        {"min_d2", lo},
                        {"max_d2", hi},
                        {"frac_c1", inside[0] / count},
                        {"frac_c2", inside[1] / count},
                        {"frac_c3", inside[2] / count}};
    } catch (const RankError&) {
      record.metrics = {{"failed", 1.0}};
    } catch (const OverflowError&) {
      record.metrics = {{"failed", 1.0}};
    }
  });

  result.bands = {{"band_center", 0.0, center},
                  {"band_halfwidth", 0.0, halfwidth},
                  {"band_c1_lo", 0.0, center - halfwidth},
                  {"band_c1_hi", 0.0, center + halfwidth},
                  {"band_c3_lo", 0.0, center - 3.0 * halfwidth},
                  {"band_c3_hi", 0.0, center + 3.0 * halfwidth}};
  for (int c = 1; c <= 3; ++c) {
    const std::string name = "frac_c" + std::to_string(c);
    const auto values = metric_values(result.per_trial, name);
    if (!values.empty()) {
      double sum = 0.0;
      for (double v : values) sum += v;
      result.derived.emplace_back("frac_all_c" + std::to_string(c),
                                  sum / static_cast<double>(values.size()));
    }
  }
  result.derived.emplace_back("failed_trials",
                              count_metric(result.per_trial, "failed"));
  return result;
}

ExperimentResult run_sigma_extremes(const ExperimentConfig& cfg, int threads) {
  const Mat a = build_system(*cfg.system);
  const int n = cfg.n;
  const long N = cfg.trajectory_length.resolve(n);
  const double rho = cfg.system->spectral_radius();
  const double sigma1_scale =
      (std::sqrt(static_cast<double>(N)) + std::sqrt(static_cast<double>(n))) /
      std::sqrt(1.0 - rho * rho);
  const double sigma_min_scale = std::sqrt(static_cast<double>(N)) -
                                 std::sqrt(static_cast<double>(n - 1));

  ExperimentResult result;
  result.per_trial = run_grid({}, cfg.trials, cfg.master_seed, threads,
                              [&](std::size_t, TrialRecord& record) {
    try {
      const Trajectory traj = simulate(a, static_cast<int>(N), record.seed);
      const SvdResult sv = singular_values(assemble(traj).x_minus);
      const double sigma1 = sv.singular_values.front();
      const double sigma_min = sv.singular_values.back();
      record.metrics = {{"sigma1", sigma1},
                        {"sigma_min", sigma_min},
                        {"sigma1_ratio", sigma1 / sigma1_scale},
                        {"sigma_min_ratio", sigma_min / sigma_min_scale}};
    } catch (const OverflowError&) {
      record.metrics = {{"failed", 1.0}};
    }
  });
  result.bands = {{"sigma1_scale", 0.0, sigma1_scale},
                  {"sigma_min_scale", 0.0, sigma_min_scale}};
  result.derived.emplace_back("failed_trials",
                              count_metric(result.per_trial, "failed"));
  return result;
}

ExperimentResult run_error_rate(const ExperimentConfig& cfg, int threads) {
  const Mat a = build_system(*cfg.system);
  const double rho = cfg.system->spectral_radius();
  const std::vector<double>& grid = cfg.sweep->values;

  ExperimentResult result;
  result.axis_name = "N";
  result.per_trial = run_grid(grid, cfg.trials, cfg.master_seed, threads,
                              [&](std::size_t g, TrialRecord& record) {
    const int N = static_cast<int>(grid[g]);
    try {
      const Trajectory traj = simulate(a, N, record.seed);
      const Mat a_hat = estimate_ols(assemble(traj));
      record.metrics = {{"frob_error", (a - a_hat).norm()}};
    } catch (const RankError&) {
      record.metrics = {{"failed", 1.0}};
    } catch (const OverflowError&) {
      record.metrics = {{"failed", 1.0}};
    }
  });

  for (double N : grid) {
    try {
      const ErrorBounds band =
          diag_error_band(rho, cfg.n, static_cast<long>(N));
      result.bands.push_back({"theorem_lower", N, band.lower});
      result.bands.push_back({"theorem_upper", N, band.upper});
    } catch (const BandUndefinedError&) {
      // Band has no stable-regime value at this N; omitted.
    }
  }

  std::vector<double> log_n;
  std::vector<double> log_median;
  for (double N : grid) {
    const auto errors = metric_values(result.per_trial, "frob_error", N);
    if (errors.empty()) continue;
    const double median = median_of(errors);
    result.derived.emplace_back("median_error_N" + format_double(N), median);
    if (median > 0.0) {
      log_n.push_back(std::log(N));
      log_median.push_back(std::log(median));
    }
  }
  if (log_n.size() >= 2) {
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < log_n.size(); ++i) {
      mean_x += log_n[i];
      mean_y += log_median[i];
    }
    mean_x /= static_cast<double>(log_n.size());
    mean_y /= static_cast<double>(log_n.size());
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < log_n.size(); ++i) {
      sxx += (log_n[i] - mean_x) * (log_n[i] - mean_x);
      sxy += (log_n[i] - mean_x) * (log_median[i] - mean_y);
    }
    result.derived.emplace_back("slope", sxy / sxx);
  }
  result.derived.emplace_back("failed_trials",
                              count_metric(result.per_trial, "failed"));
  return result;
}

ExperimentResult run_explosive_mode(const ExperimentConfig& cfg, int threads) {
  const int n = cfg.n;
  const long N = cfg.trajectory_length.resolve(n);
  const double lambda_stable = *cfg.lambda;
  const double lambda_explosive = *cfg.explosive_lambda;

  const Mat a_stable =
      build_system(uniform_diagonal(lambda_stable, n));
  Mat a_explosive = a_stable;
  a_explosive(0, 0) = lambda_explosive;
  const Vec x0 = Vec::Zero(n);

  ExperimentResult result;
  result.per_trial = run_grid({}, cfg.trials, cfg.master_seed, threads,
                              [&](std::size_t, TrialRecord& record) {
    const Mat noise = gaussian_matrix(n, static_cast<int>(N), record.seed);
    auto run_arm = [&](const Mat& a, const std::string& suffix) {
      try {
        const Trajectory traj = simulate_with_noise(a, x0, noise);
        const DataMatrices data = assemble(traj);
        const Mat a_hat = estimate_ols(data);
        record.metrics.emplace_back("err_" + suffix, (a - a_hat).norm());
      } catch (const OverflowError&) {
        record.metrics.emplace_back("overflow_" + suffix, 1.0);
      } catch (const RankError&) {
        record.metrics.emplace_back("failed_" + suffix, 1.0);
      }
    };
    run_arm(a_stable, "stable");
    run_arm(a_explosive, "explosive");
  });

  const auto stable_errors = metric_values(result.per_trial, "err_stable");
  const auto explosive_errors = metric_values(result.per_trial, "err_explosive");
  if (!stable_errors.empty()) {
    result.derived.emplace_back("median_err_stable", median_of(stable_errors));
  }
  if (!explosive_errors.empty()) {
    result.derived.emplace_back("median_err_explosive",
                                median_of(explosive_errors));
  }
  if (!stable_errors.empty() && !explosive_errors.empty()) {
    result.derived.emplace_back(
        "median_ratio", median_of(explosive_errors) / median_of(stable_errors));
  }
  result.derived.emplace_back(
      "overflow_excluded",
      count_metric(result.per_trial, "overflow_stable") +
          count_metric(result.per_trial, "overflow_explosive"));

  const VarianceClass stable_class =
      talagrand_variance_class(operator_norm(a_stable), N);
  const VarianceClass explosive_class =
      talagrand_variance_class(operator_norm(a_explosive), N);
  result.bands = {{"t1_constant_stable", 0.0, stable_class.constant},
                  {"t1_constant_explosive", 0.0, explosive_class.constant}};

  // Squared-distance overlay for the explosive row: center Tr(Sigma)(N-n+1)/N
  // and half-width e^{N/2} sqrt(N) sqrt(center). Far wider than its center at
  // any practical N, so it is reported but never tested two-sided.
  if (std::abs(lambda_explosive) != 1.0) {
    const double ratio = lambda_explosive * lambda_explosive;
    double trace = 0.0;
    for (long t = 0; t < N; ++t) {
      trace += (std::pow(ratio, static_cast<double>(t)) - 1.0) / (ratio - 1.0);
    }
    const double center =
        trace * static_cast<double>(N - n + 1) / static_cast<double>(N);
    const double halfwidth = std::exp(static_cast<double>(N) / 2.0) *
                             std::sqrt(static_cast<double>(N)) *
                             std::sqrt(center);
    if (std::isfinite(center) && std::isfinite(halfwidth)) {
      result.bands.push_back({"explosive_d2_center", 0.0, center});
      result.bands.push_back({"explosive_d2_halfwidth", 0.0, halfwidth});
    }
  }
  return result;
}

ExperimentResult run_block_split(const ExperimentConfig& cfg, int threads) {
  const int n = cfg.n;
  const long N = cfg.trajectory_length.resolve(n);
  const double lambda = *cfg.lambda;

  auto partition_spec = [&](int parts) {
    SystemSpec spec;
    const int base = n / parts;
    const int remainder = n % parts;
    for (int i = 0; i < parts; ++i) {
      spec.blocks.push_back({lambda, base + (i < remainder ? 1 : 0)});
    }
    return spec;
  };
  struct Arm {
    std::string metric;
    Mat a;
  };
  std::vector<Arm> arms;
  arms.push_back({"err_1_block", build_system(partition_spec(1))});
  arms.push_back({"err_2_blocks", build_system(partition_spec(2))});
  arms.push_back({"err_3_blocks", build_system(partition_spec(3))});
  arms.push_back({"err_diag", build_system(uniform_diagonal(lambda, n))});
  const Vec x0 = Vec::Zero(n);

  ExperimentResult result;
  result.per_trial = run_grid({}, cfg.trials, cfg.master_seed, threads,
                              [&](std::size_t, TrialRecord& record) {
    const Mat noise = gaussian_matrix(n, static_cast<int>(N), record.seed);
    for (const Arm& arm : arms) {
      try {
        const Trajectory traj = simulate_with_noise(arm.a, x0, noise);
        const Mat a_hat = estimate_ols(assemble(traj));
        record.metrics.emplace_back(arm.metric, (arm.a - a_hat).norm());
      } catch (const OverflowError&) {
        record.metrics.emplace_back("overflow_" + arm.metric, 1.0);
      } catch (const RankError&) {
        record.metrics.emplace_back("failed_" + arm.metric, 1.0);
      }
    }
  });

  std::vector<double> medians;
  for (const Arm& arm : arms) {
    const auto errors = metric_values(result.per_trial, arm.metric);
    if (errors.empty()) {
      medians.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    medians.push_back(median_of(errors));
    result.derived.emplace_back("median_" + arm.metric, medians.back());
  }
  const bool ordering = medians[0] > medians[1] && medians[1] > medians[2];
  const bool diag_smallest = medians[3] < medians[0] &&
                             medians[3] < medians[1] && medians[3] < medians[2];
  result.derived.emplace_back("ordering_strict", ordering ? 1.0 : 0.0);
  result.derived.emplace_back("diag_smallest", diag_smallest ? 1.0 : 0.0);
  return result;
}

ExperimentResult run_dimension_sweep(const ExperimentConfig& cfg, int threads) {
  const std::vector<double>& grid = cfg.sweep->values;

  std::vector<Mat> systems;
  systems.reserve(grid.size());
  for (double nv : grid) {
    const int n = static_cast<int>(nv);
    SystemSpec spec;
    spec.blocks = {{0.9, n - 3}, {-0.75, 3}};
    systems.push_back(build_system(spec));
  }

  ExperimentResult result;
  result.axis_name = "n";
  result.per_trial = run_grid(grid, cfg.trials, cfg.master_seed, threads,
                              [&](std::size_t g, TrialRecord& record) {
    const int n = static_cast<int>(grid[g]);
    const long N = cfg.trajectory_length.resolve(n);
    const Mat noise = gaussian_matrix(n, static_cast<int>(N), record.seed);
    const SvdResult sv_gauss = singular_values(noise);
    try {
      const Trajectory traj =
          simulate_with_noise(systems[g], Vec::Zero(n), noise);
      const SvdResult sv_sys = singular_values(assemble(traj).x_minus);
      record.metrics = {
          {"sigma1_system", sv_sys.singular_values.front()},
          {"sigma_min_system", sv_sys.singular_values.back()},
          {"sigma1_gaussian", sv_gauss.singular_values.front()},
          {"sigma_min_gaussian", sv_gauss.singular_values.back()}};
    } catch (const OverflowError&) {
      record.metrics = {{"failed", 1.0}};
    }
  });

  for (double nv : grid) {
    const long N = cfg.trajectory_length.resolve(static_cast<long>(nv));
    const double root_n = std::sqrt(nv);
    const double root_N = std::sqrt(static_cast<double>(N));
    result.bands.push_back({"gaussian_sigma1_scale", nv, root_N + root_n});
    result.bands.push_back({"gaussian_sigma_min_scale", nv, root_N - root_n});
  }

  // Growth is measured between the largest grid point and the point nearest
  // to half of it.
  const double n_hi = grid.back();
  double n_lo = grid.front();
  for (double v : grid) {
    if (std::abs(v - n_hi / 2.0) < std::abs(n_lo - n_hi / 2.0)) n_lo = v;
  }
  auto median_log_sigma1 = [&](const std::string& metric, double axis) {
    const auto values = metric_values(result.per_trial, metric, axis);
    return values.empty() ? std::numeric_limits<double>::quiet_NaN()
                          : std::log(median_of(values));
  };
  if (n_lo < n_hi) {
    const double growth_system = median_log_sigma1("sigma1_system", n_hi) -
                                 median_log_sigma1("sigma1_system", n_lo);
    const double growth_gaussian = median_log_sigma1("sigma1_gaussian", n_hi) -
                                   median_log_sigma1("sigma1_gaussian", n_lo);
    result.derived.emplace_back("growth_n_lo", n_lo);
    result.derived.emplace_back("growth_n_hi", n_hi);
    result.derived.emplace_back("log_sigma1_growth_system", growth_system);
    result.derived.emplace_back("log_sigma1_growth_gaussian", growth_gaussian);
    result.derived.emplace_back("sigma1_growth_factor",
                                growth_system / growth_gaussian);
  }
  bool sigma_min_dominates = true;
  for (double nv : grid) {
    const auto sys = metric_values(result.per_trial, "sigma_min_system", nv);
    const auto gauss = metric_values(result.per_trial, "sigma_min_gaussian", nv);
    if (sys.empty() || gauss.empty() || median_of(sys) < median_of(gauss)) {
      sigma_min_dominates = false;
      break;
    }
  }
  result.derived.emplace_back("sigma_min_system_ge_gaussian",
                              sigma_min_dominates ? 1.0 : 0.0);
  result.derived.emplace_back("failed_trials",
                              count_metric(result.per_trial, "failed"));
  return result;
}

ExperimentResult run_covariance_blowup(const ExperimentConfig& cfg, int) {
  const double lambda = *cfg.lambda;
  const int n = cfg.n;
  const long k_max = *cfg.k_max;

  ExperimentResult result;
  result.axis_name = "k";
  long truncated_at = 0;
  for (long k = 1; k <= k_max; ++k) {
    TrialRecord record;
    record.axis_value = static_cast<double>(k);
    record.trial = 0;
    record.seed = 0;
    try {
      const Mat power = jordan_block_power(lambda, n, k);
      const double g = operator_norm(power * power.transpose());
      if (!std::isfinite(g)) {
        throw OverflowError("covariance_blowup: g overflow");
      }
      record.metrics = {{"g", g}};
    } catch (const OverflowError&) {
      truncated_at = k;
      break;
    }
    result.per_trial.push_back(std::move(record));
  }
  if (result.per_trial.empty()) {
    throw OverflowError("covariance_blowup: no finite grid point");
  }

  double g_max = -std::numeric_limits<double>::infinity();
  double argmax = 0.0;
  for (const auto& record : result.per_trial) {
    const double g = *record.metric("g");
    if (g > g_max) {
      g_max = g;
      argmax = record.axis_value;
    }
  }
  result.derived.emplace_back("argmax_k", argmax);
  result.derived.emplace_back("g_max", g_max);
  result.derived.emplace_back("g_at_1", *result.per_trial.front().metric("g"));
  result.derived.emplace_back("truncated_at",
                              static_cast<double>(truncated_at));

  if (n >= 2 && std::abs(lambda) > 0.0 && std::abs(lambda) < 1.0) {
    result.bands = {
        {"stationary_point", 0.0, predicted_peak_iteration(lambda, n)},
        {"log_peak_scale", 0.0, peak_iteration_log_scale(lambda, n)}};
  }
  return result;
}

ExperimentResult run_gaussian_projection(const ExperimentConfig& cfg,
                                         int threads) {
  const int n = cfg.n;
  const int k = *cfg.subspace_dim;
  const double delta = *cfg.delta;
  const double expected_ratio = std::sqrt(static_cast<double>(k) /
                                          static_cast<double>(n));
  const double upper_threshold = expected_ratio / (1.0 - delta);
  const double lower_threshold = expected_ratio * (1.0 - delta);

  ExperimentResult result;
  result.per_trial = run_grid({}, cfg.trials, cfg.master_seed, threads,
                              [&](std::size_t, TrialRecord& record) {
    const Mat sample = gaussian_matrix(n, 1, record.seed);
    const double full_norm = sample.norm();
    const double projected_norm = sample.topRows(k).norm();
    const double ratio = projected_norm / full_norm;
    record.metrics = {{"ratio", ratio},
                      {"upper_tail", ratio >= upper_threshold ? 1.0 : 0.0},
                      {"lower_tail", ratio <= lower_threshold ? 1.0 : 0.0}};
  });

  const double trials = static_cast<double>(cfg.trials);
  double upper_hits = 0.0;
  double lower_hits = 0.0;
  double ratio_sum = 0.0;
  for (const auto& record : result.per_trial) {
    upper_hits += *record.metric("upper_tail");
    lower_hits += *record.metric("lower_tail");
    ratio_sum += *record.metric("ratio");
  }
  result.derived = {{"p_upper", upper_hits / trials},
                    {"p_lower", lower_hits / trials},
                    {"mean_ratio", ratio_sum / trials}};
  const double tail_bound =
      std::exp(-delta * delta * k / 4.0) + std::exp(-delta * delta * n / 4.0);
  result.bands = {{"tail_bound", 0.0, tail_bound},
                  {"expected_ratio", 0.0, expected_ratio}};
  return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads) {
  ExperimentResult result;
  switch (cfg.kind) {
    case ExperimentKind::kDistanceConcentration:
      result = run_distance_concentration(cfg, threads);
      break;
    case ExperimentKind::kSigmaExtremes:
      result = run_sigma_extremes(cfg, threads);
      break;
    case ExperimentKind::kErrorRate:
      result = run_error_rate(cfg, threads);
      break;
    case ExperimentKind::kExplosiveMode:
      result = run_explosive_mode(cfg, threads);
      break;
    case ExperimentKind::kBlockSplit:
      result = run_block_split(cfg, threads);
      break;
    case ExperimentKind::kDimensionSweep:
      result = run_dimension_sweep(cfg, threads);
      break;
    case ExperimentKind::kCovarianceBlowup:
      result = run_covariance_blowup(cfg, threads);
      break;
    case ExperimentKind::kGaussianProjection:
      result = run_gaussian_projection(cfg, threads);
      break;
  }
  result.config = cfg;
  if (result.axis_name.empty()) result.axis_name = "none";
  result.summary = summarize(result.per_trial);
  return result;
}

}  // namespace ldslab
