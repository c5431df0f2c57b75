#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldslab/summary.hpp"
#include "ldslab/system_builder.hpp"

namespace ldslab {

enum class ExperimentKind {
  kDistanceConcentration,
  kSigmaExtremes,
  kErrorRate,
  kExplosiveMode,
  kBlockSplit,
  kDimensionSweep,
  kCovarianceBlowup,
  kGaussianProjection,
};

[[nodiscard]] std::string to_string(ExperimentKind kind);
[[nodiscard]] ExperimentKind experiment_kind_from_string(const std::string& name);
[[nodiscard]] std::vector<ExperimentKind> all_experiment_kinds();

/// Trajectory length, either fixed or tied to the state dimension.
struct TrajectoryLength {
  enum class Kind { kFixed, kRatioOfN };
  Kind kind = Kind::kFixed;
  long value = 0;

  [[nodiscard]] long resolve(long n) const {
    return kind == Kind::kFixed ? value : value * n;
  }

  static TrajectoryLength fixed(long v) { return {Kind::kFixed, v}; }
  static TrajectoryLength ratio_of_n(long v) { return {Kind::kRatioOfN, v}; }

  friend bool operator==(const TrajectoryLength&, const TrajectoryLength&) = default;
};

struct SweepSpec {
  std::string axis;
  std::vector<double> values;  // strictly increasing

  friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kDistanceConcentration;
  std::uint64_t master_seed = 42;
  int trials = 1;
  int n = 0;
  TrajectoryLength trajectory_length;
  std::optional<SystemSpec> system;
  std::optional<SweepSpec> sweep;
  std::optional<double> lambda;
  std::optional<double> explosive_lambda;
  std::optional<long> k_max;
  std::optional<int> subspace_dim;
  std::optional<double> delta;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Canonical defaults for one experiment kind.
ExperimentConfig default_experiment_config(ExperimentKind kind);

/// Strict parser: the document must name a kind, every key must be known to
/// that kind, and all invariants hold. Unset keys fall back to the defaults.
/// Throws ConfigError naming the offending field.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);

/// Inverse of parse_experiment_config (round-trips exactly).
nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);

struct BandEntry {
  std::string name;
  double axis_value = 0.0;
  double value = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::string axis_name = "none";
  std::vector<TrialRecord> per_trial;
  std::vector<SummaryEntry> summary;
  std::vector<BandEntry> bands;
  std::vector<std::pair<std::string, double>> derived;

  [[nodiscard]] const double* derived_value(const std::string& name) const;
  [[nodiscard]] const MetricStats* stats(const std::string& metric,
                                         double axis_value = 0.0) const;

  [[nodiscard]] nlohmann::json to_json() const;

  /// Long format: experiment,axis_name,axis_value,trial,metric,value.
  /// `metric_filter`, when non-empty, restricts the emitted metrics.
  void write_long_csv(std::ostream& out,
                      const std::vector<std::string>& metric_filter = {}) const;
};

/// Runs one experiment. Trials execute concurrently (`threads` <= 0 picks
/// the hardware default); records are merged by (grid point, trial), so the
/// result is identical regardless of scheduling.
ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads = 0);

/// Round-trip float formatting (shortest representation that parses back
/// exactly); used for all CSV output.
std::string format_double(double value);

}  // namespace ldslab
