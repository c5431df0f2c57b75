#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ldslab {

/// One experiment trial: grid coordinate, trial index, the seed it consumed
/// and the named scalar metrics it produced.
struct TrialRecord {
  double axis_value = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, double>> metrics;

  [[nodiscard]] const double* metric(const std::string& name) const;
};

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  double q05 = 0.0;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  double q95 = 0.0;
  std::size_t count = 0;
};

struct SummaryEntry {
  std::string metric;
  double axis_value = 0.0;
  MetricStats stats;
};

/// Quantile by linear interpolation on the sorted values (position q*(n-1)).
double quantile_sorted(const std::vector<double>& sorted, double q);

/// Mean, population standard deviation and q05/q25/q50/q75/q95 of a value
/// list. Throws EmptySummaryError on an empty list.
MetricStats summarize_values(std::vector<double> values);

/// Groups records by (metric, axis_value) in first-appearance order and
/// summarizes each group. Order-invariant in the values themselves.
std::vector<SummaryEntry> summarize(const std::vector<TrialRecord>& records);

}  // namespace ldslab
