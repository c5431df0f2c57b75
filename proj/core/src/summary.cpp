#include "ldslab/summary.hpp"

#include <algorithm>
#include <cmath>

#include "ldslab/errors.hpp"

namespace ldslab {

const double* TrialRecord::metric(const std::string& name) const {
  for (const auto& [key, value] : metrics) {
    if (key == name) return &value;
  }
  return nullptr;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) {
    throw EmptySummaryError("quantile_sorted: empty value list");
  }
  const double position = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(position));
  const auto hi = static_cast<std::size_t>(std::ceil(position));
  const double fraction = position - static_cast<double>(lo);
  return sorted[lo] + fraction * (sorted[hi] - sorted[lo]);
}

MetricStats summarize_values(std::vector<double> values) {
  if (values.empty()) {
    throw EmptySummaryError("summarize_values: empty value list");
  }
  MetricStats stats;
  stats.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  stats.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - stats.mean) * (v - stats.mean);
  stats.stddev = std::sqrt(sq / static_cast<double>(values.size()));
  std::sort(values.begin(), values.end());
  stats.q05 = quantile_sorted(values, 0.05);
  stats.q25 = quantile_sorted(values, 0.25);
  stats.q50 = quantile_sorted(values, 0.50);
  stats.q75 = quantile_sorted(values, 0.75);
  stats.q95 = quantile_sorted(values, 0.95);
  return stats;
}

std::vector<SummaryEntry> summarize(const std::vector<TrialRecord>& records) {
  if (records.empty()) {
    throw EmptySummaryError("summarize: no records");
  }
  struct Group {
    std::string metric;
    double axis_value;
    std::vector<double> values;
  };
  std::vector<Group> groups;
  for (const auto& record : records) {
    for (const auto& [name, value] : record.metrics) {
      auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
        return g.metric == name && g.axis_value == record.axis_value;
      });
      if (it == groups.end()) {
        groups.push_back({name, record.axis_value, {}});
        it = std::prev(groups.end());
      }
      it->values.push_back(value);
    }
  }
  if (groups.empty()) {
    throw EmptySummaryError("summarize: records carry no metrics");
  }
  std::vector<SummaryEntry> out;
  out.reserve(groups.size());
  for (auto& group : groups) {
    out.push_back({group.metric, group.axis_value,
                   summarize_values(std::move(group.values))});
  }
  return out;
}

}  // namespace ldslab
