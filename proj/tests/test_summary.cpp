#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ldslab/errors.hpp"
#include "ldslab/summary.hpp"

using namespace ldslab;

TEST_CASE("summarize_values on a single value") {
  const MetricStats stats = summarize_values({3.5});
  CHECK(stats.mean == 3.5);
  CHECK(stats.stddev == 0.0);
  CHECK(stats.q05 == 3.5);
  CHECK(stats.q50 == 3.5);
  CHECK(stats.q95 == 3.5);
  CHECK(stats.count == 1);
}

TEST_CASE("summarize_values quantiles use linear interpolation") {
  std::vector<double> values;
  for (int i = 1; i <= 100; ++i) values.push_back(i);
  const MetricStats stats = summarize_values(values);
  CHECK(stats.q50 == doctest::Approx(50.5));
  CHECK(stats.q05 == doctest::Approx(5.95));
  CHECK(stats.q95 == doctest::Approx(95.05));
  CHECK(stats.mean == doctest::Approx(50.5));
  // population standard deviation of 1..100
  CHECK(stats.stddev == doctest::Approx(std::sqrt((100.0 * 100.0 - 1.0) / 12.0)));
}

TEST_CASE("summarize_values rejects empty input") {
  CHECK_THROWS_AS(summarize_values({}), EmptySummaryError);
}

TEST_CASE("summarize groups by metric and axis, order-invariant") {
  std::vector<TrialRecord> records;
  for (int t = 0; t < 10; ++t) {
    TrialRecord record;
    record.axis_value = t < 5 ? 100.0 : 200.0;
    record.trial = t % 5;
    record.metrics = {{"error", 1.0 + t}, {"sigma", 10.0 - t}};
    records.push_back(record);
  }
  const auto summary = summarize(records);
  REQUIRE(summary.size() == 4);  // two metrics x two axis values

  auto shuffled = records;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937{17});
  const auto summary_shuffled = summarize(shuffled);
  for (const auto& entry : summary) {
    const auto it = std::find_if(
        summary_shuffled.begin(), summary_shuffled.end(), [&](const auto& e) {
          return e.metric == entry.metric && e.axis_value == entry.axis_value;
        });
    REQUIRE(it != summary_shuffled.end());
    CHECK(it->stats.mean == entry.stats.mean);
    CHECK(it->stats.q50 == entry.stats.q50);
    CHECK(it->stats.stddev == entry.stats.stddev);
  }

  CHECK_THROWS_AS(summarize({}), EmptySummaryError);
}
