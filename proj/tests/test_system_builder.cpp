#include <doctest.h>

#include <cmath>

#include "ldslab/system_builder.hpp"

using namespace ldslab;

namespace {

Mat repeated_multiply(double lambda, int m, long k) {
  Mat power = Mat::Identity(m, m);
  const Mat block = build_jordan_block(lambda, m);
  for (long i = 0; i < k; ++i) power = power * block;
  return power;
}

}  // namespace

TEST_CASE("build_jordan_block layout") {
  const Mat scalar = build_jordan_block(0.9, 1);
  CHECK(scalar(0, 0) == 0.9);

  Mat expected(2, 2);
  expected << 0.5, 1.0, 0.0, 0.5;
  CHECK((build_jordan_block(0.5, 2) - expected).norm() == 0.0);

  // J(0.9, 3): triple eigenvalue, geometric multiplicity 1.
  const Mat j3 = build_jordan_block(0.9, 3);
  CHECK(spectral_radius(j3) == doctest::Approx(0.9));
  const Mat shifted = j3 - 0.9 * Mat::Identity(3, 3);
  CHECK(singular_values(shifted).effective_rank == 2);

  CHECK_THROWS_AS(build_jordan_block(0.9, 0), DimensionError);
}

TEST_CASE("build_system composes blocks in listed order") {
  SystemSpec diag;
  diag.blocks = {{0.9, 1}, {0.5, 1}};
  const Mat a = build_system(diag);
  CHECK(a(0, 0) == 0.9);
  CHECK(a(1, 1) == 0.5);
  CHECK(a(0, 1) == 0.0);

  const Mat single = build_system(SystemSpec::single_block(0.9, 3));
  CHECK((single - build_jordan_block(0.9, 3)).norm() == 0.0);

  // Figure-style spec: blocks (0.9, n-3) and (-0.75, 3).
  SystemSpec figure;
  figure.blocks = {{0.9, 47}, {-0.75, 3}};
  const Mat af = build_system(figure);
  CHECK(af.rows() == 50);
  CHECK(spectral_radius(af) == doctest::Approx(0.9));
}

TEST_CASE("random_orthogonal is orthogonal and deterministic") {
  for (int n : {1, 2, 7, 25}) {
    const Mat u = random_orthogonal(n, 11);
    CHECK((u.transpose() * u - Mat::Identity(n, n)).norm() < 1e-12);
  }
  CHECK((random_orthogonal(8, 5) - random_orthogonal(8, 5)).norm() == 0.0);
  CHECK((random_orthogonal(8, 5) - random_orthogonal(8, 6)).norm() > 1e-3);
  CHECK(std::abs(std::abs(random_orthogonal(1, 3)(0, 0)) - 1.0) < 1e-15);
}

TEST_CASE("conjugation preserves spectral radius and operator norm") {
  SystemSpec spec;
  spec.blocks = {{0.9, 1}, {-0.75, 1}, {0.3, 1}, {0.1, 1}};
  const Mat plain = build_system(spec);

  SystemSpec conjugated = spec;
  conjugated.conjugation = SystemSpec::Conjugation::kRandomOrthogonal;
  conjugated.conjugation_seed = 99;
  const Mat rotated = build_system(conjugated);

  CHECK(spectral_radius(rotated) ==
        doctest::Approx(spectral_radius(plain)).epsilon(1e-8));
  CHECK(operator_norm(rotated) ==
        doctest::Approx(operator_norm(plain)).epsilon(1e-8));

  // 2-norm invariance holds for non-diagonalizable blocks too.
  SystemSpec jordan = SystemSpec::single_block(0.9, 5);
  SystemSpec jordan_rot = jordan;
  jordan_rot.conjugation = SystemSpec::Conjugation::kRandomOrthogonal;
  jordan_rot.conjugation_seed = 1;
  CHECK(operator_norm(build_system(jordan_rot)) ==
        doctest::Approx(operator_norm(build_system(jordan))).epsilon(1e-8));
}

TEST_CASE("jordan_block_power closed form") {
  const Mat identity = jordan_block_power(0.7, 3, 0);
  CHECK((identity - Mat::Identity(3, 3)).norm() == 0.0);

  Mat cube(2, 2);
  cube << 0.125, 0.75, 0.0, 0.125;
  CHECK((jordan_block_power(0.5, 2, 3) - cube).norm() < 1e-15);

  // Entry (1,4) of J(0.9,4)^10 is C(10,3) 0.9^7 = 120 * 0.4782969.
  const Mat p10 = jordan_block_power(0.9, 4, 10);
  CHECK(p10(0, 3) == doctest::Approx(57.395628).epsilon(1e-9));
}

TEST_CASE("jordan_block_power matches repeated multiplication on the grid") {
  for (double lambda : {0.3, 0.9, 1.9}) {
    for (int m : {1, 2, 5, 10}) {
      for (long k : {0L, 1L, 2L, 3L, 7L, 15L, 31L, 50L}) {
        const Mat closed = jordan_block_power(lambda, m, k);
        if (closed.cwiseAbs().maxCoeff() >= 1e12) continue;
        const Mat direct = repeated_multiply(lambda, m, k);
        CHECK((closed - direct).norm() <=
              1e-8 * std::max(direct.norm(), 1e-300));
      }
    }
  }
}

TEST_CASE("jordan_block_power semigroup property") {
  for (double lambda : {-0.75, 0.9}) {
    for (int m : {2, 5}) {
      for (long a : {1L, 4L, 9L}) {
        for (long b : {2L, 7L}) {
          const Mat lhs = jordan_block_power(lambda, m, a + b);
          const Mat rhs =
              jordan_block_power(lambda, m, a) * jordan_block_power(lambda, m, b);
          CHECK((lhs - rhs).norm() <= 1e-8 * rhs.norm());
        }
      }
    }
  }
}

TEST_CASE("jordan_block_power overflow names the offending arguments") {
  try {
    jordan_block_power(1.9, 2, 5000);
    FAIL("expected OverflowError");
  } catch (const OverflowError& e) {
    const std::string message = e.what();
    CHECK(message.find("1.9") != std::string::npos);
    CHECK(message.find("5000") != std::string::npos);
  }
}

TEST_CASE("jordan_power_norm_bounds bracket the 2-norm") {
  // Scalar block: lower edge touches |lambda|^k exactly.
  for (long k : {1L, 5L, 20L}) {
    const NormBounds bounds = jordan_power_norm_bounds(0.8, 1, k);
    const double norm = operator_norm(jordan_block_power(0.8, 1, k));
    CHECK(bounds.lower == doctest::Approx(std::pow(0.8, double(k))).epsilon(1e-12));
    CHECK(norm == doctest::Approx(bounds.lower).epsilon(1e-12));
    CHECK(bounds.lower <= bounds.upper);
  }

  const NormBounds b23 = jordan_power_norm_bounds(0.5, 2, 3);
  CHECK(b23.upper == doctest::Approx(3.375).epsilon(1e-12));
  const double norm23 = operator_norm(jordan_block_power(0.5, 2, 3));
  CHECK(b23.lower <= norm23);
  CHECK(norm23 <= b23.upper);

  const NormBounds b520 = jordan_power_norm_bounds(0.9, 5, 20);
  const double norm520 = operator_norm(jordan_block_power(0.9, 5, 20));
  CHECK(b520.lower <= norm520);
  CHECK(norm520 <= b520.upper);

  CHECK_THROWS_AS(jordan_power_norm_bounds(0.0, 3, 2), DimensionError);
}

TEST_CASE("jordan_power_norm_bounds bracket over the power grid") {
  for (double lambda : {0.3, 0.9, 1.9}) {
    for (int m : {1, 2, 5, 10}) {
      for (long k : {1L, 2L, 5L, 12L, 30L, 50L}) {
        Mat power;
        try {
          power = jordan_block_power(lambda, m, k);
        } catch (const OverflowError&) {
          continue;
        }
        if (power.cwiseAbs().maxCoeff() >= 1e12) continue;
        try {
          const NormBounds bounds = jordan_power_norm_bounds(lambda, m, k);
          const double norm = operator_norm(power);
          CHECK(bounds.lower <= norm * (1.0 + 1e-9));
          CHECK(norm <= bounds.upper * (1.0 + 1e-9));
        } catch (const RankError&) {
          // J^k numerically rank-deficient; the distance-based lower bound
          // has no meaningful value there.
          CHECK(condition_number(power) > 1e10);
        }
      }
    }
  }
}

TEST_CASE("diagonalizable powers decay at exactly rho^k") {
  SystemSpec spec;
  spec.blocks = {{0.9, 1}, {-0.6, 1}, {0.2, 1}};
  const Mat a = build_system(spec);
  Mat power = Mat::Identity(3, 3);
  for (long k = 1; k <= 30; ++k) {
    power = power * a;
    CHECK(operator_norm(power) ==
          doctest::Approx(std::pow(0.9, double(k))).epsilon(1e-10));
  }
}

TEST_CASE("predicted_peak_iteration and its log-scale companion") {
  CHECK(predicted_peak_iteration(std::exp(-1.0), 5) == doctest::Approx(5.0));
  CHECK(predicted_peak_iteration(0.9, 20) ==
        doctest::Approx(189.8244316).epsilon(1e-9));
  CHECK(predicted_peak_iteration(0.5, 4) ==
        doctest::Approx(4.0 / std::log(2.0)).epsilon(1e-12));
  CHECK(peak_iteration_log_scale(0.9, 20) ==
        doctest::Approx(20.0 * std::log(20.0) / std::log(1.0 / 0.9)));

  CHECK_THROWS_AS(predicted_peak_iteration(1.0, 5), DimensionError);
  CHECK_THROWS_AS(predicted_peak_iteration(1.5, 5), DimensionError);
  CHECK_THROWS_AS(predicted_peak_iteration(0.9, 1), DimensionError);
}

TEST_CASE("SystemSpec JSON round trip and validation") {
  const auto doc = nlohmann::json::parse(R"({
    "blocks": [{"lambda": 0.9, "size": 47}, {"lambda": -0.75, "size": 3}],
    "conjugation": {"kind": "random_orthogonal", "seed": 42}
  })");
  const SystemSpec spec = SystemSpec::from_json(doc);
  CHECK(spec.dimension() == 50);
  CHECK(spec.spectral_radius() == doctest::Approx(0.9));
  CHECK(spec.conjugation == SystemSpec::Conjugation::kRandomOrthogonal);
  CHECK(spec.conjugation_seed == 42);
  CHECK(SystemSpec::from_json(spec.to_json()) == spec);

  const auto none = nlohmann::json::parse(
      R"({"blocks":[{"lambda":0.5,"size":2}],"conjugation":{"kind":"none"}})");
  const SystemSpec plain = SystemSpec::from_json(none);
  CHECK(plain.conjugation == SystemSpec::Conjugation::kNone);
  CHECK(SystemSpec::from_json(plain.to_json()) == plain);

  SUBCASE("invalid documents name the offending field") {
    auto bad_size = nlohmann::json::parse(R"({"blocks":[{"lambda":0.9,"size":0}]})");
    try {
      SystemSpec::from_json(bad_size);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "size");
    }

    auto unknown = nlohmann::json::parse(R"({"blocks":[{"lambda":0.9,"size":1}],"rotation":1})");
    CHECK_THROWS_AS(SystemSpec::from_json(unknown), ConfigError);

    auto missing_seed = nlohmann::json::parse(
        R"({"blocks":[{"lambda":0.9,"size":1}],"conjugation":{"kind":"random_orthogonal"}})");
    CHECK_THROWS_AS(SystemSpec::from_json(missing_seed), ConfigError);
  }
}
