#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldslab/linalg.hpp"

namespace ldslab {

/// One Jordan block: eigenvalue plus algebraic multiplicity.
struct BlockSpec {
  double eigenvalue = 0.0;
  int size = 1;

  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

/// Declarative description of a transition matrix: a direct sum of Jordan
/// blocks, optionally conjugated by a seeded Haar-orthogonal matrix.
struct SystemSpec {
  enum class Conjugation { kNone, kRandomOrthogonal };

  std::vector<BlockSpec> blocks;
  Conjugation conjugation = Conjugation::kNone;
  std::uint64_t conjugation_seed = 0;

  [[nodiscard]] int dimension() const;

  /// Largest |eigenvalue| over the blocks (conjugation preserves it).
  [[nodiscard]] double spectral_radius() const;

  [[nodiscard]] bool diagonalizable() const;  // all block sizes equal 1

  /// Throws ConfigError naming the offending field when invalid.
  void validate() const;

  /// n blocks of size one, eigenvalues as given.
  static SystemSpec diagonal(const std::vector<double>& eigenvalues);

  /// One block J(lambda, size).
  static SystemSpec single_block(double lambda, int size);

  /// Strict parser for the canonical JSON form
  ///   {"blocks":[{"lambda":0.9,"size":47},...],
  ///    "conjugation":{"kind":"none"} | {"kind":"random_orthogonal","seed":42}}
  /// Unknown keys are rejected.
  static SystemSpec from_json(const nlohmann::json& doc);

  [[nodiscard]] nlohmann::json to_json() const;

  friend bool operator==(const SystemSpec&, const SystemSpec&) = default;
};

/// Upper-bidiagonal m-by-m block: `lambda` on the diagonal, 1 above it.
Mat build_jordan_block(double lambda, int size);

/// Direct sum of the blocks in listed order; applies the conjugation
/// U A U^T when requested. The spectrum is preserved by construction.
Mat build_system(const SystemSpec& spec);

/// Haar-distributed orthogonal matrix: QR of a seeded Gaussian matrix with
/// the signs of diag(R) folded into Q. Deterministic per seed.
Mat random_orthogonal(int n, std::uint64_t seed);

/// k-th power of J(lambda, size) from the closed form
/// (J^k)_{i,j} = C(k, j-i) lambda^{k-j+i}, not repeated multiplication.
/// Throws OverflowError naming (lambda, size, k) if an entry is not finite.
Mat jordan_block_power(double lambda, int size, long k);

struct NormBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Bracket for ||J(lambda, size)^k||_2, k >= 1, lambda != 0:
///   lower = min_i d(row_i, span of other rows) / sqrt(size),
///   upper = |lambda|^k k^size sum_{s<size} |lambda|^{-s}.
NormBounds jordan_power_norm_bounds(double lambda, int size, long k);

/// Stationary point of k^{2m} |lambda|^{2k}: k* = m / ln(1/|lambda|).
/// Requires 0 < |lambda| < 1 and m >= 2.
double predicted_peak_iteration(double lambda, int size);

/// The m ln(m) / ln(1/|lambda|) peak scale, reported alongside the
/// stationary point for comparison.
double peak_iteration_log_scale(double lambda, int size);

}  // namespace ldslab
