#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "ldslab/errors.hpp"

namespace ldslab {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Relative cutoff used for the numerical rank: sigma_j counts toward the
/// rank iff sigma_j > kRankTolerance * sigma_1.
inline constexpr double kRankTolerance = 1e-10;

struct SvdResult {
  std::vector<double> singular_values;  ///< all min(rows, cols), non-increasing
  Eigen::Index effective_rank = 0;      ///< count of sigma_j above the cutoff
};

[[nodiscard]] bool all_finite(const Mat& m);

/// Throws DimensionError if `m` contains a NaN or infinity.
void require_finite(const Mat& m, const char* what);

/// Builds a matrix from a row-major entry list; validates size and finiteness.
Mat mat_from_row_major(Eigen::Index rows, Eigen::Index cols,
                       const std::vector<double>& entries);

std::vector<double> to_row_major(const Mat& m);

/// FNV-1a over the dimensions and raw entry bytes; stable identifier for a
/// matrix value within one build.
std::uint64_t matrix_digest(const Mat& m);

/// Full set of singular values (non-increasing) plus the numerical rank.
SvdResult singular_values(const Mat& m);

/// Matrix 2-norm, i.e. sigma_1(m).
double operator_norm(const Mat& m);

double frobenius_norm(const Mat& m);

/// Largest eigenvalue modulus. Complex pairs are handled internally; only
/// the modulus is exposed. Throws DimensionError for non-square input.
double spectral_radius(const Mat& a);

/// Solves A^T P A - P + I = 0 for the unique P with spectral_radius(A) < 1.
///
/// Fixed-point iteration P <- A^T P A + I from P = I, so every iterate (and
/// the result) satisfies P >= I. Terminates once the Frobenius residual
/// ||A^T P A - P + I||_F drops below `tol`. Throws InstabilityError when
/// spectral_radius(A) >= 1 and ConvergenceError if the tolerance is
/// unreachable within the iteration budget.
Mat solve_lyapunov(const Mat& a, double tol = 1e-10);

/// Euclidean distance of each row of `y` to the span of the remaining rows.
///
/// Requires rows <= cols and full row rank (RankError otherwise). Each
/// distance is computed by projecting the left-out row onto an orthonormal
/// basis of the others, which stays accurate when distances are small.
std::vector<double> row_hyperplane_distances(const Mat& y);

/// Orthonormal basis Q (cols(x) by rows(x)) of the row space of `x`, with
/// Q^T Q = I. Requires full row rank (RankError otherwise).
Mat orthonormal_rowspace_basis(const Mat& x);

/// sigma_1 / sigma_min; +infinity when the matrix is numerically
/// rank-deficient.
double condition_number(const Mat& m);

}  // namespace ldslab
