#pragma once

#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldslab/linalg.hpp"
#include "ldslab/trajectory.hpp"

namespace ldslab {

/// Least-squares estimate A_hat = X+ X-^T (X- X-^T)^{-1}, applied through a
/// factorization solve rather than an explicit inverse. No regularization:
/// a rank-deficient X- raises RankError.
Mat estimate_ols(const DataMatrices& data);

/// Both sides of the exact error identity
///   ||A - A_hat||_F = ||E X-^T (X- X-^T)^{-1}||_F,
/// computed by independent routes. `data` must come from `a_true`.
std::pair<double, double> ols_error_identity(const DataMatrices& data,
                                             const Mat& a_true);

/// E restricted to the row space of X-: the n-by-n matrix E Q with
/// Q = orthonormal_rowspace_basis(x_minus). Its singular values are
/// independent of the basis choice.
Mat restrict_to_rowspace(const Mat& noise, const Mat& x_minus);

struct ErrorBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Sandwich for the OLS error: with S = sqrt(sum_j d_j^{-2}) over the row
/// distances of X-, returns [sigma_min(E_Q) S, sigma_1(E_Q) S].
ErrorBounds ols_error_bounds(const DataMatrices& data);

/// Stable-diagonalizable error band at spectral radius rho (unit constants):
///   lower = sqrt((1-rho) / ((1-rho)(N-n+1) + sqrt(N-n+1)))
///   upper = sqrt((1-rho) n^2 / ((1-rho)(N-n+1) - sqrt(N-n+1)))
/// Throws BandUndefinedError when the upper denominator is not positive.
ErrorBounds diag_error_band(double rho, int n, long N);

struct OlsReport {
  Mat a_hat;
  double frob_error = 0.0;
  std::vector<double> distances;
  SvdResult sv_xminus;
  SvdResult sv_projected_noise;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  double kappa_xminus = 0.0;

  [[nodiscard]] nlohmann::json to_json() const;
};

/// Full diagnostic report for one estimation run; asserts the sandwich
/// lower <= frob_error <= upper (up to roundoff slack).
OlsReport ols_report(const DataMatrices& data, const Mat& a_true);

}  // namespace ldslab
