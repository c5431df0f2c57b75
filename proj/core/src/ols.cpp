#include "ldslab/ols.hpp"

#include <cmath>
#include <string>

namespace ldslab {

namespace {

// Rank guard for the regressor. The tolerance is relative to the median
// singular value, not sigma_1: a single explosive mode pushes sigma_1 past
// 1e24 while the normal equations remain solvable, and a sigma_1-relative
// cutoff would reject every such run.
SvdResult check_regressor(const Mat& x_minus) {
  const Eigen::Index n = x_minus.rows();
  if (x_minus.cols() < n) {
    throw RankError("ols: trajectory length " + std::to_string(x_minus.cols()) +
                    " < state dimension " + std::to_string(n));
  }
  SvdResult sv = singular_values(x_minus);
  const std::size_t count = sv.singular_values.size();
  const double median = sv.singular_values[count / 2];
  const double smallest = sv.singular_values.back();
  if (!(smallest > kRankTolerance * median)) {
    throw RankError("ols: regressor numerically rank-deficient (sigma_min=" +
                    std::to_string(smallest) + ")");
  }
  return sv;
}

Mat solve_normal_equations(const Mat& x_minus, const Mat& rhs) {
  const Mat gram = x_minus * x_minus.transpose();
  Eigen::LDLT<Mat> ldlt(gram);
  const Mat solution = ldlt.solve(rhs);
  if (!solution.allFinite()) {
    throw RankError("ols: normal equations produced non-finite solution");
  }
  return solution;
}

}  // namespace

Mat estimate_ols(const DataMatrices& data) {
  require_finite(data.x_minus, "estimate_ols");
  require_finite(data.x_plus, "estimate_ols");
  check_regressor(data.x_minus);
  // A_hat^T solves (X- X-^T) Z = X- X+^T.
  return solve_normal_equations(data.x_minus,
                                data.x_minus * data.x_plus.transpose())
      .transpose();
}

std::pair<double, double> ols_error_identity(const DataMatrices& data,
                                             const Mat& a_true) {
  const Mat a_hat = estimate_ols(data);
  const double lhs = (a_true - a_hat).norm();
  const Mat w = solve_normal_equations(data.x_minus,
                                       data.x_minus * data.noise.transpose());
  const double rhs = w.norm();
  return {lhs, rhs};
}

Mat restrict_to_rowspace(const Mat& noise, const Mat& x_minus) {
  if (noise.rows() != x_minus.rows() || noise.cols() != x_minus.cols()) {
    throw DimensionError("restrict_to_rowspace: noise and x_minus shapes differ");
  }
  const Mat basis = orthonormal_rowspace_basis(x_minus);
  return noise * basis;
}

ErrorBounds ols_error_bounds(const DataMatrices& data) {
  const std::vector<double> distances = row_hyperplane_distances(data.x_minus);
  double inverse_square_sum = 0.0;
  for (double d : distances) inverse_square_sum += 1.0 / (d * d);
  const double scale = std::sqrt(inverse_square_sum);

  const SvdResult sv = singular_values(restrict_to_rowspace(data.noise, data.x_minus));
  return {sv.singular_values.back() * scale, sv.singular_values.front() * scale};
}

ErrorBounds diag_error_band(double rho, int n, long N) {
  if (!(rho > 0.0) || !(rho < 1.0)) {
    throw BandUndefinedError("diag_error_band: rho must lie in (0, 1)");
  }
  if (n < 1 || N < n) {
    throw BandUndefinedError("diag_error_band: requires 1 <= n <= N");
  }
  const double dof = static_cast<double>(N - n + 1);
  const double root = std::sqrt(dof);
  const double gap = 1.0 - rho;
  const double upper_denominator = gap * dof - root;
  if (upper_denominator <= 0.0) {
    throw BandUndefinedError(
        "diag_error_band: (1-rho)(N-n+1) <= sqrt(N-n+1); N too small for the "
        "stable band");
  }
  const double nd = static_cast<double>(n);
  return {std::sqrt(gap / (gap * dof + root)),
          std::sqrt(gap * nd * nd / upper_denominator)};
}

nlohmann::json OlsReport::to_json() const {
  auto svd_json = [](const SvdResult& sv) {
    return nlohmann::json{{"singular_values", sv.singular_values},
                          {"effective_rank", sv.effective_rank}};
  };
  return {{"a_hat", to_row_major(a_hat)},
          {"frob_error", frob_error},
          {"distances", distances},
          {"sv_xminus", svd_json(sv_xminus)},
          {"sv_projected_noise", svd_json(sv_projected_noise)},
          {"lower_bound", lower_bound},
          {"upper_bound", upper_bound},
          {"kappa_xminus", kappa_xminus}};
}

OlsReport ols_report(const DataMatrices& data, const Mat& a_true) {
  OlsReport report;
  report.a_hat = estimate_ols(data);
  report.frob_error = (a_true - report.a_hat).norm();
  report.distances = row_hyperplane_distances(data.x_minus);
  report.sv_xminus = singular_values(data.x_minus);
  report.sv_projected_noise =
      singular_values(restrict_to_rowspace(data.noise, data.x_minus));

  double inverse_square_sum = 0.0;
  for (double d : report.distances) inverse_square_sum += 1.0 / (d * d);
  const double scale = std::sqrt(inverse_square_sum);
  report.lower_bound = report.sv_projected_noise.singular_values.back() * scale;
  report.upper_bound = report.sv_projected_noise.singular_values.front() * scale;
  report.kappa_xminus = report.sv_xminus.singular_values.front() /
                        report.sv_xminus.singular_values.back();

  const double slack = 1e-8 * std::max(1.0, report.upper_bound);
  if (report.frob_error < report.lower_bound - slack ||
      report.frob_error > report.upper_bound + slack) {
    throw Error("ols_report: sandwich violated: " +
                std::to_string(report.lower_bound) + " <= " +
                std::to_string(report.frob_error) + " <= " +
                std::to_string(report.upper_bound));
  }
  return report;
}

}  // namespace ldslab
