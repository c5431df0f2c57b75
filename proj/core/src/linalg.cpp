#include "ldslab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace ldslab {

namespace {

// Jacobi rather than divide-and-conquer: trajectory matrices are heavily
// graded (sigma_1/sigma_min beyond 1e20) and BDC deflates their smallest
// singular values to exact zero. Pre-scaling keeps column dot products of
// transient Jordan blow-ups (1e150 territory) inside double range.
Eigen::VectorXd singular_values_vec(const Mat& m) {
  if (m.size() == 0) return Eigen::VectorXd();
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0 || !std::isfinite(scale)) {
    return Eigen::VectorXd::Zero(std::min(m.rows(), m.cols())) * scale;
  }
  if (scale > 1e120 || scale < 1e-120) {
    Eigen::JacobiSVD<Mat> svd((m / scale).eval());
    return svd.singularValues() * scale;
  }
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues();
}

}  // namespace

bool all_finite(const Mat& m) { return m.allFinite(); }

void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) {
    throw DimensionError(std::string(what) + ": matrix has non-finite entries");
  }
}

Mat mat_from_row_major(Eigen::Index rows, Eigen::Index cols,
                       const std::vector<double>& entries) {
  if (rows <= 0 || cols <= 0) {
    throw DimensionError("mat_from_row_major: dimensions must be positive");
  }
  if (static_cast<Eigen::Index>(entries.size()) != rows * cols) {
    throw DimensionError("mat_from_row_major: entry count " +
                         std::to_string(entries.size()) + " != rows*cols");
  }
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = entries[static_cast<std::size_t>(i * cols + j)];
    }
  }
  require_finite(m, "mat_from_row_major");
  return m;
}

std::vector<double> to_row_major(const Mat& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out.push_back(m(i, j));
    }
  }
  return out;
}

std::uint64_t matrix_digest(const Mat& m) {
  constexpr std::uint64_t kOffset = 1469598103934665603ull;
  constexpr std::uint64_t kPrime = 1099511628211ull;
  std::uint64_t h = kOffset;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= kPrime;
    }
  };
  const std::int64_t rows = m.rows();
  const std::int64_t cols = m.cols();
  mix(&rows, sizeof(rows));
  mix(&cols, sizeof(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      mix(&v, sizeof(v));
    }
  }
  return h;
}

SvdResult singular_values(const Mat& m) {
  require_finite(m, "singular_values");
  const Eigen::VectorXd sv = singular_values_vec(m);
  SvdResult out;
  out.singular_values.assign(sv.data(), sv.data() + sv.size());
  if (!out.singular_values.empty() && out.singular_values.front() > 0.0) {
    const double cutoff = kRankTolerance * out.singular_values.front();
    out.effective_rank = std::count_if(
        out.singular_values.begin(), out.singular_values.end(),
        [cutoff](double s) { return s > cutoff; });
  }
  return out;
}

double operator_norm(const Mat& m) {
  require_finite(m, "operator_norm");
  const Eigen::VectorXd sv = singular_values_vec(m);
  return sv.size() == 0 ? 0.0 : sv(0);
}

double frobenius_norm(const Mat& m) {
  require_finite(m, "frobenius_norm");
  return m.norm();
}

double spectral_radius(const Mat& a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("spectral_radius: matrix must be square, got " +
                         std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()));
  }
  require_finite(a, "spectral_radius");
  if (a.rows() == 0) return 0.0;
  Eigen::EigenSolver<Mat> solver(a, /*computeEigenvectors=*/false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Mat solve_lyapunov(const Mat& a, double tol) {
  if (a.rows() != a.cols()) {
    throw DimensionError("solve_lyapunov: matrix must be square");
  }
  if (tol <= 0.0) {
    throw DimensionError("solve_lyapunov: tolerance must be positive");
  }
  const double rho = spectral_radius(a);
  if (rho >= 1.0) {
    throw InstabilityError(
        "solve_lyapunov: spectral radius " + std::to_string(rho) +
        " >= 1, no positive definite solution");
  }
  const Eigen::Index n = a.rows();
  const Mat eye = Mat::Identity(n, n);

  // P_{k+1} = A^T P_k A + I from P_0 = I. With M_k = A^T P_k A the residual
  // of P_{k+1} is ||M_{k+1} - M_k||_F, so one product pair per step suffices.
  Mat p = eye;
  Mat m_prev = a.transpose() * p * a;
  constexpr long kMaxIters = 200000;
  for (long it = 0; it < kMaxIters; ++it) {
    p = m_prev + eye;
    p = ((p + p.transpose()) * 0.5).eval();
    Mat m_cur = a.transpose() * p * a;
    const double residual = (m_cur - m_prev).norm();
    if (!std::isfinite(residual)) {
      throw OverflowError("solve_lyapunov: iterate overflow");
    }
    if (residual <= tol) {
      return p;
    }
    m_prev.swap(m_cur);
  }
  throw ConvergenceError("solve_lyapunov: residual above tolerance after " +
                         std::to_string(kMaxIters) + " iterations");
}

std::vector<double> row_hyperplane_distances(const Mat& y) {
  require_finite(y, "row_hyperplane_distances");
  const Eigen::Index d = y.rows();
  const Eigen::Index p = y.cols();
  if (d > p) {
    throw DimensionError("row_hyperplane_distances: needs rows <= cols");
  }
  const SvdResult sv = singular_values(y);
  if (sv.effective_rank < d) {
    throw RankError("row_hyperplane_distances: rank " +
                    std::to_string(sv.effective_rank) + " < rows " +
                    std::to_string(d));
  }

  std::vector<double> distances(static_cast<std::size_t>(d));
  if (d == 1) {
    distances[0] = y.row(0).norm();  // span of no rows is {0}
    return distances;
  }

  Mat others(p, d - 1);
  for (Eigen::Index j = 0; j < d; ++j) {
    Eigen::Index col = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (i == j) continue;
      others.col(col++) = y.row(i).transpose();
    }
    Eigen::HouseholderQR<Mat> qr(others);
    const Mat basis = qr.householderQ() * Mat::Identity(p, d - 1);
    const Vec row = y.row(j).transpose();
    const Vec residual = row - basis * (basis.transpose() * row);
    distances[static_cast<std::size_t>(j)] = residual.norm();
  }
  return distances;
}

Mat orthonormal_rowspace_basis(const Mat& x) {
  require_finite(x, "orthonormal_rowspace_basis");
  const Eigen::Index n = x.rows();
  const Eigen::Index cols = x.cols();
  if (n > cols) {
    throw DimensionError("orthonormal_rowspace_basis: needs rows <= cols");
  }
  const SvdResult sv = singular_values(x);
  if (sv.effective_rank < n) {
    throw RankError("orthonormal_rowspace_basis: rank " +
                    std::to_string(sv.effective_rank) + " < rows " +
                    std::to_string(n));
  }
  Eigen::HouseholderQR<Mat> qr(x.transpose());
  return qr.householderQ() * Mat::Identity(cols, n);
}

double condition_number(const Mat& m) {
  const SvdResult sv = singular_values(m);
  if (sv.singular_values.empty()) {
    return std::numeric_limits<double>::infinity();
  }
  if (sv.effective_rank <
      static_cast<Eigen::Index>(sv.singular_values.size())) {
    return std::numeric_limits<double>::infinity();
  }
  return sv.singular_values.front() / sv.singular_values.back();
}

}  // namespace ldslab
