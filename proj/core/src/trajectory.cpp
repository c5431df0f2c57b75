#include "ldslab/trajectory.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

namespace ldslab {

double NormalSampler::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 in (0, 1] keeps the log finite.
  const double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Mat gaussian_matrix(int n, int N, std::uint64_t seed) {
  if (n < 1 || N < 1) {
    throw DimensionError("gaussian_matrix: dimensions must be >= 1");
  }
  NormalSampler sampler(seed);
  Mat m(n, N);
  for (int col = 0; col < N; ++col) {
    for (int row = 0; row < n; ++row) {
      m(row, col) = sampler.next();
    }
  }
  return m;
}

namespace {

Trajectory run_recursion(const Mat& a, const Vec& x0, const Mat& noise,
                         std::uint64_t seed) {
  const Eigen::Index n = a.rows();
  const Eigen::Index steps = noise.cols();
  Trajectory traj;
  traj.states = Mat::Zero(n, steps + 1);
  traj.states.col(0) = x0;
  traj.noises = noise;
  traj.seed = seed;
  traj.spec_digest = matrix_digest(a);
  for (Eigen::Index t = 0; t < steps; ++t) {
    traj.states.col(t + 1) = a * traj.states.col(t) + noise.col(t);
    if (!traj.states.col(t + 1).allFinite()) {
      throw OverflowError("simulate: state overflow at t=" +
                          std::to_string(t + 1));
    }
  }
  return traj;
}

}  // namespace

Trajectory simulate(const Mat& a, int N, const Vec& x0, std::uint64_t seed) {
  if (a.rows() != a.cols()) {
    throw DimensionError("simulate: transition matrix must be square");
  }
  if (N < 1) {
    throw DimensionError("simulate: N must be >= 1");
  }
  if (x0.size() != a.rows()) {
    throw DimensionError("simulate: x0 has length " + std::to_string(x0.size()) +
                         ", expected " + std::to_string(a.rows()));
  }
  require_finite(a, "simulate");
  const Mat noise = gaussian_matrix(static_cast<int>(a.rows()), N, seed);
  return run_recursion(a, x0, noise, seed);
}

Trajectory simulate(const Mat& a, int N, std::uint64_t seed) {
  return simulate(a, N, Vec::Zero(a.rows()), seed);
}

Trajectory simulate_with_noise(const Mat& a, const Vec& x0, const Mat& noise) {
  if (a.rows() != a.cols()) {
    throw DimensionError("simulate_with_noise: transition matrix must be square");
  }
  if (noise.rows() != a.rows() || noise.cols() < 1) {
    throw DimensionError("simulate_with_noise: noise must be n x N with N >= 1");
  }
  if (x0.size() != a.rows()) {
    throw DimensionError("simulate_with_noise: x0 length mismatch");
  }
  require_finite(a, "simulate_with_noise");
  require_finite(noise, "simulate_with_noise");
  return run_recursion(a, x0, noise, /*seed=*/0);
}

DataMatrices assemble(const Trajectory& traj) {
  const Eigen::Index N = traj.noises.cols();
  DataMatrices data;
  data.x_plus = traj.states.rightCols(N);
  data.x_minus = traj.states.leftCols(N);
  data.noise = traj.noises;
  return data;
}

double dynamics_residual(const DataMatrices& data, const Mat& a) {
  const double denom = data.x_plus.norm();
  const double num = (data.x_plus - a * data.x_minus - data.noise).norm();
  return denom > 0.0 ? num / denom : num;
}

VarianceClass talagrand_variance_class(double op_norm_a, long N) {
  if (op_norm_a < 0.0 || N < 1) {
    throw DimensionError("talagrand_variance_class: invalid arguments");
  }
  const double nd = static_cast<double>(N);
  if (std::abs(op_norm_a - 1.0) <= 1e-12) {
    return {StabilityClass::kMarginal, nd * (nd + 1.0)};
  }
  if (op_norm_a < 1.0) {
    const double gap = 1.0 - op_norm_a;
    return {StabilityClass::kStable, 1.0 / (gap * gap)};
  }
  return {StabilityClass::kExplosive, std::pow(op_norm_a, nd) * nd};
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const int n = traj.dim();
  const int N = traj.length();
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",x_" << i;
  for (int i = 1; i <= n; ++i) out << ",eta_" << i;
  out << "\n";
  out.precision(17);
  for (int t = 0; t <= N; ++t) {
    out << t;
    for (int i = 0; i < n; ++i) out << "," << traj.states(i, t);
    for (int i = 0; i < n; ++i) {
      out << ",";
      if (t < N) out << traj.noises(i, t);
    }
    out << "\n";
  }
}

}  // namespace ldslab
