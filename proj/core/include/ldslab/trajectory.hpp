#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>

#include "ldslab/linalg.hpp"

namespace ldslab {

/// Stride used to derive per-trial seeds from a master seed, so trials are
/// reproducible and independent of execution order.
inline constexpr std::uint64_t kSeedStride = 0x9E3779B97F4A7C15ull;

[[nodiscard]] constexpr std::uint64_t derive_trial_seed(
    std::uint64_t master_seed, std::uint64_t trial_index) noexcept {
  return master_seed + trial_index * kSeedStride;
}

/// Deterministic standard-normal stream: mt19937_64 + Box-Muller.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  double next();

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// n-by-N matrix of independent standard normals, filled column by column
/// (column-major fill order is part of the contract). Deterministic per seed.
Mat gaussian_matrix(int n, int N, std::uint64_t seed);

struct Trajectory {
  Mat states;   ///< n x (N+1), columns x_0 ... x_N
  Mat noises;   ///< n x N, columns eta_0 ... eta_{N-1}
  std::uint64_t seed = 0;         ///< 0 for injected-noise runs
  std::uint64_t spec_digest = 0;  ///< digest of the generating matrix

  [[nodiscard]] int dim() const { return static_cast<int>(states.rows()); }
  [[nodiscard]] int length() const { return static_cast<int>(noises.cols()); }
};

/// Runs x_{t+1} = A x_t + eta_t with eta drawn from gaussian_matrix(n, N,
/// seed) and x_0 = x0 (zero by default). Throws OverflowError naming the
/// first non-finite step, which is expected for explosive A at large N.
Trajectory simulate(const Mat& a, int N, const Vec& x0, std::uint64_t seed);
Trajectory simulate(const Mat& a, int N, std::uint64_t seed);

/// Same recursion with caller-supplied noise columns; used by oracle tests
/// and shared-noise experiment arms.
Trajectory simulate_with_noise(const Mat& a, const Vec& x0, const Mat& noise);

struct DataMatrices {
  Mat x_plus;   ///< [x_1 ... x_N]
  Mat x_minus;  ///< [x_0 ... x_{N-1}]
  Mat noise;    ///< [eta_0 ... eta_{N-1}]
};

/// Column-shifted views of a trajectory.
DataMatrices assemble(const Trajectory& traj);

/// ||x_plus - A x_minus - noise||_F / ||x_plus||_F for the generating A.
double dynamics_residual(const DataMatrices& data, const Mat& a);

enum class StabilityClass { kStable, kMarginal, kExplosive };

struct VarianceClass {
  StabilityClass cls = StabilityClass::kStable;
  double constant = 0.0;
};

/// Transportation-inequality variance class of the trajectory law, keyed on
/// the operator norm of A: stable 1/(1-a)^2, marginal N(N+1), explosive
/// a^N N. Order-level constants, used for reporting and banding only.
VarianceClass talagrand_variance_class(double op_norm_a, long N);

/// CSV export: header `t,x_1,...,x_n,eta_1,...,eta_n`, one row per step,
/// noise columns empty on the last row.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace ldslab
