#include <doctest.h>

#include <cmath>

#include "ldslab/ols.hpp"
#include "ldslab/system_builder.hpp"
#include "ldslab/trajectory.hpp"

using namespace ldslab;

namespace {

// Independent least-squares route: per-row QR solves of X-^T b = x+_row,
// no normal equations.
Mat qr_least_squares(const DataMatrices& data) {
  const Mat regressor = data.x_minus.transpose();  // N x n
  Eigen::ColPivHouseholderQR<Mat> qr(regressor);
  Mat a_hat(data.x_minus.rows(), data.x_minus.rows());
  for (Eigen::Index row = 0; row < a_hat.rows(); ++row) {
    a_hat.row(row) = qr.solve(data.x_plus.row(row).transpose()).transpose();
  }
  return a_hat;
}

DataMatrices diagonal_run(const std::vector<double>& eigenvalues, int N,
                          std::uint64_t seed) {
  const Mat a = build_system(SystemSpec::diagonal(eigenvalues));
  return assemble(simulate(a, N, seed));
}

}  // namespace

TEST_CASE("estimate_ols recovers the dynamics exactly without noise") {
  Mat a(2, 2);
  a << 0.5, 0.0, 0.0, 0.25;
  Vec x0(2);
  x0 << 1.0, 1.0;
  const Trajectory traj = simulate_with_noise(a, x0, Mat::Zero(2, 2));
  const Mat a_hat = estimate_ols(assemble(traj));
  CHECK((a_hat - a).norm() < 1e-12);
}

TEST_CASE("estimate_ols with null dynamics stays small for N >> n") {
  const Mat a = Mat::Zero(5, 5);
  const Trajectory traj = simulate(a, 500, 31);
  const Mat a_hat = estimate_ols(assemble(traj));
  CHECK(a_hat.norm() < 0.5);
}

TEST_CASE("estimate_ols agrees with an independent QR least-squares route") {
  const Mat a = build_system(SystemSpec::diagonal({0.9, -0.7, 0.4, 0.1, -0.2}));
  const DataMatrices data = assemble(simulate(a, 500, 17));
  const Mat via_normal = estimate_ols(data);
  const Mat via_qr = qr_least_squares(data);
  CHECK((via_normal - via_qr).norm() <= 1e-8 * std::max(1.0, via_qr.norm()));
  CHECK((via_normal - a).norm() < 0.5);
}

TEST_CASE("estimate_ols raises RankError on deficient regressors") {
  DataMatrices data;
  data.x_minus = Mat::Ones(2, 2);  // rank one
  data.x_plus = Mat::Ones(2, 2);
  data.noise = Mat::Zero(2, 2);
  CHECK_THROWS_AS(estimate_ols(data), RankError);

  // N < n is rank-deficient by shape.
  DataMatrices shallow;
  shallow.x_minus = Mat::Ones(3, 2);
  shallow.x_plus = Mat::Ones(3, 2);
  shallow.noise = Mat::Zero(3, 2);
  CHECK_THROWS_AS(estimate_ols(shallow), RankError);
}

TEST_CASE("ols_error_identity holds to roundoff") {
  SUBCASE("zero noise gives zero on both sides") {
    Mat a(2, 2);
    a << 0.5, 0.0, 0.0, 0.25;
    Vec x0(2);
    x0 << 1.0, -1.0;
    const Trajectory traj = simulate_with_noise(a, x0, Mat::Zero(2, 4));
    const auto [lhs, rhs] = ols_error_identity(assemble(traj), a);
    CHECK(lhs < 1e-12);
    CHECK(rhs < 1e-12);
  }

  SUBCASE("seeded stable runs") {
    const Mat a = build_system(SystemSpec::diagonal({0.9, 0.6, -0.3, 0.2, 0.8}));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto data = assemble(simulate(a, 100, derive_trial_seed(88, seed)));
      const auto [lhs, rhs] = ols_error_identity(data, a);
      CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max(lhs, 1.0));
    }
  }

  SUBCASE("scalar case against closed forms") {
    Mat a(1, 1);
    a << 0.7;
    const auto data = assemble(simulate(a, 50, 3));
    const auto [lhs, rhs] = ols_error_identity(data, a);
    // hat(a) - a = <eta, x> / <x, x> in one dimension
    const double xx = data.x_minus.row(0).squaredNorm();
    const double ex = data.x_minus.row(0).dot(data.noise.row(0));
    CHECK(lhs == doctest::Approx(std::abs(ex) / xx).epsilon(1e-10));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(lhs, 1.0));
  }
}

TEST_CASE("restrict_to_rowspace on canonical and scalar cases") {
  const int n = 3;
  const int N = 8;
  Mat x_minus = Mat::Zero(n, N);
  x_minus.leftCols(n) = Mat::Identity(n, n);  // [I | 0]
  const Mat noise = gaussian_matrix(n, N, 44);
  const Mat restricted = restrict_to_rowspace(noise, x_minus);
  REQUIRE(restricted.rows() == n);
  REQUIRE(restricted.cols() == n);
  // Row space is the first n coordinates: same singular values as E's
  // leading block.
  const auto sv_restricted = singular_values(restricted).singular_values;
  const auto sv_block = singular_values(noise.leftCols(n)).singular_values;
  for (std::size_t i = 0; i < sv_restricted.size(); ++i) {
    CHECK(sv_restricted[i] == doctest::Approx(sv_block[i]).epsilon(1e-10));
  }

  SUBCASE("singular values independent of the basis choice") {
    const Mat x = gaussian_matrix(4, 12, 45);
    const Mat e = gaussian_matrix(4, 12, 46);
    const Mat q = orthonormal_rowspace_basis(x);
    const Mat rotation = random_orthogonal(4, 47);
    const auto direct = singular_values(e * q).singular_values;
    const auto rotated = singular_values(e * (q * rotation)).singular_values;
    for (std::size_t i = 0; i < direct.size(); ++i) {
      CHECK(rotated[i] == doctest::Approx(direct[i]).epsilon(1e-8));
    }
  }

  SUBCASE("n = 1 reduces to an inner product with the unit row") {
    Mat x(1, 6);
    x << 1, 2, 3, 4, 5, 6;
    const Mat e = gaussian_matrix(1, 6, 48);
    const Mat r = restrict_to_rowspace(e, x);
    const double expected = std::abs(e.row(0).dot(x.row(0)) / x.row(0).norm());
    CHECK(std::abs(r(0, 0)) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("ols_error_bounds sandwich the true error") {
  SUBCASE("zero noise collapses the bounds") {
    Mat a(2, 2);
    a << 0.5, 0.0, 0.0, 0.25;
    Vec x0(2);
    x0 << 1.0, -1.0;
    const auto data = assemble(simulate_with_noise(a, x0, Mat::Zero(2, 4)));
    const ErrorBounds bounds = ols_error_bounds(data);
    CHECK(bounds.lower == 0.0);
    CHECK(bounds.upper == 0.0);
  }

  SUBCASE("fixed small case") {
    const Mat a = build_system(SystemSpec::diagonal({0.9, 0.5}));
    const auto data = assemble(simulate(a, 10, 5));
    const ErrorBounds bounds = ols_error_bounds(data);
    const double error = (a - estimate_ols(data)).norm();
    CHECK(bounds.lower <= error * (1.0 + 1e-9));
    CHECK(error <= bounds.upper * (1.0 + 1e-9));
  }

  SUBCASE("seeded sweep of stable diagonal systems") {
    for (int i = 0; i < 25; ++i) {
      const int n = 2 + (i % 7);
      std::vector<double> eigenvalues;
      NormalSampler entropy(derive_trial_seed(500, i));
      for (int j = 0; j < n; ++j) {
        eigenvalues.push_back(0.95 * std::tanh(entropy.next()));
      }
      const auto data = diagonal_run(eigenvalues, 12 * n, derive_trial_seed(501, i));
      const Mat a = build_system(SystemSpec::diagonal(eigenvalues));
      const ErrorBounds bounds = ols_error_bounds(data);
      const double error = (a - estimate_ols(data)).norm();
      const double slack = 1e-8 * std::max(1.0, bounds.upper);
      CHECK(bounds.lower - slack <= error);
      CHECK(error <= bounds.upper + slack);
    }
  }
}

TEST_CASE("trace identity chain for the inverse Gram") {
  const Mat a = build_system(SystemSpec::diagonal({0.9, -0.5, 0.3, 0.6}));
  const auto data = assemble(simulate(a, 80, 21));
  const Mat& x = data.x_minus;

  const Mat gram_inv = (x * x.transpose()).inverse();
  const double trace = gram_inv.trace();
  const double map_frob = (x.transpose() * gram_inv).squaredNorm();
  double sigma_sum = 0.0;
  for (double s : singular_values(x).singular_values) sigma_sum += 1.0 / (s * s);
  double dist_sum = 0.0;
  for (double d : row_hyperplane_distances(x)) dist_sum += 1.0 / (d * d);

  CHECK(std::abs(map_frob - trace) <= 1e-8 * trace);
  CHECK(std::abs(sigma_sum - trace) <= 1e-8 * trace);
  CHECK(std::abs(dist_sum - trace) <= 1e-8 * trace);
}

TEST_CASE("estimate_ols is equivariant under orthogonal state changes") {
  const Mat a = build_system(SystemSpec::diagonal({0.8, -0.6, 0.4}));
  const Trajectory traj = simulate(a, 60, 9);
  const Mat u = random_orthogonal(3, 10);

  DataMatrices data = assemble(traj);
  const Mat base = estimate_ols(data);

  DataMatrices rotated;
  rotated.x_minus = u * data.x_minus;
  rotated.x_plus = u * data.x_plus;
  rotated.noise = u * data.noise;
  const Mat transformed = estimate_ols(rotated);

  CHECK((transformed - u * base * u.transpose()).norm() <=
        1e-8 * std::max(1.0, base.norm()));
}

TEST_CASE("diag_error_band arithmetic and failure mode") {
  const ErrorBounds band = diag_error_band(0.9, 30, 300);
  // (1-rho)(N-n+1) = 27.1 > sqrt(271) = 16.46...
  const double root = std::sqrt(271.0);
  CHECK(band.lower ==
        doctest::Approx(std::sqrt(0.1 / (0.1 * 271.0 + root))).epsilon(1e-12));
  CHECK(band.upper ==
        doctest::Approx(std::sqrt(0.1 * 900.0 / (0.1 * 271.0 - root))).epsilon(1e-12));

  // Large-N tail decays like N^{-1/2}.
  const double upper_far = diag_error_band(0.9, 30, 100000000).upper;
  const double upper_farther = diag_error_band(0.9, 30, 400000000).upper;
  CHECK(upper_far / upper_farther == doctest::Approx(2.0).epsilon(1e-3));

  CHECK_THROWS_AS(diag_error_band(0.9, 30, 40), BandUndefinedError);
}

TEST_CASE("ols_report fields, sandwich assertion, JSON schema") {
  const Mat a = build_system(SystemSpec::diagonal({0.9, 0.5, -0.4}));
  const auto data = assemble(simulate(a, 60, 15));
  const OlsReport report = ols_report(data, a);

  CHECK(report.distances.size() == 3);
  CHECK(report.lower_bound <= report.upper_bound);
  CHECK(report.lower_bound <= report.frob_error * (1 + 1e-9));
  CHECK(report.frob_error <= report.upper_bound * (1 + 1e-9));
  CHECK(report.kappa_xminus > 1.0);
  CHECK(report.sv_xminus.effective_rank == 3);

  const nlohmann::json doc = report.to_json();
  const std::vector<std::string> keys = {
      "a_hat",         "frob_error",        "distances",
      "sv_xminus",     "sv_projected_noise", "lower_bound",
      "upper_bound",   "kappa_xminus"};
  CHECK(doc.size() == keys.size());
  for (const auto& key : keys) CHECK(doc.contains(key));
  CHECK(doc["a_hat"].size() == 9);
  CHECK(doc["sv_xminus"]["effective_rank"] == 3);
}
