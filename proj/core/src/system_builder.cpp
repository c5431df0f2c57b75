#include "ldslab/system_builder.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ldslab/trajectory.hpp"

namespace ldslab {

int SystemSpec::dimension() const {
  int n = 0;
  for (const auto& b : blocks) n += b.size;
  return n;
}

double SystemSpec::spectral_radius() const {
  double rho = 0.0;
  for (const auto& b : blocks) rho = std::max(rho, std::abs(b.eigenvalue));
  return rho;
}

bool SystemSpec::diagonalizable() const {
  for (const auto& b : blocks) {
    if (b.size != 1) return false;
  }
  return true;
}

void SystemSpec::validate() const {
  if (blocks.empty()) {
    throw ConfigError("blocks", "at least one block is required");
  }
  for (const auto& b : blocks) {
    if (b.size < 1) {
      throw ConfigError("size", "block size must be >= 1, got " +
                                    std::to_string(b.size));
    }
    if (!std::isfinite(b.eigenvalue)) {
      throw ConfigError("lambda", "eigenvalue must be finite");
    }
  }
}

SystemSpec SystemSpec::diagonal(const std::vector<double>& eigenvalues) {
  SystemSpec spec;
  spec.blocks.reserve(eigenvalues.size());
  for (double lambda : eigenvalues) {
    spec.blocks.push_back({lambda, 1});
  }
  return spec;
}

SystemSpec SystemSpec::single_block(double lambda, int size) {
  SystemSpec spec;
  spec.blocks.push_back({lambda, size});
  return spec;
}

SystemSpec SystemSpec::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) {
    throw ConfigError("system", "expected a JSON object");
  }
  SystemSpec spec;
  bool saw_blocks = false;
  for (const auto& [key, value] : doc.items()) {
    if (key == "blocks") {
      if (!value.is_array() || value.empty()) {
        throw ConfigError("blocks", "expected a non-empty array");
      }
      for (const auto& item : value) {
        if (!item.is_object()) {
          throw ConfigError("blocks", "expected objects with lambda and size");
        }
        BlockSpec block;
        bool saw_lambda = false;
        bool saw_size = false;
        for (const auto& [bkey, bval] : item.items()) {
          if (bkey == "lambda") {
            if (!bval.is_number()) throw ConfigError("lambda", "expected a number");
            block.eigenvalue = bval.get<double>();
            saw_lambda = true;
          } else if (bkey == "size") {
            if (!bval.is_number_integer()) {
              throw ConfigError("size", "expected an integer");
            }
            block.size = bval.get<int>();
            saw_size = true;
          } else {
            throw ConfigError(bkey, "unrecognized key in block");
          }
        }
        if (!saw_lambda) throw ConfigError("lambda", "missing in block");
        if (!saw_size) throw ConfigError("size", "missing in block");
        spec.blocks.push_back(block);
      }
      saw_blocks = true;
    } else if (key == "conjugation") {
      if (!value.is_object()) {
        throw ConfigError("conjugation", "expected an object with a kind");
      }
      std::string kind;
      bool saw_seed = false;
      for (const auto& [ckey, cval] : value.items()) {
        if (ckey == "kind") {
          if (!cval.is_string()) throw ConfigError("kind", "expected a string");
          kind = cval.get<std::string>();
        } else if (ckey == "seed") {
          if (!cval.is_number_unsigned() && !cval.is_number_integer()) {
            throw ConfigError("seed", "expected an unsigned integer");
          }
          if (cval.is_number_integer() && cval.get<std::int64_t>() < 0) {
            throw ConfigError("seed", "must be non-negative");
          }
          spec.conjugation_seed = cval.get<std::uint64_t>();
          saw_seed = true;
        } else {
          throw ConfigError(ckey, "unrecognized key in conjugation");
        }
      }
      if (kind == "none") {
        spec.conjugation = Conjugation::kNone;
        if (saw_seed) throw ConfigError("seed", "not allowed for kind none");
      } else if (kind == "random_orthogonal") {
        spec.conjugation = Conjugation::kRandomOrthogonal;
        if (!saw_seed) throw ConfigError("seed", "required for random_orthogonal");
      } else {
        throw ConfigError("kind", "unknown conjugation kind '" + kind + "'");
      }
    } else {
      throw ConfigError(key, "unrecognized key in system spec");
    }
  }
  if (!saw_blocks) throw ConfigError("blocks", "missing");
  spec.validate();
  return spec;
}

nlohmann::json SystemSpec::to_json() const {
  nlohmann::json blocks_json = nlohmann::json::array();
  for (const auto& b : blocks) {
    blocks_json.push_back({{"lambda", b.eigenvalue}, {"size", b.size}});
  }
  nlohmann::json conj;
  if (conjugation == Conjugation::kNone) {
    conj = {{"kind", "none"}};
  } else {
    conj = {{"kind", "random_orthogonal"}, {"seed", conjugation_seed}};
  }
  return {{"blocks", blocks_json}, {"conjugation", conj}};
}

Mat build_jordan_block(double lambda, int size) {
  if (size < 1) {
    throw DimensionError("build_jordan_block: size must be >= 1, got " +
                         std::to_string(size));
  }
  Mat block = Mat::Zero(size, size);
  for (int i = 0; i < size; ++i) {
    block(i, i) = lambda;
    if (i + 1 < size) block(i, i + 1) = 1.0;
  }
  return block;
}

Mat build_system(const SystemSpec& spec) {
  spec.validate();
  const int n = spec.dimension();
  Mat a = Mat::Zero(n, n);
  int offset = 0;
  for (const auto& b : spec.blocks) {
    a.block(offset, offset, b.size, b.size) =
        build_jordan_block(b.eigenvalue, b.size);
    offset += b.size;
  }
  if (spec.conjugation == SystemSpec::Conjugation::kRandomOrthogonal) {
    const Mat u = random_orthogonal(n, spec.conjugation_seed);
    a = u * a * u.transpose();
  }
  return a;
}

Mat random_orthogonal(int n, std::uint64_t seed) {
  if (n < 1) {
    throw DimensionError("random_orthogonal: n must be >= 1");
  }
  const Mat g = gaussian_matrix(n, n, seed);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(n, n);
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

Mat jordan_block_power(double lambda, int size, long k) {
  if (size < 1) {
    throw DimensionError("jordan_block_power: size must be >= 1");
  }
  if (k < 0) {
    throw DimensionError("jordan_block_power: k must be >= 0");
  }
  Mat out = Mat::Zero(size, size);
  const long r_max = std::min<long>(size - 1, k);
  // C(k, r) via the multiplicative recurrence; the eigenvalue power is kept
  // separate so negative lambda keeps its exact sign.
  double binom = 1.0;
  for (long r = 0; r <= r_max; ++r) {
    if (r > 0) binom *= static_cast<double>(k - r + 1) / static_cast<double>(r);
    const double entry = binom * std::pow(lambda, static_cast<double>(k - r));
    if (!std::isfinite(entry)) {
      throw OverflowError("jordan_block_power: entry overflow for lambda=" +
                          std::to_string(lambda) + ", m=" + std::to_string(size) +
                          ", k=" + std::to_string(k));
    }
    for (long i = 0; i + r < size; ++i) {
      out(i, i + r) = entry;
    }
  }
  return out;
}

NormBounds jordan_power_norm_bounds(double lambda, int size, long k) {
  if (lambda == 0.0) {
    throw DimensionError("jordan_power_norm_bounds: lambda must be non-zero");
  }
  if (k < 1) {
    throw DimensionError("jordan_power_norm_bounds: k must be >= 1");
  }
  const Mat power = jordan_block_power(lambda, size, k);

  const std::vector<double> distances = row_hyperplane_distances(power);
  double min_distance = std::numeric_limits<double>::infinity();
  for (double d : distances) min_distance = std::min(min_distance, d);

  const double abs_lambda = std::abs(lambda);
  double geometric = 0.0;
  for (int s = 0; s < size; ++s) {
    geometric += std::pow(abs_lambda, -static_cast<double>(s));
  }
  const double upper = std::pow(abs_lambda, static_cast<double>(k)) *
                       std::pow(static_cast<double>(k), static_cast<double>(size)) *
                       geometric;
  if (!std::isfinite(upper)) {
    throw OverflowError("jordan_power_norm_bounds: upper bound overflow for lambda=" +
                        std::to_string(lambda) + ", m=" + std::to_string(size) +
                        ", k=" + std::to_string(k));
  }
  return {min_distance / std::sqrt(static_cast<double>(size)), upper};
}

double predicted_peak_iteration(double lambda, int size) {
  const double abs_lambda = std::abs(lambda);
  if (abs_lambda <= 0.0 || abs_lambda >= 1.0) {
    throw DimensionError(
        "predicted_peak_iteration: |lambda| must lie in (0, 1)");
  }
  if (size < 2) {
    throw DimensionError("predicted_peak_iteration: size must be >= 2");
  }
  return static_cast<double>(size) / std::log(1.0 / abs_lambda);
}

double peak_iteration_log_scale(double lambda, int size) {
  const double abs_lambda = std::abs(lambda);
  if (abs_lambda <= 0.0 || abs_lambda >= 1.0) {
    throw DimensionError(
        "peak_iteration_log_scale: |lambda| must lie in (0, 1)");
  }
  if (size < 2) {
    throw DimensionError("peak_iteration_log_scale: size must be >= 2");
  }
  return static_cast<double>(size) * std::log(static_cast<double>(size)) /
         std::log(1.0 / abs_lambda);
}

}  // namespace ldslab
