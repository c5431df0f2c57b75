// ldslab: seeded experiments on single-trajectory least-squares
// identification of linear dynamical systems.
//
// Subcommands:
//   experiment <kind> [flags]   run one experiment, emit CSV/JSON
//   suite figures               run the figure-reproduction set + manifest
//   verify identities           exact-identity batteries, exit 1 on failure
//   show-spec <file>            validate and echo a system spec JSON

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ldslab/experiments.hpp"
#include "ldslab/ols.hpp"
#include "ldslab/system_builder.hpp"
#include "ldslab/trajectory.hpp"

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string rfc3339_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

void write_text_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ldslab::Error("cannot open " + path.string() + " for writing");
  out << body;
  if (!out) throw ldslab::Error("failed writing " + path.string());
}

// The manifest is the completion marker, so it lands via rename.
void write_manifest(const std::filesystem::path& path, const nlohmann::json& doc) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  write_text_file(tmp, doc.dump(2) + "\n");
  std::filesystem::rename(tmp, path);
}

long failure_count(const ldslab::ExperimentResult& result) {
  long count = 0;
  for (const auto& record : result.per_trial) {
    for (const auto& [name, value] : record.metrics) {
      if (name.rfind("overflow", 0) == 0 || name.rfind("failed", 0) == 0) {
        count += static_cast<long>(value);
      }
    }
  }
  return count;
}

std::string long_csv(const ldslab::ExperimentResult& result,
                     const std::vector<std::string>& filter = {}) {
  std::ostringstream out;
  result.write_long_csv(out, filter);
  return out.str();
}

std::string covariance_csv(const ldslab::ExperimentResult& result) {
  std::ostringstream out;
  out << "k,g\n";
  for (const auto& record : result.per_trial) {
    out << ldslab::format_double(record.axis_value) << ','
        << ldslab::format_double(*record.metric("g")) << '\n';
  }
  return out.str();
}

void print_result_summary(const ldslab::ExperimentResult& result) {
  std::cout << "experiment: " << ldslab::to_string(result.config.kind)
            << " (seed " << result.config.master_seed << ", "
            << result.per_trial.size() << " records)\n";
  for (const auto& [name, value] : result.derived) {
    std::cout << "  " << name << " = " << ldslab::format_double(value) << "\n";
  }
  for (const auto& band : result.bands) {
    std::cout << "  band " << band.name;
    if (result.axis_name != "none") {
      std::cout << "[" << result.axis_name << "="
                << ldslab::format_double(band.axis_value) << "]";
    }
    std::cout << " = " << ldslab::format_double(band.value) << "\n";
  }
}

int cmd_experiment(const std::string& kind_name, const std::string& config_path,
                   const std::vector<std::pair<std::string, nlohmann::json>>& overrides,
                   const std::string& out_csv, const std::string& out_json,
                   const std::string& out_dir, int threads) {
  nlohmann::json doc = nlohmann::json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ldslab::ConfigError("config", "cannot open " + config_path);
    doc = nlohmann::json::parse(in);
    if (!doc.is_object()) throw ldslab::ConfigError("config", "expected an object");
  }
  doc["kind"] = kind_name;
  for (const auto& [key, value] : overrides) doc[key] = value;

  const ldslab::ExperimentConfig cfg = ldslab::parse_experiment_config(doc);
  const std::string started = rfc3339_now();
  const ldslab::ExperimentResult result = ldslab::run_experiment(cfg, threads);

  const bool wide_csv = cfg.kind == ldslab::ExperimentKind::kCovarianceBlowup;
  if (!out_csv.empty()) {
    write_text_file(out_csv, wide_csv ? covariance_csv(result) : long_csv(result));
  }
  if (!out_json.empty()) {
    write_text_file(out_json, result.to_json().dump(2) + "\n");
  }
  if (!out_dir.empty()) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    const std::string base = ldslab::to_string(cfg.kind);
    const auto csv_path = dir / (base + ".csv");
    const auto json_path = dir / (base + ".json");
    write_text_file(csv_path, wide_csv ? covariance_csv(result) : long_csv(result));
    write_text_file(json_path, result.to_json().dump(2) + "\n");

    const long failures = failure_count(result);
    nlohmann::json status = {{"name", base}, {"status", "ok"}};
    if (failures > 0) {
      status["status"] = "partial";
      status["overflow_count"] = failures;
    }
    nlohmann::json manifest = {
        {"tool_version", kToolVersion},
        {"config_path", config_path},
        {"master_seed", cfg.master_seed},
        {"started", started},
        {"finished", rfc3339_now()},
        {"outputs", {csv_path.string(), json_path.string()}},
        {"experiments", nlohmann::json::array({status})}};
    write_manifest(dir / "manifest.json", manifest);
  }
  print_result_summary(result);
  return 0;
}

int cmd_suite_figures(std::uint64_t seed, const std::string& out_dir, int threads) {
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  const std::string started = rfc3339_now();

  struct Figure {
    ldslab::ExperimentKind kind;
    std::vector<std::pair<std::string, std::vector<std::string>>> files;
  };
  const std::vector<Figure> figures = {
      {ldslab::ExperimentKind::kExplosiveMode,
       {{"fig1_explosive_mode.csv", {}}}},
      {ldslab::ExperimentKind::kBlockSplit, {{"fig2a_block_split.csv", {}}}},
      {ldslab::ExperimentKind::kDimensionSweep,
       {{"fig2b_sigma_min.csv", {"sigma_min_system", "sigma_min_gaussian"}},
        {"fig2c_sigma_max.csv", {"sigma1_system", "sigma1_gaussian"}}}},
      {ldslab::ExperimentKind::kCovarianceBlowup,
       {{"fig2d_covariance_blowup.csv", {}}}},
  };

  std::vector<std::string> outputs;
  nlohmann::json statuses = nlohmann::json::array();
  bool any_failed = false;
  for (const auto& figure : figures) {
    ldslab::ExperimentConfig cfg = ldslab::default_experiment_config(figure.kind);
    cfg.master_seed = seed;
    nlohmann::json status = {{"name", ldslab::to_string(figure.kind)},
                             {"status", "ok"}};
    try {
      const ldslab::ExperimentResult result = ldslab::run_experiment(cfg, threads);
      for (const auto& [filename, filter] : figure.files) {
        const auto path = dir / filename;
        if (figure.kind == ldslab::ExperimentKind::kCovarianceBlowup) {
          write_text_file(path, covariance_csv(result));
        } else {
          write_text_file(path, long_csv(result, filter));
        }
        outputs.push_back(path.string());
      }
      const long failures = failure_count(result);
      if (failures > 0) {
        status["status"] = "partial";
        status["overflow_count"] = failures;
      }
      print_result_summary(result);
    } catch (const ldslab::Error& e) {
      status["status"] = "failed";
      status["reason"] = e.what();
      any_failed = true;
    }
    statuses.push_back(status);
  }

  nlohmann::json manifest = {{"tool_version", kToolVersion},
                             {"config_path", ""},
                             {"master_seed", seed},
                             {"started", started},
                             {"finished", rfc3339_now()},
                             {"outputs", outputs},
                             {"experiments", statuses}};
  write_manifest(dir / "manifest.json", manifest);
  std::cout << "wrote " << outputs.size() << " CSV files + manifest to "
            << dir.string() << "\n";
  return any_failed ? 1 : 0;
}

ldslab::Mat repeated_jordan_multiply(double lambda, int m, long k) {
  ldslab::Mat power = ldslab::Mat::Identity(m, m);
  const ldslab::Mat block = ldslab::build_jordan_block(lambda, m);
  for (long i = 0; i < k; ++i) power = power * block;
  return power;
}

int cmd_verify_identities(std::uint64_t seed, int cases) {
  using namespace ldslab;
  bool ok = true;

  // Negative second moment: sum sigma_j^-2 == sum d_j^-2 on Gaussian matrices.
  {
    const std::vector<std::pair<int, int>> shapes = {{3, 5}, {10, 30}, {30, 90}};
    double worst = 0.0;
    for (int i = 0; i < cases; ++i) {
      const auto [d, p] = shapes[static_cast<std::size_t>(i) % shapes.size()];
      const Mat y = gaussian_matrix(d, p, derive_trial_seed(seed, i));
      const SvdResult sv = singular_values(y);
      double sigma_sum = 0.0;
      for (double s : sv.singular_values) sigma_sum += 1.0 / (s * s);
      double distance_sum = 0.0;
      for (double dist : row_hyperplane_distances(y)) {
        distance_sum += 1.0 / (dist * dist);
      }
      worst = std::max(worst, std::abs(sigma_sum - distance_sum) / sigma_sum);
    }
    std::cout << "negative second moment: max relative residual = "
              << format_double(worst) << " (" << cases << " cases)\n";
    ok = ok && worst <= 1e-8;
  }

  // OLS error identity on stable diagonal trajectories.
  {
    const std::vector<int> dims = {2, 5, 10};
    double worst = 0.0;
    for (int i = 0; i < cases; ++i) {
      const int n = dims[static_cast<std::size_t>(i) % dims.size()];
      const Mat a = build_system(SystemSpec::diagonal(
          std::vector<double>(static_cast<std::size_t>(n), 0.9)));
      const Trajectory traj =
          simulate(a, 10 * n, derive_trial_seed(seed, 100000 + i));
      const auto [lhs, rhs] = ols_error_identity(assemble(traj), a);
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(lhs, 1.0));
    }
    std::cout << "ols error identity: max relative residual = "
              << format_double(worst) << " (" << cases << " cases)\n";
    ok = ok && worst <= 1e-8;
  }

  // Jordan powers: closed form vs repeated multiplication.
  {
    double worst = 0.0;
    long points = 0;
    for (double lambda : {0.3, 0.9, 1.9}) {
      for (int m : {1, 2, 5, 10}) {
        for (long k = 0; k <= 50; ++k) {
          const Mat closed = jordan_block_power(lambda, m, k);
          if (closed.cwiseAbs().maxCoeff() >= 1e12) continue;
          const Mat direct = repeated_jordan_multiply(lambda, m, k);
          const double denom = std::max(direct.norm(), 1e-300);
          worst = std::max(worst, (closed - direct).norm() / denom);
          ++points;
        }
      }
    }
    std::cout << "jordan power closed form: max relative residual = "
              << format_double(worst) << " (" << points << " grid points)\n";
    ok = ok && worst <= 1e-8;
  }

  std::cout << (ok ? "all identities hold" : "IDENTITY FAILURE") << "\n";
  return ok ? 0 : 1;
}

int cmd_show_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ldslab::ConfigError("file", "cannot open " + path);
  const nlohmann::json doc = nlohmann::json::parse(in);
  const ldslab::SystemSpec spec = ldslab::SystemSpec::from_json(doc);
  std::cout << spec.to_json().dump(2) << "\n";
  std::cerr << "valid system spec: n=" << spec.dimension()
            << ", spectral radius=" << spec.spectral_radius() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical lab for OLS identification of linear dynamical systems"};
  app.require_subcommand(1);

  // experiment
  auto* experiment = app.add_subcommand("experiment", "run one named experiment");
  std::string kind_name;
  experiment->add_option("kind", kind_name, "experiment kind")->required();
  std::string config_path;
  experiment->add_option("--config", config_path, "JSON config file");
  std::uint64_t seed = 0;
  auto* exp_seed = experiment->add_option("--seed", seed, "master seed");
  long trials = 0;
  auto* exp_trials = experiment->add_option("--trials", trials, "trial count");
  long n_dim = 0;
  auto* exp_n = experiment->add_option("--n", n_dim, "state dimension");
  long traj_len = 0;
  auto* exp_len = experiment->add_option("--N", traj_len, "trajectory length");
  double lambda = 0.0;
  auto* exp_lambda = experiment->add_option("--lambda", lambda, "eigenvalue");
  long k_max = 0;
  auto* exp_kmax = experiment->add_option("--kmax", k_max, "power grid bound");
  std::string out_csv;
  experiment->add_option("--out", out_csv, "CSV output path");
  std::string out_json;
  experiment->add_option("--json", out_json, "JSON result path");
  std::string out_dir;
  experiment->add_option("--out-dir", out_dir, "directory for CSV+JSON+manifest");
  int threads = 0;
  experiment->add_option("--threads", threads, "worker cap (default: hardware)");

  // suite
  auto* suite = app.add_subcommand("suite", "run a named suite");
  std::string suite_name;
  suite->add_option("name", suite_name, "suite name (figures)")->required();
  std::uint64_t suite_seed = 42;
  suite->add_option("--seed", suite_seed, "master seed");
  std::string suite_dir = "results";
  suite->add_option("--out-dir", suite_dir, "output directory");
  int suite_threads = 0;
  suite->add_option("--threads", suite_threads, "worker cap");

  // verify
  auto* verify = app.add_subcommand("verify", "run verification batteries");
  std::string verify_name;
  verify->add_option("name", verify_name, "battery name (identities)")->required();
  std::uint64_t verify_seed = 7;
  verify->add_option("--seed", verify_seed, "master seed");
  int verify_cases = 100;
  verify->add_option("--cases", verify_cases, "cases per battery");

  // show-spec
  auto* show = app.add_subcommand("show-spec", "validate and echo a system spec");
  std::string spec_path;
  show->add_option("file", spec_path, "system spec JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (experiment->parsed()) {
      std::vector<std::pair<std::string, nlohmann::json>> overrides;
      if (*exp_seed) overrides.emplace_back("master_seed", seed);
      if (*exp_trials) overrides.emplace_back("trials", trials);
      if (*exp_n) overrides.emplace_back("n", n_dim);
      if (*exp_len) overrides.emplace_back("trajectory_length", traj_len);
      if (*exp_lambda) overrides.emplace_back("lambda", lambda);
      if (*exp_kmax) overrides.emplace_back("k_max", k_max);
      if (threads <= 0) {
        if (const char* env = std::getenv("LDS_LAB_THREADS")) {
          threads = std::atoi(env);
        }
      }
      return cmd_experiment(kind_name, config_path, overrides, out_csv,
                            out_json, out_dir, threads);
    }
    if (suite->parsed()) {
      if (suite_name != "figures") {
        throw ldslab::ConfigError("name", "unknown suite '" + suite_name + "'");
      }
      if (suite_threads <= 0) {
        if (const char* env = std::getenv("LDS_LAB_THREADS")) {
          suite_threads = std::atoi(env);
        }
      }
      return cmd_suite_figures(suite_seed, suite_dir, suite_threads);
    }
    if (verify->parsed()) {
      if (verify_name != "identities") {
        throw ldslab::ConfigError("name", "unknown battery '" + verify_name + "'");
      }
      if (verify_cases < 1) throw ldslab::ConfigError("cases", "must be >= 1");
      return cmd_verify_identities(verify_seed, verify_cases);
    }
    if (show->parsed()) {
      return cmd_show_spec(spec_path);
    }
  } catch (const ldslab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: json: " << e.what() << "\n";
    return 2;
  } catch (const ldslab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
