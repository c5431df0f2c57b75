#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#ifndef LDSLAB_BIN
#error "LDSLAB_BIN must point at the ldslab executable"
#endif

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int exit_code;
  std::string output;
};

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() /
                 ("ldslab_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

CliResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path log = scratch_dir() / ("out_" + std::to_string(counter++) + ".log");
  const std::string command =
      std::string(LDSLAB_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(command.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream buffer;
  buffer << in.rdbuf();
  result.output = buffer.str();
  return result;
}

std::string write_file(const std::string& name, const std::string& body) {
  const fs::path path = scratch_dir() / name;
  std::ofstream out(path);
  out << body;
  return path.string();
}

}  // namespace

TEST_CASE("show-spec echoes a canonical spec and validates") {
  const std::string good = write_file("spec_good.json", R"({
    "blocks": [{"lambda": 0.9, "size": 47}, {"lambda": -0.75, "size": 3}],
    "conjugation": {"kind": "random_orthogonal", "seed": 42}
  })");
  const CliResult ok = run_cli("show-spec " + good);
  CHECK(ok.exit_code == 0);
  CHECK(ok.output.find("random_orthogonal") != std::string::npos);
  CHECK(ok.output.find("\"size\": 47") != std::string::npos);

  const std::string bad =
      write_file("spec_bad.json", R"({"blocks":[{"lambda":0.9,"size":0}]})");
  const CliResult fail = run_cli("show-spec " + bad);
  CHECK(fail.exit_code == 2);
  CHECK(fail.output.find("size") != std::string::npos);

  const std::string malformed = write_file("spec_malformed.json", "{not json");
  CHECK(run_cli("show-spec " + malformed).exit_code == 2);
}

TEST_CASE("experiment covariance_blowup writes the k,g table") {
  const fs::path csv = scratch_dir() / "blowup.csv";
  const CliResult result = run_cli(
      "experiment covariance_blowup --lambda 0.9 --n 10 --kmax 20 --out " +
      csv.string());
  CHECK(result.exit_code == 0);

  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "k,g");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 20);
}

TEST_CASE("config errors exit with code 2 and name the problem") {
  CHECK(run_cli("experiment no_such_kind").exit_code == 2);
  CHECK(run_cli("experiment explosive_mode --bogus-flag 3").exit_code == 2);
  CHECK(run_cli("nonsense-subcommand").exit_code == 2);

  const CliResult typo = run_cli(
      "experiment explosive_mode --config " +
      write_file("cfg_typo.json", R"({"tirals": 5})"));
  CHECK(typo.exit_code == 2);
  CHECK(typo.output.find("tirals") != std::string::npos);
}

TEST_CASE("flags override config file values") {
  const std::string cfg = write_file(
      "cfg_override.json", R"({"master_seed": 1, "trials": 4, "n": 6,
                               "trajectory_length": 18})");
  const fs::path json_out = scratch_dir() / "explosive.json";
  const CliResult result =
      run_cli("experiment explosive_mode --config " + cfg + " --seed 9 --json " +
              json_out.string());
  CHECK(result.exit_code == 0);

  std::ifstream in(json_out);
  const nlohmann::json doc = nlohmann::json::parse(in);
  CHECK(doc["config"]["master_seed"] == 9);   // flag wins
  CHECK(doc["config"]["trials"] == 4);        // file value kept
  CHECK(doc["per_trial"].size() == 4);
}

TEST_CASE("verify identities battery passes") {
  const CliResult result = run_cli("verify identities --seed 7 --cases 12");
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("negative second moment") != std::string::npos);
  CHECK(result.output.find("all identities hold") != std::string::npos);
}

TEST_CASE("experiment --out-dir writes csv, json and manifest") {
  const fs::path dir = scratch_dir() / "runA";
  const CliResult result = run_cli(
      "experiment gaussian_projection --trials 50 --out-dir " + dir.string());
  CHECK(result.exit_code == 0);
  CHECK(fs::exists(dir / "gaussian_projection.csv"));
  CHECK(fs::exists(dir / "gaussian_projection.json"));
  CHECK(fs::exists(dir / "manifest.json"));

  std::ifstream in(dir / "manifest.json");
  const nlohmann::json manifest = nlohmann::json::parse(in);
  CHECK(manifest["tool_version"] == "0.1.0");
  CHECK(manifest["experiments"][0]["status"] == "ok");
  for (const auto& output : manifest["outputs"]) {
    CHECK(fs::exists(fs::path(output.get<std::string>())));
  }
}
