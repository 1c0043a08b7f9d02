#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "bubbletower/cli.hpp"
#include "bubbletower/errors.hpp"

using namespace bt;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("bubbletower_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

Run run(const std::string& args, const fs::path& dir) {
  const char* exe = std::getenv("BUBBLETOWER_CLI");
  REQUIRE(exe != nullptr);
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + exe + "\" " + args + " > \"" + (dir / "stdout.txt").string() + "\" 2> \"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

// Drops the leading "# run_config" comment line.
std::string csv_body(const fs::path& p) {
  const std::string s = slurp(p);
  return s.substr(s.find('\n') + 1);
}

}  // namespace

TEST_CASE("run config from JSON") {
  const auto rc = run_config_from_json(nlohmann::json::parse(R"({"command":"construct","n":5,"k":[8,12],"h":6})"));
  CHECK(rc.n == 5);
  CHECK(rc.k == std::vector<int>{8, 12});
  CHECK(rc.ring2(8) == 6);
  CHECK(rc.quad.q == doctest::Approx(3.75));
  CHECK(run_config_from_json(nlohmann::json::parse(R"({"k":9})")).ring2(9) == 9);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"kk":9})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"n":"four"})")), ConfigError);
}

TEST_CASE("configuration errors exit with code 2") {
  const fs::path d = scratch("errors");
  const Run low = run("construct --n 3 --out " + d.string(), d);
  CHECK(low.code == 2);
  CHECK(low.err.find("n must be") != std::string::npos);
  CHECK(run("construct --k 2 --out " + d.string(), d).code == 2);
  CHECK(run("frobnicate --out " + d.string(), d).code == 2);
  CHECK(run("construct --bogus 1", d).code == 2);
  CHECK(run("construct --q 9 --out " + d.string(), d).code == 2);

  std::ofstream(d / "bad.json") << R"({"command":"construct","radius":3})";
  const Run unknown = run("--config " + (d / "bad.json").string(), d);
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("radius") != std::string::npos);
}

TEST_CASE("help exits cleanly") {
  const fs::path d = scratch("help");
  CHECK(run("--help", d).code == 0);
  CHECK(slurp(d / "stdout.txt").find("BUBBLETOWER_THREADS") != std::string::npos);
}

TEST_CASE("construct writes the configuration and replays from run_config.json") {
  const fs::path a = scratch("construct_a");
  const fs::path b = scratch("construct_b");
  REQUIRE(run("construct --n 4 --k 8 --h 6 --delta 2 --eps 1.5 --out " + a.string(), a).code == 0);
  const auto cfg = nlohmann::json::parse(slurp(a / "configuration.json"));
  CHECK(cfg["k"] == 8);
  CHECK(cfg["h"] == 6);
  CHECK(cfg["mu"].get<double>() == doctest::Approx(2.0 / 64.0));
  CHECK(cfg["sites"].size() == 15u);
  CHECK(cfg["run_config"]["delta"].get<double>() == doctest::Approx(2.0));

  const std::string csv = slurp(a / "sites.csv");
  CHECK(csv.rfind("# run_config {", 0) == 0);

  auto rc = nlohmann::json::parse(slurp(a / "run_config.json"));
  rc["out"] = b.string();
  std::ofstream(b / "replay.json") << rc.dump();
  REQUIRE(run("--config " + (b / "replay.json").string(), b).code == 0);
  auto cfg_b = nlohmann::json::parse(slurp(b / "configuration.json"));
  cfg_b.erase("run_config");
  auto cfg_a = cfg;
  cfg_a.erase("run_config");
  CHECK(cfg_a == cfg_b);
  CHECK(csv_body(a / "sites.csv") == csv_body(b / "sites.csv"));
}

TEST_CASE("flags override the config file") {
  const fs::path d = scratch("override");
  std::ofstream(d / "c.json") << R"({"command":"construct","n":4,"k":8})";
  REQUIRE(run("--config " + (d / "c.json").string() + " --k 10 --out " + d.string(), d).code == 0);
  CHECK(nlohmann::json::parse(slurp(d / "configuration.json"))["k"] == 10);
}
