#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "demi/cli.hpp"
#include "demi/errors.hpp"

namespace fs = std::filesystem;
using namespace demi;
using cli::json;

namespace {

std::string env(const char* name) {
  const char* v = std::getenv(name);
  REQUIRE_MESSAGE(v != nullptr, name);
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("demi_cli_test_" + std::to_string(::getpid())) / name;
  fs::create_directories(p);
  return p;
}

struct Proc {
  int code = -1;
  std::string err;
};

Proc run(const std::string& cmd, const fs::path& config, const fs::path& out, const std::string& extra = "") {
  const fs::path err = out / "stderr.txt";
  const std::string line = env("DEMI_BIN") + " " + cmd + " --config " + config.string() + " --out " + out.string() +
                           " --quiet " + extra + " 2> " + err.string();
  const int status = std::system(line.c_str());
  Proc p;
  p.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  p.err = slurp(err);
  return p;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

fs::path config(const std::string& name) { return fs::path(env("DEMI_CONFIGS")) / (name + ".json"); }

const char* laplace_1d = R"({"domain": {"kind": "interval", "x_lo": -1, "x_hi": 1},
  "grid": {"h": 0.02}, "operator": {"alpha": 0}, "seed": 3})";

}  // namespace

TEST_CASE("eigen command brackets the Laplacian eigenvalue") {
  const fs::path out = scratch("eigen");
  const Proc p = run("eigen", config("eigen_1d_laplace"), out);
  REQUIRE(p.code == 0);
  const json doc = json::parse(slurp(out / "result.json"));
  const json& lb = doc["result"]["lambda_bar"];
  CHECK(lb["lambda_lo"].get<double>() < 2.4674);
  CHECK(lb["lambda_hi"].get<double>() > 2.4673);
  CHECK(doc["command"] == "eigen");
  CHECK(doc["version"] == cli::version);
  CHECK(doc["config"]["grid"]["h"] == 0.005);
  CHECK(fs::exists(out / "timing.json"));
  CHECK(fs::exists(out / "eigenfunction.csv"));
}

TEST_CASE("negative mesh size is a validation error naming the field") {
  const fs::path out = scratch("negative_h");
  const fs::path cfg = write_config(out, R"({"domain": {"kind": "interval"}, "grid": {"h": -0.1}})");
  const Proc p = run("solve", cfg, out);
  CHECK(p.code == cli::validation_error);
  CHECK(p.err.find("grid.h") != std::string::npos);
}

TEST_CASE("unknown keys and values are rejected") {
  const fs::path out = scratch("unknown");
  Proc p = run("eigen", write_config(out, R"({"domain": {"kind": "interval"}, "grid": {"h": 0.1, "hh": 1}})"), out);
  CHECK(p.code == cli::validation_error);
  CHECK(p.err.find("grid.hh") != std::string::npos);
  p = run("eigen", write_config(out, R"({"domain": {"kind": "interval"}, "grid": {"h": 0.1}, "operator": {"principal": "pucci"}})"), out);
  CHECK(p.code == cli::validation_error);
  CHECK(p.err.find("operator.principal") != std::string::npos);
  p = run("eigen", write_config(out, "{\"grid\": "), out);
  CHECK(p.code == cli::validation_error);
}

TEST_CASE("parse_config reports the offending path") {
  const auto message = [](const char* text) {
    try {
      cli::parse_config(json::parse(text));
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(R"({"domain": {}, "grid": {"h": 0.1}, "operator": {"alpha": -1}})").find("operator.alpha") != std::string::npos);
  CHECK(message(R"({"domain": {}, "grid": {"h": 0.1}, "operator": {"a": 2, "A": 1}})").find("operator.A") != std::string::npos);
  CHECK(message(R"({"grid": {"h": 0.1}})").find("domain") != std::string::npos);
  try {
    cli::parse_config(json::parse(R"({"domain": {"kind": "disk", "radius": 0}})"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("domain.radius") != std::string::npos);
  }
}

TEST_CASE("mesh too coarse maps to a validation error") {
  const fs::path out = scratch("coarse");
  const Proc p = run("eigen", write_config(out, R"({"domain": {"kind": "interval"}, "grid": {"h": 0.5}})"), out);
  CHECK(p.code == cli::validation_error);
  CHECK(p.err.find("too coarse") != std::string::npos);
}

TEST_CASE("seed flag overrides the config seed") {
  const fs::path out = scratch("seed");
  const fs::path cfg = write_config(out, laplace_1d);
  REQUIRE(run("eigen", cfg, out, "--seed 99").code == 0);
  const json doc = json::parse(slurp(out / "result.json"));
  CHECK(doc["config"]["seed"] == 99);
}

TEST_CASE("result documents are deterministic") {
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  for (const char* name : {"eigen_pucci_plus", "verify_1d_laplace", "bounds_1d_drift"}) {
    const std::string cmd = std::string(name).substr(0, std::string(name).find('_'));
    REQUIRE(run(cmd, config(name), a).code == 0);
    REQUIRE(run(cmd, config(name), b).code == 0);
    CHECK_MESSAGE(slurp(a / "result.json") == slurp(b / "result.json"), name);
    const json timing = json::parse(slurp(a / "timing.json"));
    CHECK(timing.contains("wall_time_s"));
  }
}

TEST_CASE("verify suite passes on the shipped verify configs") {
  for (const char* name : {"verify_1d_laplace", "verify_disk_barriers", "verify_rectangle"}) {
    const fs::path out = scratch(name);
    CHECK_MESSAGE(run("verify", config(name), out).code == 0, name);
  }
}

TEST_CASE("every shipped config parses and names a command") {
  std::vector<std::string> commands;
  for (const auto& entry : fs::directory_iterator(env("DEMI_CONFIGS"))) {
    if (entry.path().extension() != ".json") continue;
    const std::string stem = entry.path().stem().string();
    CHECK_NOTHROW(cli::command_from_string(stem.substr(0, stem.find('_'))));
    CHECK_NOTHROW(cli::load_config(entry.path().string()));
    commands.push_back(stem.substr(0, stem.find('_')));
  }
  for (const char* c : {"solve", "eigen", "bounds", "verify", "oracle1d", "convergence"})
    CHECK_MESSAGE(std::count(commands.begin(), commands.end(), c) > 0, c);
}

TEST_CASE("solve with an exact quadratic solution") {
  const fs::path out = scratch("solve_quadratic");
  REQUIRE(run("solve", config("solve_quadratic"), out).code == 0);
  const json doc = json::parse(slurp(out / "result.json"));
  CHECK(doc["result"]["error_sup"].get<double>() < 1e-12);
  CHECK(fs::exists(out / "solution.csv"));
}

TEST_CASE("convergence command reports orders") {
  const fs::path out = scratch("convergence");
  REQUIRE(run("convergence", config("convergence_1d"), out).code == 0);
  const json doc = json::parse(slurp(out / "result.json"));
  const json& levels = doc["result"]["levels"];
  REQUIRE(levels.size() == 3);
  CHECK(levels[0]["order"].is_null());
  CHECK(doc["result"]["reference"].get<double>() == doctest::Approx(2.4674011).epsilon(1e-7));
  CHECK(fs::exists(out / "convergence.csv"));

  const fs::path q = scratch("convergence_quadratic");
  REQUIRE(run("convergence", config("convergence_solve_quadratic"), q).code == 0);
  const json sq = json::parse(slurp(q / "result.json"));
  for (const json& l : sq["result"]["levels"]) CHECK(l["error"].get<double>() < 1e-12);

  const fs::path two = scratch("convergence_two_levels");
  const Proc p = run("convergence", write_config(two, R"({"domain": {"kind": "interval"}, "grid": {"h_list": [0.02, 0.01]}})"), two);
  CHECK(p.code == cli::validation_error);
}

TEST_CASE("oracle1d and bounds commands") {
  const fs::path out = scratch("oracle1d");
  REQUIRE(run("oracle1d", config("oracle1d_alpha1"), out).code == 0);
  const json doc = json::parse(slurp(out / "result.json"));
  CHECK(doc["result"]["shooting"].get<double>() == doctest::Approx(1.7680476).epsilon(1e-6));

  const fs::path b = scratch("bounds");
  REQUIRE(run("bounds", config("bounds_1d_drift"), b).code == 0);
  const json bd = json::parse(slurp(b / "result.json"));
  const json& certs = bd["result"]["certificates"];
  CHECK(certs["strip"]["value"].get<double>() <= bd["result"]["lambda_bar"]["lambda_lo"].get<double>());
  CHECK(certs["ball"]["value"].get<double>() >= bd["result"]["lambda_bar"]["lambda_hi"].get<double>());
}
