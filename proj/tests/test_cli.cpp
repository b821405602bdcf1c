#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "vctl/config.hpp"
#include "vctl/runner.hpp"

using namespace vctl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("vctl_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write(const fs::path& dir, const std::string& name, const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + VCTL_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

int run(const std::string& sub, const fs::path& config, const fs::path& out, const std::string& extra = "") {
  return cli(sub + " --config \"" + config.string() + "\" --out \"" + out.string() + "\" " + extra,
             out.string() + ".log");
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text, "c.yaml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* kSmall =
    "kernel: {family: riemann_liouville, alpha: 0.75}\n"
    "coefficients: {b: 1.0, g: 0.5}\n"
    "hamiltonian: {u_min: -1.0, u_max: 1.0}\n"
    "payoff: {kind: linear, amplitude: 0.5}\n"
    "lift: {n_nodes: 20}\n"
    "hjb: {n_tau: 40, n_y: 60}\n"
    "simulation: {dt: 0.01, n_paths: 300, seed: 9, csv_paths: 30}\n"
    "smoothing: {n_points: 60, min_energy_steps: 200}\n";

}  // namespace

TEST_CASE("config: defaults and overrides") {
  const auto cfg = parse_config(kSmall, "small.yaml");
  CHECK(cfg.kernel["family"] == "riemann_liouville");
  CHECK(cfg.coef.g == 0.5);
  CHECK(cfg.coef.c == 0.0);
  CHECK(cfg.lift.n_nodes == 20);
  CHECK(cfg.hjb.grids.n_tau == 40);
  CHECK(cfg.simulation.sim.n_paths == 300);
  CHECK_FALSE(cfg.simulation.control.has_value());
  CHECK(cfg.smoothing.min_energy_steps == 200);
  CHECK(cfg.build_hamiltonian().u_max() == 1.0);
  CHECK(cfg.build_model().nodes().size() == 21);
}

TEST_CASE("config: errors carry file, line and column") {
  const auto unknown = config_error("kernel: {family: riemann_liouville, alpha: 0.75}\nhjb:\n  n_tua: 10\n");
  CHECK(unknown.rfind("c.yaml:3:3:", 0) == 0);
  CHECK(unknown.find("n_tua") != std::string::npos);

  const auto type = config_error("kernel: {family: riemann_liouville, alpha: 0.75}\nhorizon: soon\n");
  CHECK(type.rfind("c.yaml:2:", 0) == 0);

  const auto family = config_error("kernel:\n  family: fractional\n");
  CHECK(family.rfind("c.yaml:2:", 0) == 0);
  CHECK(family.find("fractional") != std::string::npos);

  CHECK(config_error("coefficients: {b: 1}\n").find("kernel") != std::string::npos);
  CHECK_FALSE(config_error("kernel: {family: riemann_liouville, alpha: 0.4}\n").empty());
  CHECK_FALSE(config_error("kernel: {family: constant, value: 1}\nhamiltonian: {u_min: 1, u_max: -1}\n").empty());
  CHECK_FALSE(config_error("kernel: {family: constant, value: 1}\nsimulation: {control: {kind: wiggle}}\n").empty());
  CHECK_FALSE(config_error("kernel: [1, 2]\n").empty());
  CHECK_FALSE(config_error("kernel: {family: constant, value: 1\n").empty());
}

TEST_CASE("config: controls, alternatives and kernel families") {
  const auto cfg = parse_config(
      "kernel:\n  family: shifted\n  epsilon: 0.1\n  base: {family: riemann_liouville, alpha: 0.75}\n"
      "simulation:\n  control: {kind: bang_bang, first: -1, second: 1, switch: 0.4}\n"
      "verify:\n  alternatives:\n    - {kind: constant, value: 0.2}\n    - {kind: piecewise, times: [0, 0.5], values: [1, 0]}\n",
      "x.yaml");
  CHECK(cfg.build_kernel().family_name() == "shifted");
  REQUIRE(cfg.simulation.control.has_value());
  CHECK((*cfg.simulation.control)(0.3) == -1.0);
  CHECK((*cfg.simulation.control)(0.5) == 1.0);
  CHECK(cfg.verify.alternatives.size() == 2);
  CHECK(cfg.verify.alternatives[1](0.7) == 0.0);

  const auto fs2 = parse_config("kernel: {family: finite_spectrum, c0: 0.2, atoms: [[1.0, 1.0], [5.0, 0.5]]}\n");
  const auto k = fs2.build_kernel();
  CHECK(k.eval(0.0) == doctest::Approx(1.7));
  CHECK(parse_config("kernel: {family: logarithmic}\n").build_kernel().family_name() == "logarithmic");
  CHECK(parse_config("kernel: {family: exponential, rate: 2.0}\n").build_kernel().eval(1.0) ==
        doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("config: hash is stable and sensitive") {
  const auto a = parse_config(kSmall), b = parse_config(kSmall);
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 64);
  auto c = a;
  c.simulation.sim.seed = 10;
  CHECK(config_hash(c) != config_hash(a));
  // formatting does not matter
  auto text = std::string(kSmall) + "# trailing comment\n";
  CHECK(config_hash(parse_config(text)) == config_hash(a));
}

TEST_CASE("config: shipped examples parse") {
  for (const auto& e : fs::directory_iterator(fs::path(VCTL_SOURCE_DIR) / "configs")) {
    if (e.path().extension() != ".yaml") continue;
    CAPTURE(e.path().string());
    CHECK_NOTHROW(load_config(e.path().string()));
  }
  CHECK_THROWS_AS(load_config("/nonexistent/c.yaml"), ConfigError);
}

TEST_CASE("cli: exit codes") {
  const auto dir = scratch("exit");
  const auto bad = write(dir, "bad.yaml", "kernel: {family: riemann_liouville, alpha: 0.75}\nhjb: {n_tua: 3}\n");
  CHECK(run("hjb-solve", bad, dir / "bad") == exit_config);
  CHECK(slurp(dir / "bad.log").find("bad.yaml:2:") != std::string::npos);
  CHECK(run("lift", dir / "missing.yaml", dir / "missing") == exit_config);
  CHECK(cli("no-such-command", dir / "nosub.log") == exit_config);
  CHECK(cli("lift", dir / "noconfig.log") == exit_config);
  // positive drift with a singular kernel blows up
  const auto blow = write(dir, "blow.yaml", "kernel: {family: riemann_liouville, alpha: 0.75}\ncoefficients: {c: 2.0}\n");
  CHECK(run("kernel-info", blow, dir / "blow") == exit_numeric);
  CHECK(fs::exists(dir / "blow" / "error.json"));
  CHECK(cli("report --dir \"" + (dir / "empty").string() + "\"", dir / "r.log") == exit_config);
  fs::create_directories(dir / "empty");
  CHECK(cli("report --dir \"" + (dir / "empty").string() + "\"", dir / "r.log") == exit_config);
}

TEST_CASE("cli: kernel-info reports the critical exponent") {
  const auto dir = scratch("kernel");
  const auto cfg = write(dir, "k.yaml", "kernel: {family: riemann_liouville, alpha: 0.75}\ncoefficients: {c: -1.0}\n");
  REQUIRE(run("kernel-info", cfg, dir / "out") == exit_ok);
  const auto j = read_json(dir / "out" / "kernel.json");
  CHECK(j["eta_star"].get<double>() == doctest::Approx(0.25));
  CHECK(j["growth_ratio"]["min"].get<double>() == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(j["resolvent"]["cm"]["monotone"] == true);
  CHECK(fs::exists(dir / "out" / "kernel_samples.csv"));
  CHECK(fs::exists(dir / "out" / "resolvent.csv"));
  const auto m = read_json(dir / "out" / "kernel-info.manifest.json");
  CHECK(m["exit_code"] == 0);
  CHECK(m["config_hash"].get<std::string>().size() == 64);

  const auto atoms = write(dir, "a.yaml", "kernel: {family: exponential, rate: 1.0}\n");
  REQUIRE(run("kernel-info", atoms, dir / "atoms") == exit_ok);
  CHECK(read_json(dir / "atoms" / "kernel.json")["eta_star"] == "-inf");
}

TEST_CASE("cli: constant kernel gives a flat smoothing profile") {
  const auto dir = scratch("smooth");
  REQUIRE(run("smoothing", fs::path(VCTL_SOURCE_DIR) / "configs/constant_kernel.yaml", dir / "out") == exit_ok);
  std::ifstream in(dir / "out" / "smoothing.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,gramian,lambda,lambda_sqrt_t,ansatz_energy");
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (int i = 0; i < 4; ++i) std::getline(ss, cell, ',');
    CHECK(std::stod(cell) == doctest::Approx(2.0 / 0.5).epsilon(1e-12));
    ++rows;
  }
  CHECK(rows == 100);
  REQUIRE(cli("report --dir \"" + (dir / "out").string() + "\"", dir / "r.log") == exit_ok);
  const auto rep = read_json(dir / "out" / "report.json");
  CHECK(rep["smoothing"]["lambda_exponent"].get<double>() == doctest::Approx(-0.5).epsilon(1e-9));
}

TEST_CASE("cli: riemann-liouville smoothing exponent in the report") {
  const auto dir = scratch("rl_smooth");
  const auto cfg = fs::path(VCTL_SOURCE_DIR) / "configs/rl075_smoothing.yaml";
  REQUIRE(run("smoothing", cfg, dir / "out") == exit_ok);
  REQUIRE(run("min-energy", cfg, dir / "out") == exit_ok);
  REQUIRE(cli("report --dir \"" + (dir / "out").string() + "\"", dir / "r.log") == exit_ok);
  const auto rep = read_json(dir / "out" / "report.json");
  CHECK(std::abs(rep["smoothing"]["lambda_exponent"].get<double>() + 0.5) <= 0.02);
  CHECK(rep["min_energy"]["max_relative_gap"].get<double>() <= 1e-3);
  CHECK(rep["runs"].contains("smoothing"));
  CHECK(rep["runs"].contains("min-energy"));
  CHECK(fs::exists(dir / "out" / "report_fits.csv"));
}

TEST_CASE("cli: singleton verification passes and the report lists alternatives") {
  const auto dir = scratch("verify");
  const auto out = dir / "out";
  const auto cfg = fs::path(VCTL_SOURCE_DIR) / "configs/singleton.yaml";
  REQUIRE(run("hjb-solve", cfg, out) == exit_ok);
  CHECK(fs::exists(out / "value.vgs"));
  const auto h = read_json(out / "hjb.json");
  CHECK(h["mild_residual"].get<double>() <= 1e-3);
  CHECK(h.contains("second_derivative_exponent"));
  REQUIRE(run("verify", cfg, out, "--value \"" + (out / "value.vgs").string() + "\"") == exit_ok);
  const auto v = read_json(out / "verify.json");
  CHECK(v["v"].get<double>() == doctest::Approx(h["v0"].get<double>()));
  REQUIRE(cli("report --dir \"" + out.string() + "\"", dir / "r.log") == exit_ok);
  const auto rep = read_json(out / "report.json");
  CHECK(rep["verify"]["alternatives"].size() >= 1);
  CHECK(rep["hjb"]["v0"].is_number());
  CHECK(rep["runs"].contains("verify"));
}

TEST_CASE("cli: artifacts are byte identical across runs and thread counts") {
  const auto dir = scratch("determinism");
  const auto cfg = write(dir, "c.yaml", std::string(kSmall) + "output_dir: ignored\n");
  for (const std::string sub : {"hjb-solve", "simulate", "lift"}) {
    REQUIRE(run(sub, cfg, dir / (sub + "1"), "--threads 1") == exit_ok);
    REQUIRE(run(sub, cfg, dir / (sub + "4"), "--threads 4") == exit_ok);
    for (const auto& e : fs::directory_iterator(dir / (sub + "1"))) {
      if (e.path().extension() != ".csv") continue;
      CAPTURE(e.path().string());
      CHECK(slurp(e.path()) == slurp(dir / (sub + "4") / e.path().filename()));
    }
  }
  const auto lift = read_json(dir / "lift1" / "lift.json");
  CHECK(lift["trace_q"].get<double>() > 0.0);
  CHECK(lift["eta"].get<double>() > lift["eta_prime"].get<double>());
  REQUIRE(run("simulate", cfg, dir / "seeded", "--seed 123") == exit_ok);
  CHECK(slurp(dir / "seeded" / "paths.csv") != slurp(dir / "simulate1" / "paths.csv"));
  CHECK(read_json(dir / "seeded" / "simulate.manifest.json")["config_hash"] !=
        read_json(dir / "simulate1" / "simulate.manifest.json")["config_hash"]);
}
