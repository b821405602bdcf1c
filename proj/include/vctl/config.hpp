#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "vctl/control.hpp"
#include "vctl/hamiltonian.hpp"
#include "vctl/hjb.hpp"
#include "vctl/kernel.hpp"
#include "vctl/lift.hpp"
#include "vctl/payoff.hpp"

namespace vctl {

// Invalid configuration; the message starts with "file:line:column:".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string source;
  nlohmann::json kernel;  // {family, params}
  Coefficients coef;
  double horizon = 1.0;
  InitialCurve initial = InitialCurve::constant(0.0);

  struct HamiltonianSpec {
    double u_min = -1.0;
    double u_max = 1.0;
    std::string cost = "quadratic";
    double weight = 1.0;
  } hamiltonian;

  Payoff payoff = Payoff::linear(0.5);

  struct LiftSpec {
    int n_nodes = 40;
    double t_min = 1e-3;
    std::optional<double> t_max;  // horizon when empty
    double tolerance = 1e-2;
  } lift;

  struct HjbSpec {
    HjbGrids grids;
    KernelSource source = KernelSource::lift;
  } hjb;

  struct SimulationSpec {
    SimConfig sim;
    std::optional<OpenLoopControl> control;  // feedback when empty
    std::size_t csv_paths = 20;
    bool direct = false;
    DirectWeights direct_weights = DirectWeights::endpoint;
  } simulation;

  struct SmoothingSpec {
    double t_min = 1e-3;
    double t_max = 10.0;
    int n_points = 200;
    int min_energy_steps = 2000;
    double k = 1.0;
  } smoothing;

  struct VerifySpec {
    double grid_tol = 2e-3;
    std::vector<OpenLoopControl> alternatives;  // defaults when empty
  } verify;

  std::string output_dir = "out";

  Kernel build_kernel() const;
  Hamiltonian build_hamiltonian() const;
  LiftedModel build_model() const;
  LiftedState initial_state(const LiftedModel& model) const;
  // normalized form used for hashing and manifests
  nlohmann::json canonical() const;
};

ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

// hex SHA-256 of the canonical form
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace vctl
