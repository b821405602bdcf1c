#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vctl/hamiltonian.hpp"
#include "vctl/hjb.hpp"
#include "vctl/lift.hpp"
#include "vctl/numerics.hpp"
#include "vctl/payoff.hpp"

namespace vctl {

enum class Scheme { exp_euler, euler };

struct SimConfig {
  double dt = 1e-3;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::exp_euler;
  double horizon = 1.0;
  Execution execution = Execution::parallel;
  bool store_paths = true;  // keep observed/control rows; costs are always kept

  std::size_t n_steps() const;
  double step() const { return horizon / static_cast<double>(n_steps()); }
};

// Deterministic open-loop control, piecewise constant: values[i] on
// [times[i], times[i+1]) with times[0] = 0.
struct OpenLoopControl {
  std::string name;
  std::vector<double> times;
  std::vector<double> values;

  static OpenLoopControl constant(double u);
  static OpenLoopControl bang_bang(double first, double second, double t_switch);
  static OpenLoopControl piecewise(std::vector<double> times, std::vector<double> values);

  double operator()(double t) const;
  nlohmann::json to_json() const;
  static OpenLoopControl from_json(const nlohmann::json& j);
};

struct PathBatch {
  std::vector<double> times;     // n_steps + 1
  std::size_t n_paths = 0;
  std::vector<double> observed;  // n_paths x (n_steps + 1), empty unless stored
  std::vector<double> controls;  // n_paths x n_steps, empty unless stored
  std::vector<LiftedState> terminal_states;  // lifted runs only
  std::vector<double> terminal_y;
  std::vector<double> running_cost;  // sum l1(u_k) dt, filled when a Hamiltonian is known
  std::vector<double> gaps;          // sum (H_CV(p;u) - H_min(p)) dt, filled when a value grid is given
  std::vector<char> excluded;
  std::size_t n_excluded = 0;

  std::size_t n_steps() const { return times.empty() ? 0 : times.size() - 1; }
  double y(std::size_t path, std::size_t k) const { return observed[path * times.size() + k]; }
  double u(std::size_t path, std::size_t k) const { return controls[path * n_steps() + k]; }
};

// splitmix64 finalizer, used to derive per-path seeds
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t path_seed(std::uint64_t seed, std::size_t path);

// Lifted SDE dX_i = -x_i X_i dt + xi_i ((b u + c Gamma X) dt + g dW), one shared dW.
PathBatch simulate_lifted(const LiftNodes& nodes, const Coefficients& coef, const LiftedState& xi_z,
                          const OpenLoopControl& control, const SimConfig& cfg);
PathBatch simulate_lifted(const LiftedModel& model, const LiftedState& xi_z, const OpenLoopControl& control,
                          const SimConfig& cfg);
// Same, recording running costs and the Hamiltonian gap against the value grid along the paths.
PathBatch simulate_lifted(const LiftedModel& model, const LiftedState& xi_z, const OpenLoopControl& control,
                          const SimConfig& cfg, const ValueGrid& vg, const Hamiltonian& ham);

// endpoint: w_m = K(m dt) for m >= 2 and the cell average of K for m = 1.
// cell_average: w_m = (1/dt) int_{(m-1)dt}^{m dt} K for every m.
enum class DirectWeights { endpoint, cell_average };

// y_k = z(t_k) + sum_{j<k} w_{k-j} [(c y_j + b u_j) dt + g dW_j].
// Uses the same noise stream as simulate_lifted.
PathBatch simulate_svie_direct(const Kernel& kernel, const std::function<double(double)>& z_curve,
                               const OpenLoopControl& control, const Coefficients& coef, const SimConfig& cfg,
                               DirectWeights weights = DirectWeights::endpoint);

// u = gamma_select(gradient_B(vg, t, X)); paths whose observation leaves the grid are excluded.
PathBatch simulate_closed_loop(const LiftedModel& model, const ValueGrid& vg, const Hamiltonian& ham,
                               const LiftedState& xi_z, const SimConfig& cfg);

struct CostEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n = 0;
};

// per path sum l1(u_k) dt + phi(y_T), excluded paths dropped
std::vector<double> path_costs(const PathBatch& batch, const Hamiltonian& ham, const Payoff& phi);
CostEstimate estimate_cost(const PathBatch& batch, const Hamiltonian& ham, const Payoff& phi);

struct AlternativeResult {
  std::string name;
  CostEstimate cost;
  numerics::MeanStats gap;
  double j_minus_v = 0.0;
  bool ordered = false;        // J + 3 se >= v
  bool strict = false;         // J - v > 2 se
  double identity_error = 0.0; // |J - v - E gap|
  double identity_tol = 0.0;   // 3 sqrt(se_J^2 + se_gap^2) + grid tolerance
  bool identity_ok = false;
};

struct VerificationReport {
  double v = 0.0;
  double y0 = 0.0;
  CostEstimate optimal;
  numerics::MeanStats optimal_gap;
  std::size_t excluded = 0;
  double grid_tol = 0.0;
  std::vector<AlternativeResult> alternatives;
  bool check_a = false;  // ordering for every alternative
  bool check_b = false;  // |v - J(u*)| <= 3 se + grid tolerance
  double margin_b = 0.0;
  bool check_c = false;  // fundamental identity for every control
  bool passed() const { return check_a && check_b && check_c; }
  nlohmann::json to_json() const;
};

// endpoints of U, zero when admissible, and both switches at T/2
std::vector<OpenLoopControl> default_alternatives(const Hamiltonian& ham, double T);

VerificationReport verify_optimality(const LiftedModel& model, const ValueGrid& vg, const Hamiltonian& ham,
                                     const Payoff& phi, const LiftedState& xi_z, const SimConfig& cfg,
                                     const std::vector<OpenLoopControl>& alternatives, double grid_tol = 2e-3);

// long format path,t,y,u for the first `max_paths` paths
void write_paths_csv(std::ostream& os, const PathBatch& batch, std::size_t max_paths);

}  // namespace vctl
