#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vctl/kernel.hpp"

namespace vctl {

// Quadrature of the extended measure delta_0 + mu. Entry 0 is always the
// delta_0 atom (x = 0, m = 1, xi = K(inf)); the rest carry xi = 1.
struct LiftNodes {
  std::vector<double> x;
  std::vector<double> m;
  std::vector<double> xi;
  double t_min = 0.0;
  double t_max = 0.0;
  double certified_error = 0.0;  // sup relative error of the reconstruction on [t_min, t_max]
  double tolerance = 0.0;
  bool flagged = false;          // certified_error > tolerance

  std::size_t size() const { return x.size(); }
};

enum class LiftScheme { geometric_gauss, atoms_exact };

LiftNodes discretize_measure(const Kernel& k, int n_nodes, double t_min, double t_max,
                             LiftScheme scheme = LiftScheme::geometric_gauss, double tolerance = 1e-2);

// Builds nodes from explicit arrays; entry 0 must be the delta_0 atom.
LiftNodes make_nodes(std::vector<double> x, std::vector<double> m, std::vector<double> xi);

double reconstruct_kernel(const LiftNodes& nodes, double t);

using LiftedState = std::vector<double>;

LiftedState semigroup_apply(const LiftNodes& nodes, double t, std::span<const double> state);
double gamma_observe(const LiftNodes& nodes, std::span<const double> state);
double weighted_norm(const LiftNodes& nodes, std::span<const double> state, double eta);
double analytic_smoothing_constant(const LiftNodes& nodes, double t, double eta, double eta_prime);

struct InitialCurve {
  enum class Kind { constant, kernel_shaped, explicit_vector };
  Kind kind = Kind::constant;
  double value = 0.0;
  std::vector<double> vector;

  static InitialCurve constant(double y0) { return {Kind::constant, y0, {}}; }
  static InitialCurve kernel_shaped(double lambda) { return {Kind::kernel_shaped, lambda, {}}; }
  static InitialCurve explicit_vector(std::vector<double> v) { return {Kind::explicit_vector, 0.0, std::move(v)}; }
};

LiftedState lift_initial_curve(const LiftNodes& nodes, const InitialCurve& spec);

struct Coefficients {
  double c = 0.0;
  double b = 1.0;
  double g = 1.0;
};

// Which kernel drives smoothing and the HJB solver: the exact kernel (or its
// resolvent when c != 0) or the one reconstructed from the lift nodes.
enum class KernelSource { exact, lift };

class LiftedModel {
 public:
  LiftedModel(LiftNodes nodes, Kernel kernel, Coefficients coef, std::optional<double> eta = std::nullopt,
              std::optional<double> eta_prime = std::nullopt);

  const LiftNodes& nodes() const { return nodes_; }
  const Kernel& kernel() const { return kernel_; }
  double c() const { return coef_.c; }
  double b() const { return coef_.b; }
  double g() const { return coef_.g; }
  const Coefficients& coefficients() const { return coef_; }
  double eta() const { return eta_; }
  double eta_prime() const { return eta_prime_; }

  // K itself when c = 0, otherwise the resolvent sampled densely on (0, horizon]
  Kernel effective_kernel(KernelSource source, double horizon) const;

  // Row of Gamma Sbar(tau), with Sbar the semigroup of the drift including c
  std::vector<double> observation_row(double tau) const;
  // Gamma Sbar(tau) xi_K
  double lift_kernel(double tau) const;
  // trace of the discrete Q_t in H_{eta'}; c = 0 only
  double trace_q(double t) const;

 private:
  LiftNodes nodes_;
  Kernel kernel_;
  Coefficients coef_;
  double eta_;
  double eta_prime_;
};

// Resolvent of K(t) = sum w_i e^{-x_i t} with drift c, as an exact finite
// spectrum kernel. Throws BlowUpError when a mode does not decay.
Kernel finite_spectrum_resolvent(std::span<const double> x, std::span<const double> w, double c);

// Default weight exponents for a critical exponent (nullopt = unknown).
std::pair<double, double> default_weight_exponents(std::optional<double> eta_star);

void write_nodes_csv(std::ostream& os, const LiftNodes& nodes);
nlohmann::json nodes_to_json(const LiftNodes& nodes);
LiftNodes nodes_from_json(const nlohmann::json& j);

}  // namespace vctl
