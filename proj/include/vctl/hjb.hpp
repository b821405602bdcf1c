#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vctl/hamiltonian.hpp"
#include "vctl/lift.hpp"
#include "vctl/payoff.hpp"
#include "vctl/smoothing.hpp"

namespace vctl {

enum class Execution { serial, parallel };

struct HjbGrids {
  int n_tau = 200;
  int n_y = 200;
  std::optional<double> y_half_width;  // auto when empty
  double y_center = 0.0;
  int quad_order = 32;
  double kappa = 6.0;                  // noise padding in standard deviations
  double picard_tol = 1e-12;
  int picard_max_iter = 50;
  Execution execution = Execution::parallel;
};

// Reduced value function f(tau, y) with tau = T - t, on tau_k = T (k/n)^2 and a
// uniform y grid.
struct ValueGrid {
  std::vector<double> tau;
  double y_min = 0.0;
  double dy = 0.0;
  std::size_t n_y = 0;
  std::vector<double> f;   // row-major, f[k * n_y + j]
  std::vector<double> df;
  double horizon = 0.0;
  Payoff terminal;
  double b = 1.0;
  double g = 1.0;
  int quad_order = 32;
  std::vector<double> gramian;  // g^2 int_0^{tau_k} K^2 per row
  std::optional<Kernel> kernel; // effective kernel used by the solver
  nlohmann::json metadata;      // provenance of the run (hamiltonian, grids, ...)

  double y(std::size_t j) const { return y_min + dy * static_cast<double>(j); }
  double y_max() const { return y(n_y - 1); }
  std::size_t n_tau() const { return tau.size(); }
  std::span<const double> f_row(std::size_t k) const { return {f.data() + k * n_y, n_y}; }
  std::span<const double> df_row(std::size_t k) const { return {df.data() + k * n_y, n_y}; }
  // cubic in y, linear in tau; below tau_1 the y derivative comes from the
  // smoothed terminal cost with variance g^2 int_0^tau K^2
  double f_at(double tau, double y) const;
  double df_at(double tau, double y) const;
};

// g^2 int_0^tau K(s + r)^2 dr
double sigma_profile(const ScalarSystem& sys, double s, double tau);
double sigma_profile(const LiftedModel& model, double s, double tau);

// Kernel of the row sweep. Rows < k of `R` are read-only; only row k is
// written. Both versions produce bit-identical output.
struct RowSweep {
  const ValueGrid* grid;
  const std::vector<double>* R;  // D(K b df)/K per row, row-major
  const std::vector<double>* weights;     // weight of rows 1..k-1 for this row
  const std::vector<double>* variances;   // smoothing variance of rows 1..k-1 for this row
  std::size_t k;
};
void sweep_row_serial(const RowSweep& s, std::span<double> out);
void sweep_row_parallel(const RowSweep& s, std::span<double> out);

ValueGrid solve_hjb(const ScalarSystem& sys, const Hamiltonian& ham, const Payoff& phi, double T,
                    const HjbGrids& grids);
ValueGrid solve_hjb(const LiftedModel& model, KernelSource source, const Hamiltonian& ham, const Payoff& phi,
                    double T, const HjbGrids& grids);

// Half-width of the automatic y grid
double auto_y_half_width(const ScalarSystem& sys, const Hamiltonian& ham, double T, double kappa);

struct ContractionReport {
  std::vector<double> gaps;
  std::vector<double> ratios;
  bool decreasing = true;
  bool flagged = false;
};

// Global Picard iteration on the whole (tau, y) grid started from the
// smoothed terminal cost. Gap n is sup|f_{n+1} - f_n| + sup tau^{1/2} |K b (df_{n+1} - df_n)|.
ContractionReport contraction_diagnostic(const ScalarSystem& sys, const Hamiltonian& ham, const Payoff& phi, double T,
                                         const HjbGrids& grids, int iterations = 8);

// |f - rhs| at the given (row, y) probes, with the right-hand side recomputed
// by a finer Gauss-Hermite rule and a sub-divided time quadrature.
double mild_residual(const ValueGrid& vg, const ScalarSystem& sys, const Hamiltonian& ham,
                     std::span<const std::size_t> rows, std::span<const double> ys, int fine_order = 64);

// K(tau) b df(tau, Gamma Sbar(tau) x) with tau = T - t
double gradient_B(const ValueGrid& vg, const LiftedModel& model, double t, std::span<const double> x);
// same, with the observation row and kernel factor supplied by the caller
double gradient_B(const ValueGrid& vg, double tau, double y_obs, double kernel_factor, double b);

void write_value_csv(std::ostream& os, const ValueGrid& vg);
void write_value_snapshot(std::ostream& os, const ValueGrid& vg);
ValueGrid read_value_snapshot(std::istream& is);

}  // namespace vctl
