#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "vctl/kernel.hpp"
#include "vctl/lift.hpp"

namespace vctl {

// Scalar view of a lifted model: effective kernel plus control/noise gains.
struct ScalarSystem {
  Kernel kernel;
  double b;
  double g;
};

ScalarSystem scalar_system(const LiftedModel& model, KernelSource source, double horizon);

// g^2 int_0^t K^2
double gramian(const ScalarSystem& sys, double t);
double gramian(const LiftedModel& model, double t);

// K(t) b / sqrt(gramian(t))
double lambda_op(const ScalarSystem& sys, double t);
double lambda_op(const LiftedModel& model, double t);

struct VirtualControl {
  std::vector<double> times;   // cell edges on [0, t], ascending
  std::vector<double> widths;  // cell widths, computed without cancellation
  std::vector<double> values;  // piecewise constant control per cell
  double energy = 0.0;         // L2 norm on [0, t]
  double grading = 1.0;
};

// Least-norm v with int_0^t K(t-s) g v(s) ds = -K(t) b k, piecewise constant
// on a mesh graded towards s = t.
VirtualControl min_energy_control(const ScalarSystem& sys, double t, double k, int n_steps);
VirtualControl min_energy_control(const LiftedModel& model, double t, double k, int n_steps);

// sqrt(t) (K(t)/I_K(t)) |b/g| |k|
double constant_ansatz_energy(const ScalarSystem& sys, double t, double k);
double constant_ansatz_energy(const LiftedModel& model, double t, double k);

struct SmoothingProfile {
  std::vector<double> t;
  std::vector<double> gramian;
  std::vector<double> lambda_values;
  std::vector<double> lambda_sqrt_t;
  std::vector<double> ansatz_energy;  // for k = 1
  double kappa0 = 0.0;                // sup |Lambda(t)| t^{1/2} over the grid
  double gamma_exponent = 0.5;
};

SmoothingProfile smoothing_profile(const ScalarSystem& sys, std::span<const double> grid);
void write_profile_csv(std::ostream& os, const SmoothingProfile& p);

}  // namespace vctl
