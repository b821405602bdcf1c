#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

namespace vctl {

struct AtomMeasure {
  std::vector<double> locations;  // strictly positive, ascending
  std::vector<double> masses;     // positive
};

// Density on [lo, hi). `density_at_offset(u)` is the density at x = lo + u,
// written in the offset so that the endpoint singularity u^{-exponent} keeps
// full relative precision.
struct DensityMeasure {
  std::function<double(double)> density_at_offset;
  double lo = 0.0;
  double hi = 0.0;  // may be +inf
  double singularity_exponent = 0.0;
};

using BernsteinMeasure = std::variant<AtomMeasure, DensityMeasure>;

class Kernel;

struct RiemannLiouville {
  double alpha;
  double beta;
};
struct Logarithmic {};
struct FiniteSpectrum {
  double c0;
  std::vector<double> lambda;  // ascending
  std::vector<double> weight;
};
struct Shifted {
  std::shared_ptr<const Kernel> base;
  double epsilon;
};
// Log-log interpolation between samples; power law below the first sample,
// constant beyond the last one.
struct Sampled {
  std::vector<double> t;
  std::vector<double> k;
  std::vector<double> slope;   // log-log exponent of each segment, slope[0] also used below t[0]
  std::vector<double> cum_k;   // int_0^{t_i} K
  std::vector<double> cum_k2;  // int_0^{t_i} K^2
};

class Kernel {
 public:
  using Family = std::variant<RiemannLiouville, Logarithmic, FiniteSpectrum, Shifted, Sampled>;

  static Kernel riemann_liouville(double alpha, double beta = 0.0);
  static Kernel logarithmic();
  // atoms given as (lambda, weight) pairs
  static Kernel finite_spectrum(double c0, std::vector<std::pair<double, double>> atoms);
  static Kernel constant(double c0) { return finite_spectrum(c0, {}); }
  static Kernel shifted(const Kernel& base, double epsilon);
  static Kernel sampled(std::vector<double> t, std::vector<double> k);

  double eval(double t) const;
  // I_K(t) = int_0^t K
  double primitive(double t) const;
  double integral(double a, double b) const;
  // t K(t) / I_K(t)
  double growth_ratio(double t) const;
  // int_0^h s K(s) ds
  double first_moment(double h) const;
  // int_a^b K(s)^2 ds
  double square_integral(double a, double b) const;

  double k_infinity() const;
  BernsteinMeasure measure() const;
  // nullopt for sampled kernels; -inf for atoms-only or exponentially damped measures
  std::optional<double> eta_star() const;
  // theta with K(t) ~ t^{-theta} as t -> 0 (0 for bounded or log-singular kernels)
  double singularity_exponent() const;
  bool singular_at_zero() const;
  // int_0^inf e^{-lambda t} K(t) dt
  double laplace_transform(double lambda) const;
  // K(infinity) + int e^{-xt} mu(dx) by quadrature of the measure
  double eval_from_measure(double t) const;

  const Family& family() const { return family_; }
  std::string family_name() const;

  nlohmann::json to_json() const;
  static Kernel from_json(const nlohmann::json& j);

 private:
  explicit Kernel(Family f) : family_(std::move(f)) {}
  Family family_;
};

void write_samples_csv(std::ostream& os, std::span<const double> t, std::span<const double> k);
Kernel read_samples_csv(std::istream& is);

struct ResolventResult {
  std::vector<double> t;
  std::vector<double> values;
  std::optional<std::vector<double>> exact;  // matrix-exponential values, finite spectrum only
  std::optional<Kernel> kernel;              // sampled on `t` when the table admits it
};

// Solves R = K + c (K * R) by product integration on a uniform grid of
// `n_steps` cells over [0, max(grid)], then reports R on `grid`.
ResolventResult resolvent_kernel(const Kernel& k, double c, std::span<const double> grid,
                                 int n_steps = 4000);

// w^T exp(t M) 1 with M = diag(-x) + c 1 w^T, for K(t) = sum w_i e^{-x_i t}
std::vector<double> resolvent_matrix_exponential(std::span<const double> x, std::span<const double> w,
                                                 double c, std::span<const double> grid);

// Throws BlowUpError if 1 - c Khat(lambda) <= 0 on a geometric lambda grid.
void check_resolvent_admissible(const Kernel& k, double c);

struct CmReport {
  bool nonnegative = true;
  bool monotone = true;
  bool alternating = true;
  double max_violation = 0.0;
  bool passed(double tol) const { return max_violation <= tol; }
};

// Sign checks of divided differences up to `order`; violations are measured
// relative to the magnitude of the terms in each divided difference.
CmReport cm_diagnostic(std::span<const double> t, std::span<const double> k, int order,
                       double tol = 1e-10);

}  // namespace vctl
