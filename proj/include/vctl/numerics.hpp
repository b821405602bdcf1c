#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace vctl::numerics {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(int n);

// Gauss-Hermite rule for the standard normal law: sum w_i f(x_i) ~ E f(Z),
// Z ~ N(0,1). Nodes are symmetric and weights sum to one.
const QuadratureRule& gauss_hermite_normal(int n);

// Composite Gauss-Legendre on [a, b] split into `panels` equal pieces.
double integrate_gl(const std::function<double(double)>& f, double a, double b,
                    int panels = 1);

// Double-exponential quadrature on [a, b]; tolerates integrable endpoint
// singularities. Infinite b is allowed.
double integrate_de(const std::function<double(double)>& f, double a, double b,
                    double tol = 1e-13);

std::vector<double> geomspace(double lo, double hi, std::size_t n);
std::vector<double> linspace(double lo, double hi, std::size_t n);

// Uniform grid helper: cubic (4-point Lagrange) interpolation inside the grid,
// linear extrapolation with a second-order one-sided slope outside.
class UniformCubic {
 public:
  UniformCubic(double x0, double dx, std::span<const double> values);

  double operator()(double x) const;
  double x_min() const { return x0_; }
  double x_max() const { return x0_ + dx_ * static_cast<double>(values_.size() - 1); }

 private:
  double x0_;
  double dx_;
  std::span<const double> values_;
};

// Central differences in the interior, second-order one-sided at the ends.
std::vector<double> differentiate_uniform(std::span<const double> values, double dx);

// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

struct MeanStats {
  double mean = 0.0;
  double std_err = 0.0;
  double std_dev = 0.0;
};
MeanStats mean_stats(std::span<const double> samples);

}  // namespace vctl::numerics
