#include "vctl/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "vctl/errors.hpp"

namespace vctl::numerics {

namespace {

// Golub-Welsch on a symmetric tridiagonal Jacobi matrix with zero diagonal.
QuadratureRule golub_welsch(const Eigen::VectorXd& offdiag, double mu0) {
  const auto n = offdiag.size() + 1;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    J(i, i + 1) = offdiag(i);
    J(i + 1, i) = offdiag(i);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  QuadratureRule r;
  r.nodes.resize(static_cast<std::size_t>(n));
  r.weights.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    r.nodes[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    r.weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0;
  }
  // exact symmetry helps cancellation in odd moments
  const std::size_t m = r.nodes.size();
  for (std::size_t i = 0; i < m / 2; ++i) {
    const double x = 0.5 * (r.nodes[m - 1 - i] - r.nodes[i]);
    const double w = 0.5 * (r.weights[m - 1 - i] + r.weights[i]);
    r.nodes[i] = -x;
    r.nodes[m - 1 - i] = x;
    r.weights[i] = w;
    r.weights[m - 1 - i] = w;
  }
  if (m % 2 == 1) r.nodes[m / 2] = 0.0;
  double total = 0.0;
  for (double w : r.weights) total += w;
  for (double& w : r.weights) w *= mu0 / total;
  return r;
}

}  // namespace

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw PreconditionError("gauss_legendre: n must be >= 1");
  if (n == 1) return {{0.0}, {2.0}};
  Eigen::VectorXd off(n - 1);
  for (int k = 1; k < n; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  return golub_welsch(off, 2.0);
}

const QuadratureRule& gauss_hermite_normal(int n) {
  if (n < 1) throw PreconditionError("gauss_hermite_normal: n must be >= 1");
  static std::mutex mtx;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  QuadratureRule r;
  if (n == 1) {
    r = {{0.0}, {1.0}};
  } else {
    Eigen::VectorXd off(n - 1);
    for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
    r = golub_welsch(off, 1.0);
  }
  return cache.emplace(n, std::move(r)).first->second;
}

double integrate_gl(const std::function<double(double)>& f, double a, double b, int panels) {
  static const QuadratureRule rule = gauss_legendre(20);
  if (panels < 1) panels = 1;
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    const double mid = lo + 0.5 * h;
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * f(mid + 0.5 * h * rule.nodes[i]);
    total += 0.5 * h * s;
  }
  return total;
}

double integrate_de(const std::function<double(double)>& f, double a, double b, double tol) {
  if (b == a) return 0.0;
  double err = 0.0, l1 = 0.0;
  double value = 0.0;
  if (std::isinf(b)) {
    boost::math::quadrature::exp_sinh<double> q;
    value = q.integrate([&](double x) { return f(x); }, a, b, tol, &err, &l1);
  } else {
    boost::math::quadrature::tanh_sinh<double> q;
    value = q.integrate([&](double x) { return f(x); }, a, b, tol, &err, &l1);
  }
  if (!std::isfinite(value))
    throw NumericError("double-exponential quadrature returned a non-finite value",
                       "quadrature_nonfinite");
  if (err > 1e-6 * std::max(1.0, l1))
    throw NumericError("double-exponential quadrature did not converge",
                       "quadrature_error=" + std::to_string(err));
  return value;
}

std::vector<double> geomspace(double lo, double hi, std::size_t n) {
  if (n < 2 || lo <= 0.0 || hi <= lo) throw PreconditionError("geomspace: need n>=2 and 0<lo<hi");
  std::vector<double> out(n);
  const double r = std::log(hi / lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo * std::exp(r * static_cast<double>(i));
  out.back() = hi;
  return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n < 2) throw PreconditionError("linspace: need n>=2");
  std::vector<double> out(n);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + h * static_cast<double>(i);
  out.back() = hi;
  return out;
}

UniformCubic::UniformCubic(double x0, double dx, std::span<const double> values)
    : x0_(x0), dx_(dx), values_(values) {
  if (values.size() < 4) throw PreconditionError("UniformCubic: need at least 4 values");
}

double UniformCubic::operator()(double x) const {
  const std::size_t n = values_.size();
  const double s = (x - x0_) / dx_;
  const double last = static_cast<double>(n - 1);
  if (s < 0.0) {
    const double slope = (-3.0 * values_[0] + 4.0 * values_[1] - values_[2]) / (2.0 * dx_);
    return values_[0] + slope * (x - x0_);
  }
  if (s > last) {
    const double slope = (3.0 * values_[n - 1] - 4.0 * values_[n - 2] + values_[n - 3]) / (2.0 * dx_);
    return values_[n - 1] + slope * (x - x_max());
  }
  auto i = static_cast<std::ptrdiff_t>(std::floor(s)) - 1;
  i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 4);
  const double u = s - static_cast<double>(i);
  const double* v = values_.data() + i;
  // Lagrange basis on nodes 0,1,2,3
  const double l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
  const double l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
  const double l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
  const double l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
  return l0 * v[0] + l1 * v[1] + l2 * v[2] + l3 * v[3];
}

std::vector<double> differentiate_uniform(std::span<const double> v, double dx) {
  const std::size_t n = v.size();
  if (n < 3) throw PreconditionError("differentiate_uniform: need at least 3 values");
  std::vector<double> d(n);
  d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx);
  d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dx);
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (v[i + 1] - v[i - 1]) / (2.0 * dx);
  return d;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("loglog_slope: need matching sizes >= 2");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0.0 || y[i] <= 0.0) throw DomainError("loglog_slope: nonpositive sample");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

MeanStats mean_stats(std::span<const double> s) {
  if (s.empty()) throw PreconditionError("mean_stats: empty sample");
  MeanStats out;
  double sum = 0.0;
  for (double v : s) sum += v;
  out.mean = sum / static_cast<double>(s.size());
  if (s.size() > 1) {
    double ss = 0.0;
    for (double v : s) ss += (v - out.mean) * (v - out.mean);
    out.std_dev = std::sqrt(ss / static_cast<double>(s.size() - 1));
    out.std_err = out.std_dev / std::sqrt(static_cast<double>(s.size()));
  }
  return out;
}

}  // namespace vctl::numerics
