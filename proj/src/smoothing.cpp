#include "vctl/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "vctl/errors.hpp"

namespace vctl {

ScalarSystem scalar_system(const LiftedModel& model, KernelSource source, double horizon) {
  return {model.effective_kernel(source, horizon), model.b(), model.g()};
}

namespace {
ScalarSystem exact_system(const LiftedModel& model, double t) {
  return scalar_system(model, KernelSource::exact, t);
}
}  // namespace

double gramian(const ScalarSystem& sys, double t) {
  if (!(t > 0.0)) throw DomainError("gramian: t must be > 0");
  return sys.g * sys.g * sys.kernel.square_integral(0.0, t);
}

double gramian(const LiftedModel& model, double t) { return gramian(exact_system(model, t), t); }

double lambda_op(const ScalarSystem& sys, double t) {
  const double q = gramian(sys, t);
  if (!(q > 0.0)) throw NumericError("lambda_op: gramian is not positive", "gramian_nonpositive");
  return sys.kernel.eval(t) * sys.b / std::sqrt(q);
}

double lambda_op(const LiftedModel& model, double t) { return lambda_op(exact_system(model, t), t); }

VirtualControl min_energy_control(const ScalarSystem& sys, double t, double k, int n_steps) {
  if (!(t > 0.0)) throw DomainError("min_energy_control: t must be > 0");
  if (n_steps < 1) throw PreconditionError("min_energy_control: n_steps must be >= 1");
  const auto n = static_cast<std::size_t>(n_steps);
  const double theta = sys.kernel.singularity_exponent();
  const double p = theta > 0.0 ? std::min(12.0, std::max(2.0, 2.0 / (1.0 - 2.0 * theta))) : 2.0;

  // u = t - s, graded towards u = 0
  std::vector<double> u(n + 1);
  for (std::size_t j = 0; j <= n; ++j) u[j] = t * std::pow(static_cast<double>(j) / static_cast<double>(n), p);
  u[n] = t;

  VirtualControl vc;
  vc.grading = p;
  vc.times.resize(n + 1);
  vc.widths.resize(n);
  vc.values.assign(n, 0.0);
  std::vector<double> a(n);
  double denom = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    // cell j in s is [t - u[n-j], t - u[n-j-1]]
    const double lo = u[n - j - 1], hi = u[n - j];
    vc.widths[j] = hi - lo;
    a[j] = sys.g * sys.kernel.integral(lo, hi);
    denom += a[j] * a[j] / vc.widths[j];
  }
  for (std::size_t j = 0; j <= n; ++j) vc.times[j] = t - u[n - j];
  vc.times[0] = 0.0;
  vc.times[n] = t;
  if (!(denom > 0.0) || !std::isfinite(denom))
    throw NumericError("min_energy_control: degenerate constraint", "constraint_norm=" + std::to_string(denom));

  const double target = -sys.kernel.eval(t) * sys.b * k;
  if (target == 0.0) return vc;
  for (std::size_t j = 0; j < n; ++j) vc.values[j] = target * (a[j] / vc.widths[j]) / denom;
  vc.energy = std::abs(target) / std::sqrt(denom);
  return vc;
}

VirtualControl min_energy_control(const LiftedModel& model, double t, double k, int n_steps) {
  return min_energy_control(exact_system(model, t), t, k, n_steps);
}

double constant_ansatz_energy(const ScalarSystem& sys, double t, double k) {
  if (!(t > 0.0)) throw DomainError("constant_ansatz_energy: t must be > 0");
  if (k == 0.0) return 0.0;
  return std::sqrt(t) * (sys.kernel.eval(t) / sys.kernel.primitive(t)) * std::abs(sys.b / sys.g) * std::abs(k);
}

double constant_ansatz_energy(const LiftedModel& model, double t, double k) {
  return constant_ansatz_energy(exact_system(model, t), t, k);
}

SmoothingProfile smoothing_profile(const ScalarSystem& sys, std::span<const double> grid) {
  SmoothingProfile p;
  for (double t : grid) {
    p.t.push_back(t);
    p.gramian.push_back(gramian(sys, t));
    const double lam = sys.kernel.eval(t) * sys.b / std::sqrt(p.gramian.back());
    p.lambda_values.push_back(lam);
    p.lambda_sqrt_t.push_back(lam * std::sqrt(t));
    p.ansatz_energy.push_back(constant_ansatz_energy(sys, t, 1.0));
    p.kappa0 = std::max(p.kappa0, std::abs(p.lambda_sqrt_t.back()));
  }
  return p;
}

void write_profile_csv(std::ostream& os, const SmoothingProfile& p) {
  const auto old = os.precision(17);
  os << "t,gramian,lambda,lambda_sqrt_t,ansatz_energy\n";
  for (std::size_t i = 0; i < p.t.size(); ++i)
    os << p.t[i] << ',' << p.gramian[i] << ',' << p.lambda_values[i] << ',' << p.lambda_sqrt_t[i] << ','
       << p.ansatz_energy[i] << '\n';
  os.precision(old);
}

}  // namespace vctl
