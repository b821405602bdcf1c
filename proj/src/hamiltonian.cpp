#include "vctl/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "vctl/errors.hpp"

namespace vctl {

Hamiltonian::Hamiltonian(double u_min, double u_max, RunningCost cost)
    : u_min_(u_min), u_max_(u_max), cost_(std::move(cost)) {
  if (!(u_min <= u_max) || !std::isfinite(u_min) || !std::isfinite(u_max))
    throw PreconditionError("Hamiltonian: need finite u_min <= u_max");
  if (cost_.kind != RunningCost::Kind::custom && !(cost_.weight >= 0.0))
    throw PreconditionError("Hamiltonian: cost weight must be >= 0");
  if (cost_.kind == RunningCost::Kind::quadratic && cost_.weight == 0.0 && !singleton())
    throw PreconditionError("Hamiltonian: quadratic cost needs a positive weight");
  if (cost_.kind == RunningCost::Kind::custom && !cost_.custom)
    throw PreconditionError("Hamiltonian: custom cost needs a callable");
}

double Hamiltonian::cost(double u) const {
  switch (cost_.kind) {
    case RunningCost::Kind::quadratic:
      return 0.5 * cost_.weight * u * u;
    case RunningCost::Kind::absolute:
      return cost_.weight * std::abs(u);
    case RunningCost::Kind::custom:
      return cost_.custom(u);
  }
  return 0.0;
}

Hamiltonian::Eval Hamiltonian::eval(double p) const {
  if (singleton()) return {p * u_min_ + cost(u_min_), u_min_};
  if (cost_.kind == RunningCost::Kind::quadratic) {
    const double u = std::clamp(-p / cost_.weight, u_min_, u_max_);
    return {p * u + 0.5 * cost_.weight * u * u, u};
  }
  // candidate comparison; ties go to the smallest |u|
  std::vector<double> cands{u_min_, u_max_};
  if (contains(0.0)) cands.push_back(0.0);
  if (cost_.kind == RunningCost::Kind::custom) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = u_min_, b = u_max_;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = h_cv(p, c), fd = h_cv(p, d);
    for (int it = 0; it < 200 && (b - a) > 1e-14 * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
      if (fc <= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - gr * (b - a);
        fc = h_cv(p, c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + gr * (b - a);
        fd = h_cv(p, d);
      }
    }
    cands.push_back(0.5 * (a + b));
  }
  Eval best{std::numeric_limits<double>::infinity(), 0.0};
  for (double u : cands) {
    const double h = h_cv(p, u);
    if (h < best.h_min || (h == best.h_min && std::abs(u) < std::abs(best.u_star))) best = {h, u};
  }
  return best;
}

double Hamiltonian::lipschitz_L() const { return std::max(std::abs(u_min_), std::abs(u_max_)); }

double Hamiltonian::lipschitz_Lgamma() const {
  if (singleton()) return 0.0;
  switch (cost_.kind) {
    case RunningCost::Kind::quadratic:
      return 1.0 / cost_.weight;
    case RunningCost::Kind::absolute:
      return std::numeric_limits<double>::infinity();
    case RunningCost::Kind::custom:
      return cost_.custom_lipschitz_gamma > 0.0 ? cost_.custom_lipschitz_gamma
                                                : std::numeric_limits<double>::infinity();
  }
  return std::numeric_limits<double>::infinity();
}

nlohmann::json Hamiltonian::to_json() const {
  const char* kind = cost_.kind == RunningCost::Kind::quadratic  ? "quadratic"
                     : cost_.kind == RunningCost::Kind::absolute ? "absolute"
                                                                 : "custom";
  return {{"u_min", u_min_}, {"u_max", u_max_}, {"cost", kind}, {"weight", cost_.weight}};
}

}  // namespace vctl
