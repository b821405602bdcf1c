#pragma once

#include <functional>
#include <string>

#include "json.hpp"

namespace vctl {

struct RunningCost {
  enum class Kind { quadratic, absolute, custom };
  Kind kind = Kind::quadratic;
  double weight = 1.0;                  // w u^2 / 2 or w |u|
  std::function<double(double)> custom;  // convex l1 for Kind::custom
  double custom_lipschitz_gamma = 0.0;   // user-declared, 0 when unknown

  static RunningCost quadratic(double w = 1.0) { return {Kind::quadratic, w, {}, 0.0}; }
  static RunningCost absolute(double w = 1.0) { return {Kind::absolute, w, {}, 0.0}; }
  static RunningCost from(std::function<double(double)> f) { return {Kind::custom, 0.0, std::move(f), 0.0}; }
};

// Control set U = [u_min, u_max] and running cost l1.
class Hamiltonian {
 public:
  Hamiltonian(double u_min, double u_max, RunningCost cost = RunningCost::quadratic());

  struct Eval {
    double h_min;
    double u_star;
  };

  double cost(double u) const;
  // inf over U of p u + l1(u), with the smallest-magnitude minimizer
  Eval eval(double p) const;
  double h_min(double p) const { return eval(p).h_min; }
  double select(double p) const { return eval(p).u_star; }
  double h_cv(double p, double u) const { return p * u + cost(u); }

  double u_min() const { return u_min_; }
  double u_max() const { return u_max_; }
  bool singleton() const { return u_min_ == u_max_; }
  bool contains(double u) const { return u >= u_min_ && u <= u_max_; }
  // Lipschitz constants of h_min and of the selection (inf if discontinuous)
  double lipschitz_L() const;
  double lipschitz_Lgamma() const;
  const RunningCost& running_cost() const { return cost_; }

  nlohmann::json to_json() const;

 private:
  double u_min_;
  double u_max_;
  RunningCost cost_;
};

}  // namespace vctl
