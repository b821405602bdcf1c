#pragma once

#include <string>

#include "json.hpp"

namespace vctl {

// Scalar terminal cost phi_bar(y).
//   constant      amplitude
//   linear        amplitude * y + offset
//   quadratic     amplitude * (y - center)^2 + offset
//   tanh          amplitude * tanh((y - center) / width) + offset
//   gaussian_bump amplitude * exp(-(y - center)^2 / (2 width^2)) + offset
//   step          amplitude * 1{y >= center} + offset
//   call          amplitude * max(y - center, 0) + offset
struct Payoff {
  enum class Kind { constant, linear, quadratic, tanh, gaussian_bump, step, call };
  Kind kind = Kind::constant;
  double amplitude = 0.0;
  double center = 0.0;
  double width = 1.0;
  double offset = 0.0;

  static Payoff constant(double c) { return {Kind::constant, c, 0.0, 1.0, 0.0}; }
  static Payoff linear(double a, double offset = 0.0) { return {Kind::linear, a, 0.0, 1.0, offset}; }
  static Payoff quadratic(double a, double center = 0.0) { return {Kind::quadratic, a, center, 1.0, 0.0}; }
  static Payoff tanh(double a, double center = 0.0, double width = 1.0) { return {Kind::tanh, a, center, width, 0.0}; }
  static Payoff gaussian_bump(double a, double center = 0.0, double width = 1.0) {
    return {Kind::gaussian_bump, a, center, width, 0.0};
  }
  static Payoff step(double a, double center = 0.0) { return {Kind::step, a, center, 1.0, 0.0}; }
  static Payoff call(double a, double strike = 0.0) { return {Kind::call, a, strike, 1.0, 0.0}; }

  double operator()(double y) const;
  // classical derivative; the right derivative at kinks, 0 away from a step
  double derivative(double y) const;
  bool smooth() const;
  bool bounded() const;
  // inf for non-Lipschitz payoffs
  double lipschitz() const;

  std::string kind_name() const;
  nlohmann::json to_json() const;
  static Payoff from_json(const nlohmann::json& j);
};

struct Smoothed {
  double value;
  double derivative;
};

// E phi(y + xi) and the weighted derivative E[phi(y + xi) xi] / variance,
// xi ~ N(0, variance). Gauss-Hermite for smooth payoffs; the step and call
// payoffs use their closed Gaussian integrals. variance = 0 returns phi(y)
// and a central difference.
Smoothed gaussian_smooth(const Payoff& phi, double variance, double y, int quad_order = 32);

}  // namespace vctl
