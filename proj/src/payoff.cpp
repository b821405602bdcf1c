#include "vctl/payoff.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "vctl/errors.hpp"
#include "vctl/numerics.hpp"

namespace vctl {

namespace {
double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
}  // namespace

double Payoff::operator()(double y) const {
  const double z = y - center;
  switch (kind) {
    case Kind::constant:
      return amplitude;
    case Kind::linear:
      return amplitude * y + offset;
    case Kind::quadratic:
      return amplitude * z * z + offset;
    case Kind::tanh:
      return amplitude * std::tanh(z / width) + offset;
    case Kind::gaussian_bump:
      return amplitude * std::exp(-0.5 * z * z / (width * width)) + offset;
    case Kind::step:
      return (z >= 0.0 ? amplitude : 0.0) + offset;
    case Kind::call:
      return amplitude * std::max(z, 0.0) + offset;
  }
  return 0.0;
}

double Payoff::derivative(double y) const {
  const double z = y - center;
  switch (kind) {
    case Kind::constant:
    case Kind::step:
      return 0.0;
    case Kind::linear:
      return amplitude;
    case Kind::quadratic:
      return 2.0 * amplitude * z;
    case Kind::tanh: {
      const double c = std::cosh(z / width);
      return amplitude / (width * c * c);
    }
    case Kind::gaussian_bump:
      return -amplitude * z / (width * width) * std::exp(-0.5 * z * z / (width * width));
    case Kind::call:
      return z >= 0.0 ? amplitude : 0.0;
  }
  return 0.0;
}

bool Payoff::smooth() const { return kind != Kind::step && kind != Kind::call; }

bool Payoff::bounded() const {
  return kind == Kind::constant || kind == Kind::tanh || kind == Kind::gaussian_bump || kind == Kind::step ||
         (amplitude == 0.0);
}

double Payoff::lipschitz() const {
  switch (kind) {
    case Kind::constant:
      return 0.0;
    case Kind::linear:
    case Kind::call:
      return std::abs(amplitude);
    case Kind::tanh:
      return std::abs(amplitude) / width;
    case Kind::gaussian_bump:
      return std::abs(amplitude) / (width * std::sqrt(std::numbers::e));
    case Kind::quadratic:
    case Kind::step:
      return amplitude == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return std::numeric_limits<double>::infinity();
}

std::string Payoff::kind_name() const {
  switch (kind) {
    case Kind::constant: return "constant";
    case Kind::linear: return "linear";
    case Kind::quadratic: return "quadratic";
    case Kind::tanh: return "tanh";
    case Kind::gaussian_bump: return "gaussian_bump";
    case Kind::step: return "step";
    case Kind::call: return "call";
  }
  return "constant";
}

nlohmann::json Payoff::to_json() const {
  return {{"kind", kind_name()}, {"amplitude", amplitude}, {"center", center}, {"width", width}, {"offset", offset}};
}

Payoff Payoff::from_json(const nlohmann::json& j) {
  Payoff p;
  const std::string k = j.at("kind").get<std::string>();
  if (k == "constant") p.kind = Kind::constant;
  else if (k == "linear") p.kind = Kind::linear;
  else if (k == "quadratic") p.kind = Kind::quadratic;
  else if (k == "tanh") p.kind = Kind::tanh;
  else if (k == "gaussian_bump") p.kind = Kind::gaussian_bump;
  else if (k == "step") p.kind = Kind::step;
  else if (k == "call") p.kind = Kind::call;
  else throw PreconditionError("unknown payoff kind '" + k + "'");
  p.amplitude = j.value("amplitude", 0.0);
  p.center = j.value("center", 0.0);
  p.width = j.value("width", 1.0);
  p.offset = j.value("offset", 0.0);
  if (!(p.width > 0.0)) throw PreconditionError("payoff width must be > 0");
  return p;
}

Smoothed gaussian_smooth(const Payoff& phi, double variance, double y, int quad_order) {
  if (quad_order < 8) throw PreconditionError("gaussian_smooth: quad_order must be >= 8");
  if (variance < 0.0) throw DomainError("gaussian_smooth: variance must be >= 0");
  if (variance == 0.0) {
    const double h = 1e-6 * std::max(1.0, std::abs(y));
    return {phi(y), (phi(y + h) - phi(y - h)) / (2.0 * h)};
  }
  const double s = std::sqrt(variance);
  if (phi.kind == Payoff::Kind::step) {
    const double d = (y - phi.center) / s;
    return {phi.amplitude * norm_cdf(d) + phi.offset, phi.amplitude * norm_pdf(d) / s};
  }
  if (phi.kind == Payoff::Kind::call) {
    const double d = (y - phi.center) / s;
    return {phi.amplitude * ((y - phi.center) * norm_cdf(d) + s * norm_pdf(d)) + phi.offset, phi.amplitude * norm_cdf(d)};
  }
  if (phi.kind == Payoff::Kind::gaussian_bump) {
    const double w2 = phi.width * phi.width, tot = w2 + variance, z = y - phi.center;
    const double e = phi.amplitude * std::sqrt(w2 / tot) * std::exp(-0.5 * z * z / tot);
    return {e + phi.offset, -e * z / tot};
  }
  if (phi.kind == Payoff::Kind::tanh && s > 0.5 * phi.width) {
    // noise wider than the transition: Gauss-Hermite loses accuracy, use
    // panels in the standard normal variable sized to the transition
    static const numerics::QuadratureRule gl = numerics::gauss_legendre(8);
    constexpr double zmax = 10.0;
    const int panels = static_cast<int>(std::ceil(2.0 * zmax * s / phi.width)) * std::max(1, quad_order / 32);
    const double h = 2.0 * zmax / panels;
    double v = 0.0, w = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double a = -zmax + h * p;
      for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double z = a + 0.5 * h * (1.0 + gl.nodes[i]);
        const double wz = 0.5 * h * gl.weights[i] * norm_pdf(z);
        const double fz = phi(y + s * z);
        v += wz * fz;
        w += wz * fz * z;
      }
    }
    return {v, w / s};
  }
  const auto& gh = numerics::gauss_hermite_normal(quad_order);
  double v = 0.0, w = 0.0;
  for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
    const double fz = phi(y + s * gh.nodes[i]);
    v += gh.weights[i] * fz;
    w += gh.weights[i] * fz * gh.nodes[i];
  }
  return {v, w / s};
}

}  // namespace vctl
