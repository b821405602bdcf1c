#include "vctl/lift.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/expint.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <unsupported/Eigen/MatrixFunctions>

#include "vctl/errors.hpp"
#include "vctl/numerics.hpp"

namespace vctl {

namespace {

// Ein(x) = int_0^x (1 - e^{-s}) / s ds
double ein(double x) {
  if (x <= 0.0) return 0.0;
  if (x < 1.0) {
    double term = x, s = x;
    for (int k = 2; k < 40; ++k) {
      term *= -x / k;
      s += term / k;
      if (std::abs(term) < 1e-18) break;
    }
    return s;
  }
  return std::numbers::egamma + std::log(x) + boost::math::expint(1, x);
}

struct MassMoments {
  double mass;
  double first;
};

// mass and first moment of mu over [a, b], a >= support start
MassMoments panel_moments(const Kernel& k, const DensityMeasure& d, double a, double b) {
  if (const auto* rl = std::get_if<RiemannLiouville>(&k.family())) {
    const double al = rl->alpha;
    const double norm = 1.0 / (std::tgamma(1.0 - al) * std::tgamma(al));
    const double ua = a - rl->beta, ub = b - rl->beta;
    const double m0 = norm * (std::pow(ub, 1.0 - al) - std::pow(ua, 1.0 - al)) / (1.0 - al);
    const double m1 = rl->beta * m0 + norm * (std::pow(ub, 2.0 - al) - std::pow(ua, 2.0 - al)) / (2.0 - al);
    return {m0, m1};
  }
  if (std::holds_alternative<Logarithmic>(k.family())) {
    const double m0 = ein(b) - ein(a);
    const double m1 = (b - a) + std::exp(-b) - std::exp(-a);
    return {m0, m1};
  }
  const double lo = d.lo;
  const double m0 = numerics::integrate_de(d.density_at_offset, a - lo, b - lo);
  const double m1 = numerics::integrate_de([&](double u) { return (lo + u) * d.density_at_offset(u); }, a - lo, b - lo);
  return {m0, m1};
}

double certify(const LiftNodes& nodes, const Kernel& k) {
  double worst = 0.0;
  for (double t : numerics::geomspace(nodes.t_min, nodes.t_max, 400)) {
    const double ref = k.eval(t);
    worst = std::max(worst, std::abs(reconstruct_kernel(nodes, t) - ref) / ref);
  }
  return worst;
}

}  // namespace

Kernel finite_spectrum_resolvent(std::span<const double> x, std::span<const double> w, double c) {
  if (x.size() != w.size()) throw PreconditionError("finite_spectrum_resolvent: size mismatch");
  std::vector<double> xs, ws;
  double c0 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (w[i] < 0.0 || x[i] < 0.0) throw PreconditionError("finite_spectrum_resolvent: need x >= 0 and w >= 0");
    if (w[i] == 0.0) continue;
    xs.push_back(x[i]);
    ws.push_back(w[i]);
  }
  if (c == 0.0) {
    std::vector<std::pair<double, double>> atoms;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i] == 0.0) c0 += ws[i];
      else atoms.emplace_back(xs[i], ws[i]);
    }
    return Kernel::finite_spectrum(c0, std::move(atoms));
  }
  // w^T exp(t(diag(-x) + c 1 w^T)) 1 equals s^T exp(t S) s with the symmetric
  // S = diag(-x) + c s s^T, s = sqrt(w); expand in eigenpairs of S
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::VectorXd sq(n);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sq(i) = std::sqrt(ws[static_cast<std::size_t>(i)]);
    S(i, i) = -xs[static_cast<std::size_t>(i)];
  }
  S += c * sq * sq.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  std::vector<std::pair<double, double>> atoms;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double rate = -es.eigenvalues()(k);
    const double proj = es.eigenvectors().col(k).dot(sq);
    const double weight = proj * proj;
    if (weight == 0.0) continue;
    if (!(rate > 0.0)) {
      if (std::abs(rate) <= 1e-14 * std::max(1.0, xs.back()) && c < 0.0) {
        c0 += weight;
        continue;
      }
      throw BlowUpError("finite_spectrum_resolvent: resolvent has a non-decaying mode",
                        "rate=" + std::to_string(rate));
    }
    if (!atoms.empty() && std::abs(atoms.back().first - rate) <= 1e-14 * rate) atoms.back().second += weight;
    else atoms.emplace_back(rate, weight);
  }
  return Kernel::finite_spectrum(c0, std::move(atoms));
}

LiftNodes make_nodes(std::vector<double> x, std::vector<double> m, std::vector<double> xi) {
  if (x.empty() || x.size() != m.size() || x.size() != xi.size())
    throw PreconditionError("make_nodes: x, m, xi must be non-empty with equal lengths");
  if (x[0] != 0.0 || m[0] != 1.0) throw PreconditionError("make_nodes: entry 0 must be the delta_0 atom (x=0, m=1)");
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) throw PreconditionError("make_nodes: locations must increase strictly");
    if (!(m[i] > 0.0)) throw PreconditionError("make_nodes: masses must be positive");
  }
  LiftNodes n;
  n.x = std::move(x);
  n.m = std::move(m);
  n.xi = std::move(xi);
  return n;
}

LiftNodes discretize_measure(const Kernel& k, int n_nodes, double t_min, double t_max, LiftScheme scheme,
                             double tolerance) {
  if (!(t_min > 0.0) || !(t_max > t_min)) throw PreconditionError("discretize_measure: need 0 < t_min < t_max");
  if (std::holds_alternative<Sampled>(k.family()))
    throw PreconditionError("discretize_measure: sampled kernels carry no Bernstein measure");

  LiftNodes out;
  out.t_min = t_min;
  out.t_max = t_max;
  out.tolerance = tolerance;
  out.x = {0.0};
  out.m = {1.0};
  out.xi = {k.k_infinity()};

  const BernsteinMeasure mu = k.measure();
  if (const auto* atoms = std::get_if<AtomMeasure>(&mu)) {
    for (std::size_t i = 0; i < atoms->locations.size(); ++i) {
      out.x.push_back(atoms->locations[i]);
      out.m.push_back(atoms->masses[i]);
      out.xi.push_back(1.0);
    }
    out.certified_error = certify(out, k);
    out.flagged = out.certified_error > tolerance;
    return out;
  }
  if (scheme == LiftScheme::atoms_exact)
    throw PreconditionError("discretize_measure: atoms_exact needs an atomic measure");
  if (n_nodes < 3) throw PreconditionError("discretize_measure: need n_nodes >= 3 for a density measure");

  // panels are geometric in the offset u = x - lo from the support start
  const auto& d = std::get<DensityMeasure>(mu);
  const double lo = d.lo;
  const double u_lo = 1e-2 / t_max;
  double u_hi = 1e2 / t_min;
  if (const auto* sh = std::get_if<Shifted>(&k.family())) u_hi = std::min(u_hi, 60.0 / sh->epsilon);
  u_hi = std::min(u_hi, d.hi - lo);
  if (!(u_hi > u_lo)) throw PreconditionError("discretize_measure: empty panel range");

  const auto lump = panel_moments(k, d, lo, lo + u_lo);
  out.x.push_back(lump.first / lump.mass);
  out.m.push_back(lump.mass);
  out.xi.push_back(1.0);
  const int remaining = n_nodes - 1;

  const int panels = remaining / 2;
  const double la = std::log(u_lo), lb = std::log(u_hi);
  const double w = (lb - la) / panels;
  for (int p = 0; p < panels; ++p) {
    const int q = (p == panels - 1 && remaining % 2 == 1) ? 3 : 2;
    const auto rule = numerics::gauss_legendre(q);
    const double v0 = la + p * w;
    const double pa = std::exp(v0), pb = (p == panels - 1) ? u_hi : std::exp(v0 + w);
    const double exact = panel_moments(k, d, lo + pa, lo + pb).mass;
    std::vector<double> pu(static_cast<std::size_t>(q)), pm(static_cast<std::size_t>(q));
    double raw = 0.0;
    for (std::size_t i = 0; i < pu.size(); ++i) {
      pu[i] = std::exp(v0 + 0.5 * w * (1.0 + rule.nodes[i]));
      pm[i] = 0.5 * w * rule.weights[i] * pu[i] * d.density_at_offset(pu[i]);
      raw += pm[i];
    }
    for (std::size_t i = 0; i < pu.size(); ++i) {
      out.x.push_back(lo + pu[i]);
      out.m.push_back(pm[i] * exact / raw);
      out.xi.push_back(1.0);
    }
  }
  out.certified_error = certify(out, k);
  out.flagged = out.certified_error > tolerance;
  return out;
}

double reconstruct_kernel(const LiftNodes& nodes, double t) {
  double s = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) s += nodes.m[i] * (nodes.xi[i] * std::exp(-t * nodes.x[i]));
  return s;
}

LiftedState semigroup_apply(const LiftNodes& nodes, double t, std::span<const double> state) {
  if (state.size() != nodes.size()) throw PreconditionError("semigroup_apply: state length does not match nodes");
  LiftedState out(state.begin(), state.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= std::exp(-t * nodes.x[i]);
  return out;
}

double gamma_observe(const LiftNodes& nodes, std::span<const double> state) {
  if (state.size() != nodes.size()) throw PreconditionError("gamma_observe: state length does not match nodes");
  double s = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) s += nodes.m[i] * state[i];
  return s;
}

double weighted_norm(const LiftNodes& nodes, std::span<const double> state, double eta) {
  if (state.size() != nodes.size()) throw PreconditionError("weighted_norm: state length does not match nodes");
  double s = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) s += nodes.m[i] * std::pow(1.0 + nodes.x[i], eta) * state[i] * state[i];
  return std::sqrt(s);
}

double analytic_smoothing_constant(const LiftNodes& nodes, double t, double eta, double eta_prime) {
  if (!(t > 0.0)) throw DomainError("analytic_smoothing_constant: t must be > 0");
  if (!(eta_prime < eta)) throw PreconditionError("analytic_smoothing_constant: need eta_prime < eta");
  const double half = 0.5 * (eta - eta_prime);
  double best = 0.0;
  for (double x : nodes.x) best = std::max(best, x * std::exp(-t * x) * std::pow(1.0 + x, half));
  return best;
}

LiftedState lift_initial_curve(const LiftNodes& nodes, const InitialCurve& spec) {
  LiftedState s(nodes.size(), 0.0);
  switch (spec.kind) {
    case InitialCurve::Kind::constant:
      s[0] = spec.value;
      break;
    case InitialCurve::Kind::kernel_shaped:
      for (std::size_t i = 0; i < s.size(); ++i) s[i] = spec.value * nodes.xi[i];
      break;
    case InitialCurve::Kind::explicit_vector:
      if (spec.vector.size() != nodes.size())
        throw PreconditionError("lift_initial_curve: explicit vector length does not match nodes");
      s = spec.vector;
      break;
  }
  return s;
}

std::pair<double, double> default_weight_exponents(std::optional<double> eta_star) {
  if (!eta_star || std::isinf(*eta_star)) return {0.0, -1.0};
  const double es = *eta_star;
  double eta = 0.5 * (es + 1.0);
  eta = std::clamp(eta, std::nextafter(es, 1.0), std::nextafter(1.0, es));
  return {eta, es - 0.5};
}

LiftedModel::LiftedModel(LiftNodes nodes, Kernel kernel, Coefficients coef, std::optional<double> eta,
                         std::optional<double> eta_prime)
    : nodes_(std::move(nodes)), kernel_(std::move(kernel)), coef_(coef) {
  if (coef_.b == 0.0) throw PreconditionError("LiftedModel: b must be nonzero");
  if (coef_.g == 0.0) throw PreconditionError("LiftedModel: g must be nonzero");
  if (nodes_.size() == 0 || nodes_.x[0] != 0.0) throw PreconditionError("LiftedModel: nodes must start with delta_0");
  const auto es = kernel_.eta_star();
  const auto def = default_weight_exponents(es);
  eta_ = eta.value_or(def.first);
  eta_prime_ = eta_prime.value_or(def.second);
  if (!(eta_ < 1.0)) throw PreconditionError("LiftedModel: eta must be < 1");
  if (es && !std::isinf(*es)) {
    if (!(eta_ > *es)) throw PreconditionError("LiftedModel: eta must exceed eta_star");
    if (!(eta_prime_ < *es)) throw PreconditionError("LiftedModel: eta_prime must be below eta_star");
  }
  if (!(eta_prime_ < eta_)) throw PreconditionError("LiftedModel: eta_prime must be below eta");
}

std::vector<double> LiftedModel::observation_row(double tau) const {
  const std::size_t n = nodes_.size();
  std::vector<double> r(n);
  if (coef_.c == 0.0) {
    for (std::size_t i = 0; i < n; ++i) r[i] = nodes_.m[i] * std::exp(-tau * nodes_.x[i]);
    return r;
  }
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
  Eigen::VectorXd m(N), xi(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    A(i, i) = -nodes_.x[static_cast<std::size_t>(i)];
    m(i) = nodes_.m[static_cast<std::size_t>(i)];
    xi(i) = nodes_.xi[static_cast<std::size_t>(i)];
  }
  A += coef_.c * xi * m.transpose();
  const Eigen::RowVectorXd row = m.transpose() * (tau * A).exp();
  for (Eigen::Index i = 0; i < N; ++i) r[static_cast<std::size_t>(i)] = row(i);
  return r;
}

double LiftedModel::lift_kernel(double tau) const {
  const auto r = observation_row(tau);
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += r[i] * nodes_.xi[i];
  return s;
}

double LiftedModel::trace_q(double t) const {
  if (coef_.c != 0.0) throw PreconditionError("trace_q: only available for c = 0");
  double s = 0.0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const double x = nodes_.x[i];
    const double integral = x > 0.0 ? -std::expm1(-2.0 * x * t) / (2.0 * x) : t;
    s += nodes_.m[i] * std::pow(1.0 + x, eta_prime_) * nodes_.xi[i] * nodes_.xi[i] * integral;
  }
  return coef_.g * coef_.g * s;
}

Kernel LiftedModel::effective_kernel(KernelSource source, double horizon) const {
  if (!(horizon > 0.0)) throw PreconditionError("effective_kernel: horizon must be > 0");
  if (source == KernelSource::lift) {
    std::vector<double> x, w;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      x.push_back(nodes_.x[i]);
      w.push_back(nodes_.m[i] * nodes_.xi[i]);
    }
    return finite_spectrum_resolvent(x, w, coef_.c);
  }
  if (coef_.c == 0.0) return kernel_;
  if (const auto* fs = std::get_if<FiniteSpectrum>(&kernel_.family())) {
    std::vector<double> x{0.0}, w{fs->c0};
    x.insert(x.end(), fs->lambda.begin(), fs->lambda.end());
    w.insert(w.end(), fs->weight.begin(), fs->weight.end());
    return finite_spectrum_resolvent(x, w, coef_.c);
  }
  constexpr int n_steps = 4000;
  const double h = horizon / n_steps;
  std::vector<double> t = numerics::geomspace(h * 1e-5, h, 61);
  t.pop_back();
  for (int n = 1; n <= n_steps; ++n)
    if (n < 40 || n % 10 == 0) t.push_back(h * n);
  t.back() = horizon;
  auto res = resolvent_kernel(kernel_, coef_.c, t, n_steps);
  if (!res.kernel) throw NumericError("effective_kernel: resolvent table is not a valid kernel", "resolvent_table");
  return *res.kernel;
}

void write_nodes_csv(std::ostream& os, const LiftNodes& nodes) {
  const auto old = os.precision(17);
  os << "x,m,xi\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) os << nodes.x[i] << ',' << nodes.m[i] << ',' << nodes.xi[i] << '\n';
  os.precision(old);
}

nlohmann::json nodes_to_json(const LiftNodes& n) {
  return {{"x", n.x},
          {"m", n.m},
          {"xi", n.xi},
          {"t_min", n.t_min},
          {"t_max", n.t_max},
          {"certified_error", n.certified_error},
          {"tolerance", n.tolerance},
          {"flagged", n.flagged}};
}

LiftNodes nodes_from_json(const nlohmann::json& j) {
  LiftNodes n = make_nodes(j.at("x").get<std::vector<double>>(), j.at("m").get<std::vector<double>>(),
                           j.at("xi").get<std::vector<double>>());
  n.t_min = j.value("t_min", 0.0);
  n.t_max = j.value("t_max", 0.0);
  n.certified_error = j.value("certified_error", 0.0);
  n.tolerance = j.value("tolerance", 0.0);
  n.flagged = j.value("flagged", false);
  return n;
}

}  // namespace vctl
