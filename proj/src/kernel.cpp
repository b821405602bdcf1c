#include "vctl/kernel.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "vctl/errors.hpp"
#include "vctl/numerics.hpp"

namespace vctl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_positive_time(double t, const char* what) {
  if (!(t > 0.0)) throw DomainError(std::string(what) + ": t must be > 0 for a singular kernel");
}

double log_density(double x) { return x > 0.0 ? -std::expm1(-x) / x : 1.0; }

// int over the measure of fn(x); splits density integrals at offset 1
double measure_integral(const BernsteinMeasure& m, const std::function<double(double)>& fn) {
  return std::visit(
      overloaded{
          [&](const AtomMeasure& a) {
            double s = 0.0;
            for (std::size_t i = 0; i < a.locations.size(); ++i) s += a.masses[i] * fn(a.locations[i]);
            return s;
          },
          [&](const DensityMeasure& d) {
            const double span = d.hi - d.lo;
            const double cut = std::min(1.0, span);
            auto g = [&](double u) {
              const double dens = d.density_at_offset(u);
              return dens == 0.0 ? 0.0 : dens * fn(d.lo + u);
            };
            double s = numerics::integrate_de(g, 0.0, cut);
            if (span > cut) s += numerics::integrate_de(g, cut, span);
            return s;
          }},
      m);
}

// int_a^b coef * u^p du
double power_segment(double coef, double p, double a, double b) {
  if (std::abs(p + 1.0) < 1e-12) return coef * std::log(b / a);
  return coef * (std::pow(b, p + 1.0) - std::pow(a, p + 1.0)) / (p + 1.0);
}

// Sampled kernel helpers. K(u) = k_i (u/t_i)^{p_i} on segment i.
std::size_t sampled_segment(const Sampled& s, double t) {
  auto it = std::upper_bound(s.t.begin(), s.t.end(), t);
  const auto idx = static_cast<std::size_t>(std::distance(s.t.begin(), it));
  return idx == 0 ? 0 : idx - 1;
}

// int_0^x u^m K(u)^r du
double sampled_moment(const Sampled& s, double x, int m, int r) {
  if (x <= 0.0) return 0.0;
  const std::size_t n = s.t.size();
  auto piece = [&](std::size_t i, double a, double b) {
    const double p = r * s.slope[std::min(i, n - 2)];
    const double coef = std::pow(s.k[i], r) * std::pow(s.t[i], -p);
    if (a == 0.0) {
      const double q = p + m;
      return coef * std::pow(b, q + 1.0) / (q + 1.0);
    }
    return power_segment(coef, p + m, a, b);
  };
  if (x <= s.t[0]) return piece(0, 0.0, x);
  double total;
  std::size_t i;
  if (m == 0 && r == 1) {
    i = sampled_segment(s, x);
    total = s.cum_k[i];
  } else if (m == 0 && r == 2) {
    i = sampled_segment(s, x);
    total = s.cum_k2[i];
  } else {
    total = piece(0, 0.0, s.t[0]);
    i = 0;
    const std::size_t last = sampled_segment(s, x);
    for (; i < last && i + 1 < n; ++i) total += piece(i, s.t[i], s.t[i + 1]);
  }
  if (i + 1 < n) {
    total += piece(i, s.t[i], x);
  } else {
    const double kl = std::pow(s.k[n - 1], r);
    total += kl * (std::pow(x, m + 1) - std::pow(s.t[n - 1], m + 1)) / (m + 1);
  }
  return total;
}

}  // namespace

Kernel Kernel::riemann_liouville(double alpha, double beta) {
  if (!(alpha > 0.5 && alpha < 1.0)) throw PreconditionError("riemann_liouville: alpha must lie in (1/2, 1)");
  if (!(beta >= 0.0)) throw PreconditionError("riemann_liouville: beta must be >= 0");
  return Kernel(RiemannLiouville{alpha, beta});
}

Kernel Kernel::logarithmic() { return Kernel(Logarithmic{}); }

Kernel Kernel::finite_spectrum(double c0, std::vector<std::pair<double, double>> atoms) {
  if (!(c0 >= 0.0)) throw PreconditionError("finite_spectrum: c0 must be >= 0");
  std::sort(atoms.begin(), atoms.end());
  FiniteSpectrum fs{c0, {}, {}};
  for (const auto& [lam, w] : atoms) {
    if (!(lam > 0.0)) throw PreconditionError("finite_spectrum: atom locations must be > 0");
    if (!(w > 0.0)) throw PreconditionError("finite_spectrum: atom masses must be > 0");
    if (!fs.lambda.empty() && lam == fs.lambda.back())
      throw PreconditionError("finite_spectrum: atom locations must be distinct");
    fs.lambda.push_back(lam);
    fs.weight.push_back(w);
  }
  return Kernel(std::move(fs));
}

Kernel Kernel::shifted(const Kernel& base, double epsilon) {
  if (!(epsilon > 0.0)) throw PreconditionError("shifted: epsilon must be > 0");
  if (const auto* sh = std::get_if<Shifted>(&base.family_))
    return Kernel(Shifted{sh->base, sh->epsilon + epsilon});
  if (std::holds_alternative<Sampled>(base.family_))
    throw PreconditionError("shifted: base kernel must be a named family");
  return Kernel(Shifted{std::make_shared<const Kernel>(base), epsilon});
}

Kernel Kernel::sampled(std::vector<double> t, std::vector<double> k) {
  if (t.size() != k.size() || t.size() < 2) throw PreconditionError("sampled: need >= 2 matching (t, K) samples");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0)) throw PreconditionError("sampled: sample times must be > 0");
    if (i > 0 && !(t[i] > t[i - 1])) throw PreconditionError("sampled: sample times must increase strictly");
    if (!(k[i] > 0.0) || !std::isfinite(k[i])) throw PreconditionError("sampled: kernel samples must be positive");
  }
  Sampled s;
  s.t = std::move(t);
  s.k = std::move(k);
  const std::size_t n = s.t.size();
  s.slope.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) s.slope[i] = std::log(s.k[i + 1] / s.k[i]) / std::log(s.t[i + 1] / s.t[i]);
  if (!(2.0 * s.slope[0] > -1.0))
    throw PreconditionError("sampled: leading power law is not square integrable at 0; add samples closer to 0");
  s.cum_k.resize(n);
  s.cum_k2.resize(n);
  s.cum_k[0] = s.k[0] * s.t[0] / (s.slope[0] + 1.0);
  s.cum_k2[0] = s.k[0] * s.k[0] * s.t[0] / (2.0 * s.slope[0] + 1.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double p = s.slope[i];
    s.cum_k[i + 1] = s.cum_k[i] + power_segment(s.k[i] * std::pow(s.t[i], -p), p, s.t[i], s.t[i + 1]);
    s.cum_k2[i + 1] =
        s.cum_k2[i] + power_segment(s.k[i] * s.k[i] * std::pow(s.t[i], -2.0 * p), 2.0 * p, s.t[i], s.t[i + 1]);
  }
  return Kernel(std::move(s));
}

double Kernel::eval(double t) const {
  return std::visit(
      overloaded{
          [&](const RiemannLiouville& f) {
            require_positive_time(t, "eval_kernel");
            return std::pow(t, f.alpha - 1.0) * std::exp(-f.beta * t) / std::tgamma(f.alpha);
          },
          [&](const Logarithmic&) {
            require_positive_time(t, "eval_kernel");
            return std::log1p(1.0 / t);
          },
          [&](const FiniteSpectrum& f) {
            if (t < 0.0) throw DomainError("eval_kernel: t must be >= 0");
            double s = f.c0;
            for (std::size_t i = 0; i < f.lambda.size(); ++i) s += f.weight[i] * std::exp(-f.lambda[i] * t);
            return s;
          },
          [&](const Shifted& f) {
            if (t < 0.0) throw DomainError("eval_kernel: t must be >= 0");
            return f.base->eval(t + f.epsilon);
          },
          [&](const Sampled& s) {
            if (t <= 0.0) {
              if (s.slope[0] < 0.0) throw DomainError("eval_kernel: t must be > 0 for a singular sampled kernel");
              return s.slope[0] == 0.0 ? s.k[0] : 0.0;
            }
            if (t >= s.t.back()) return s.k.back();
            const std::size_t i = sampled_segment(s, t);
            return s.k[i] * std::pow(t / s.t[i], s.slope[i]);
          }},
      family_);
}

double Kernel::primitive(double t) const {
  if (t < 0.0) throw DomainError("primitive: t must be >= 0");
  if (t == 0.0) return 0.0;
  return std::visit(
      overloaded{
          [&](const RiemannLiouville& f) {
            if (f.beta == 0.0) return std::pow(t, f.alpha) / std::tgamma(f.alpha + 1.0);
            return boost::math::gamma_p(f.alpha, f.beta * t) / std::pow(f.beta, f.alpha);
          },
          [&](const Logarithmic&) { return t * std::log1p(1.0 / t) + std::log1p(t); },
          [&](const FiniteSpectrum& f) {
            double s = f.c0 * t;
            for (std::size_t i = 0; i < f.lambda.size(); ++i) s += -f.weight[i] * std::expm1(-f.lambda[i] * t) / f.lambda[i];
            return s;
          },
          [&](const Shifted& f) { return f.base->integral(f.epsilon, f.epsilon + t); },
          [&](const Sampled& s) { return sampled_moment(s, t, 0, 1); }},
      family_);
}

double Kernel::integral(double a, double b) const {
  if (a > b) throw PreconditionError("integral: need a <= b");
  if (a == b) return 0.0;
  if (const auto* fs = std::get_if<FiniteSpectrum>(&family_)) {
    double s = fs->c0 * (b - a);
    for (std::size_t i = 0; i < fs->lambda.size(); ++i)
      s += fs->weight[i] * std::exp(-fs->lambda[i] * a) * -std::expm1(-fs->lambda[i] * (b - a)) / fs->lambda[i];
    return s;
  }
  return primitive(b) - primitive(a);
}

double Kernel::growth_ratio(double t) const {
  require_positive_time(t, "growth_ratio");
  if (const auto* rl = std::get_if<RiemannLiouville>(&family_)) {
    if (rl->beta == 0.0) return rl->alpha;
    const double x = rl->beta * t;
    return x * boost::math::gamma_p_derivative(rl->alpha, x) / boost::math::gamma_p(rl->alpha, x);
  }
  const double i = primitive(t);
  if (!(i > 0.0)) throw NumericError("growth_ratio: I_K(t) vanished", "primitive_zero");
  return t * eval(t) / i;
}

double Kernel::first_moment(double h) const {
  if (h < 0.0) throw DomainError("first_moment: h must be >= 0");
  if (h == 0.0) return 0.0;
  return std::visit(
      overloaded{
          [&](const RiemannLiouville& f) {
            if (f.beta == 0.0) return std::pow(h, f.alpha + 1.0) / ((f.alpha + 1.0) * std::tgamma(f.alpha));
            return f.alpha * boost::math::gamma_p(f.alpha + 1.0, f.beta * h) / std::pow(f.beta, f.alpha + 1.0);
          },
          [&](const Logarithmic&) {
            return 0.5 * (h * h - 1.0) * std::log1p(h) + 0.5 * h - 0.5 * h * h * std::log(h);
          },
          [&](const FiniteSpectrum& f) {
            double s = 0.5 * f.c0 * h * h;
            for (std::size_t i = 0; i < f.lambda.size(); ++i) {
              const double lh = f.lambda[i] * h;
              // 1 - e^{-x}(1+x), series for small x
              const double core = lh < 1e-3 ? lh * lh * (0.5 - lh / 3.0 + lh * lh / 8.0)
                                            : 1.0 - std::exp(-lh) * (1.0 + lh);
              s += f.weight[i] * core / (f.lambda[i] * f.lambda[i]);
            }
            return s;
          },
          [&](const Shifted& f) {
            const Kernel& b = *f.base;
            const double e = f.epsilon;
            return numerics::integrate_gl([&](double s) { return s * b.eval(s + e); }, 0.0, h, 4);
          },
          [&](const Sampled& s) { return sampled_moment(s, h, 1, 1); }},
      family_);
}

double Kernel::square_integral(double a, double b) const {
  if (a < 0.0 || a > b) throw PreconditionError("square_integral: need 0 <= a <= b");
  if (a == b) return 0.0;
  return std::visit(
      overloaded{
          [&](const RiemannLiouville& f) {
            const double p = 2.0 * f.alpha - 1.0;
            const double g2 = std::tgamma(f.alpha) * std::tgamma(f.alpha);
            if (f.beta == 0.0) return (std::pow(b, p) - std::pow(a, p)) / (p * g2);
            const double two_b = 2.0 * f.beta;
            const double scale = std::tgamma(p) / (std::pow(two_b, p) * g2);
            if (a == 0.0) return scale * boost::math::gamma_p(p, two_b * b);
            // gamma_q keeps precision when both arguments sit in the tail
            return scale * (boost::math::gamma_q(p, two_b * a) - boost::math::gamma_q(p, two_b * b));
          },
          [&](const Logarithmic&) {
            return numerics::integrate_de(
                [](double s) {
                  const double l = std::log1p(1.0 / s);
                  return l * l;
                },
                a, b);
          },
          [&](const FiniteSpectrum& f) {
            double s = f.c0 * f.c0 * (b - a);
            const std::size_t n = f.lambda.size();
            const double w = b - a;
            for (std::size_t i = 0; i < n; ++i) {
              s += 2.0 * f.c0 * f.weight[i] * std::exp(-f.lambda[i] * a) * -std::expm1(-f.lambda[i] * w) / f.lambda[i];
              for (std::size_t j = 0; j < n; ++j) {
                const double l = f.lambda[i] + f.lambda[j];
                s += f.weight[i] * f.weight[j] * std::exp(-l * a) * -std::expm1(-l * w) / l;
              }
            }
            return s;
          },
          [&](const Shifted& f) { return f.base->square_integral(a + f.epsilon, b + f.epsilon); },
          [&](const Sampled& s) { return sampled_moment(s, b, 0, 2) - sampled_moment(s, a, 0, 2); }},
      family_);
}

double Kernel::k_infinity() const {
  return std::visit(overloaded{[](const FiniteSpectrum& f) { return f.c0; },
                               [](const Shifted& f) { return f.base->k_infinity(); },
                               [](const auto&) { return 0.0; }},
                    family_);
}

BernsteinMeasure Kernel::measure() const {
  return std::visit(
      overloaded{
          [](const RiemannLiouville& f) -> BernsteinMeasure {
            const double a = f.alpha;
            const double norm = 1.0 / (std::tgamma(1.0 - a) * std::tgamma(a));
            return DensityMeasure{[a, norm](double u) { return u > 0.0 ? norm * std::pow(u, -a) : 0.0; }, f.beta,
                                  kInf, a};
          },
          [](const Logarithmic&) -> BernsteinMeasure {
            return DensityMeasure{[](double u) { return log_density(u); }, 0.0, kInf, 0.0};
          },
          [](const FiniteSpectrum& f) -> BernsteinMeasure { return AtomMeasure{f.lambda, f.weight}; },
          [](const Shifted& f) -> BernsteinMeasure {
            const double e = f.epsilon;
            auto base = f.base->measure();
            if (auto* at = std::get_if<AtomMeasure>(&base)) {
              for (std::size_t i = 0; i < at->masses.size(); ++i) at->masses[i] *= std::exp(-e * at->locations[i]);
              return base;
            }
            auto d = std::get<DensityMeasure>(base);
            auto inner = d.density_at_offset;
            const double lo = d.lo;
            d.density_at_offset = [inner, lo, e](double u) { return inner(u) * std::exp(-e * (lo + u)); };
            return d;
          },
          [](const Sampled&) -> BernsteinMeasure {
            throw PreconditionError("measure: a sampled kernel carries no Bernstein measure");
          }},
      family_);
}

std::optional<double> Kernel::eta_star() const {
  return std::visit(overloaded{[](const RiemannLiouville& f) -> std::optional<double> { return 1.0 - f.alpha; },
                               [](const Logarithmic&) -> std::optional<double> { return 0.0; },
                               [](const FiniteSpectrum&) -> std::optional<double> { return -kInf; },
                               [](const Shifted&) -> std::optional<double> { return -kInf; },
                               [](const Sampled&) -> std::optional<double> { return std::nullopt; }},
                    family_);
}

double Kernel::singularity_exponent() const {
  return std::visit(overloaded{[](const RiemannLiouville& f) { return 1.0 - f.alpha; },
                               [](const Sampled& s) { return std::max(0.0, -s.slope[0]); },
                               [](const auto&) { return 0.0; }},
                    family_);
}

bool Kernel::singular_at_zero() const {
  return std::visit(overloaded{[](const RiemannLiouville&) { return true; }, [](const Logarithmic&) { return true; },
                               [](const Sampled& s) { return s.slope[0] < 0.0; },
                               [](const auto&) { return false; }},
                    family_);
}

double Kernel::laplace_transform(double lambda) const {
  if (!(lambda > 0.0)) throw DomainError("laplace_transform: lambda must be > 0");
  if (const auto* rl = std::get_if<RiemannLiouville>(&family_)) return std::pow(lambda + rl->beta, -rl->alpha);
  if (const auto* fs = std::get_if<FiniteSpectrum>(&family_)) {
    double s = fs->c0 / lambda;
    for (std::size_t i = 0; i < fs->lambda.size(); ++i) s += fs->weight[i] / (lambda + fs->lambda[i]);
    return s;
  }
  if (std::holds_alternative<Sampled>(family_))
    throw PreconditionError("laplace_transform: not available for sampled kernels");
  return k_infinity() / lambda + measure_integral(measure(), [lambda](double x) { return 1.0 / (x + lambda); });
}

double Kernel::eval_from_measure(double t) const {
  if (!(t > 0.0)) throw DomainError("eval_from_measure: t must be > 0");
  return k_infinity() + measure_integral(measure(), [t](double x) { return std::exp(-x * t); });
}

std::string Kernel::family_name() const {
  return std::visit(overloaded{[](const RiemannLiouville&) { return std::string("riemann_liouville"); },
                               [](const Logarithmic&) { return std::string("logarithmic"); },
                               [](const FiniteSpectrum&) { return std::string("finite_spectrum"); },
                               [](const Shifted&) { return std::string("shifted"); },
                               [](const Sampled&) { return std::string("sampled"); }},
                    family_);
}

nlohmann::json Kernel::to_json() const {
  nlohmann::json j;
  j["family"] = family_name();
  std::visit(overloaded{[&](const RiemannLiouville& f) { j["params"] = {{"alpha", f.alpha}, {"beta", f.beta}}; },
                        [&](const Logarithmic&) { j["params"] = nlohmann::json::object(); },
                        [&](const FiniteSpectrum& f) {
                          nlohmann::json atoms = nlohmann::json::array();
                          for (std::size_t i = 0; i < f.lambda.size(); ++i)
                            atoms.push_back({{"lambda", f.lambda[i]}, {"weight", f.weight[i]}});
                          j["params"] = {{"c0", f.c0}, {"atoms", atoms}};
                        },
                        [&](const Shifted& f) { j["params"] = {{"epsilon", f.epsilon}, {"base", f.base->to_json()}}; },
                        [&](const Sampled& s) { j["params"] = {{"t", s.t}, {"k", s.k}}; }},
             family_);
  return j;
}

Kernel Kernel::from_json(const nlohmann::json& j) {
  const std::string fam = j.at("family").get<std::string>();
  const nlohmann::json p = j.contains("params") ? j.at("params") : nlohmann::json::object();
  if (fam == "riemann_liouville") return riemann_liouville(p.at("alpha").get<double>(), p.value("beta", 0.0));
  if (fam == "logarithmic") return logarithmic();
  if (fam == "finite_spectrum") {
    std::vector<std::pair<double, double>> atoms;
    if (p.contains("atoms"))
      for (const auto& a : p.at("atoms")) atoms.emplace_back(a.at("lambda").get<double>(), a.at("weight").get<double>());
    return finite_spectrum(p.value("c0", 0.0), std::move(atoms));
  }
  if (fam == "shifted") return shifted(from_json(p.at("base")), p.at("epsilon").get<double>());
  if (fam == "sampled") return sampled(p.at("t").get<std::vector<double>>(), p.at("k").get<std::vector<double>>());
  throw PreconditionError("unknown kernel family '" + fam + "'");
}

void write_samples_csv(std::ostream& os, std::span<const double> t, std::span<const double> k) {
  if (t.size() != k.size()) throw PreconditionError("write_samples_csv: size mismatch");
  const auto old = os.precision(17);
  os << "t,K\n";
  for (std::size_t i = 0; i < t.size(); ++i) os << t[i] << ',' << k[i] << '\n';
  os.precision(old);
}

Kernel read_samples_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw PreconditionError("read_samples_csv: empty input");
  std::vector<double> t, k;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    double a = 0, b = 0;
    char comma = 0;
    if (!(ls >> a >> comma >> b) || comma != ',') throw PreconditionError("read_samples_csv: malformed row '" + line + "'");
    t.push_back(a);
    k.push_back(b);
  }
  return Kernel::sampled(std::move(t), std::move(k));
}

void check_resolvent_admissible(const Kernel& k, double c) {
  if (c <= 0.0) return;
  for (double lam : numerics::geomspace(1e-8, 1e8, 161)) {
    const double denom = 1.0 - c * k.laplace_transform(lam);
    if (!(denom > 0.0)) {
      std::ostringstream d;
      d.precision(17);
      d << "lambda=" << lam << ";denominator=" << denom;
      throw BlowUpError("resolvent: 1 - c*Khat(lambda) is not positive; the resolvent blows up", d.str());
    }
  }
}

std::vector<double> resolvent_matrix_exponential(std::span<const double> x, std::span<const double> w, double c,
                                                 std::span<const double> grid) {
  if (x.size() != w.size()) throw PreconditionError("resolvent_matrix_exponential: size mismatch");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::VectorXd wv(n);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    wv(i) = w[static_cast<std::size_t>(i)];
    M(i, i) = -x[static_cast<std::size_t>(i)];
  }
  M += c * Eigen::VectorXd::Ones(n) * wv.transpose();
  std::vector<double> out;
  out.reserve(grid.size());
  for (double t : grid) {
    const Eigen::MatrixXd E = (t * M).exp();
    out.push_back(wv.dot(E * Eigen::VectorXd::Ones(n)));
  }
  return out;
}

ResolventResult resolvent_kernel(const Kernel& k, double c, std::span<const double> grid, int n_steps) {
  if (grid.empty()) throw PreconditionError("resolvent_kernel: empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) throw PreconditionError("resolvent_kernel: grid times must be > 0");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw PreconditionError("resolvent_kernel: grid must increase strictly");
  }
  if (n_steps < 2) throw PreconditionError("resolvent_kernel: n_steps must be >= 2");

  std::vector<double> tv(grid.begin(), grid.end());
  std::vector<double> values(grid.size());
  std::optional<std::vector<double>> exact;
  if (const auto* fs = std::get_if<FiniteSpectrum>(&k.family())) {
    std::vector<double> x, w;
    if (fs->c0 != 0.0) {
      x.push_back(0.0);
      w.push_back(fs->c0);
    }
    x.insert(x.end(), fs->lambda.begin(), fs->lambda.end());
    w.insert(w.end(), fs->weight.begin(), fs->weight.end());
    exact = resolvent_matrix_exponential(x, w, c, grid);
  }

  if (c == 0.0) {
    for (std::size_t i = 0; i < grid.size(); ++i) values[i] = k.eval(grid[i]);
  } else {
    check_resolvent_admissible(k, c);
    const std::size_t n = static_cast<std::size_t>(n_steps);
    const double T = grid.back();
    const double h = T / static_cast<double>(n);
    std::vector<double> I(n + 1);
    for (std::size_t p = 0; p <= n; ++p) I[p] = k.primitive(h * static_cast<double>(p));
    I[n] = k.primitive(T);
    std::vector<double> A(n), B(n);
    static const numerics::QuadratureRule gl = numerics::gauss_legendre(8);
    for (std::size_t p = 0; p < n; ++p) {
      A[p] = p == 0 ? I[1] : k.integral(h * static_cast<double>(p), h * static_cast<double>(p + 1));
      if (p == 0) {
        B[0] = k.first_moment(h) / h;
      } else {
        double s = 0.0;
        for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
          const double r = 0.5 * (1.0 + gl.nodes[q]);
          s += gl.weights[q] * r * k.eval(h * (static_cast<double>(p) + r));
        }
        B[p] = 0.5 * h * s;
      }
    }
    // integrated resolvent F = I_K + c K*F, F piecewise linear
    std::vector<double> F(n + 1, 0.0);
    const double diag = 1.0 - c * (A[0] - B[0]);
    for (std::size_t m = 1; m <= n; ++m) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += F[j] * B[m - 1 - j];
      for (std::size_t j = 0; j + 1 < m; ++j) acc += F[j + 1] * (A[m - 1 - j] - B[m - 1 - j]);
      F[m] = (I[m] + c * acc) / diag;
    }
    std::vector<double> slope(n);
    for (std::size_t j = 0; j < n; ++j) slope[j] = (F[j + 1] - F[j]) / h;

    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double t = grid[i];
      const double pos = t / h;
      const auto m = static_cast<std::size_t>(std::llround(pos));
      double conv = 0.0;
      if (std::abs(pos - static_cast<double>(m)) <= 1e-12 * std::max(1.0, pos) && m >= 1) {
        for (std::size_t j = 0; j < m; ++j) conv += slope[j] * A[m - 1 - j];
      } else {
        const auto mf = std::min(n - 1, static_cast<std::size_t>(std::floor(pos)));
        for (std::size_t j = 0; j < mf; ++j) {
          const double tj = h * static_cast<double>(j);
          conv += slope[j] * k.integral(t - tj - h, t - tj);
        }
        conv += slope[mf] * k.primitive(t - h * static_cast<double>(mf));
      }
      values[i] = k.eval(t) + c * conv;
    }
  }

  for (double v : values)
    if (!std::isfinite(v)) throw NumericError("resolvent_kernel: non-finite resolvent value", "resolvent_nonfinite");
  std::optional<Kernel> table;
  try {
    table = Kernel::sampled(tv, values);
  } catch (const PreconditionError&) {
    // grid too coarse near 0 or values not positive; the raw values are still returned
  }
  return ResolventResult{std::move(tv), std::move(values), std::move(exact), std::move(table)};
}

CmReport cm_diagnostic(std::span<const double> t, std::span<const double> k, int order, double tol) {
  if (order < 0) throw PreconditionError("cm_diagnostic: order must be >= 0");
  if (t.size() != k.size()) throw PreconditionError("cm_diagnostic: size mismatch");
  if (t.size() < static_cast<std::size_t>(order) + 2) throw PreconditionError("cm_diagnostic: too few samples");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw PreconditionError("cm_diagnostic: grid must increase strictly");

  CmReport rep;
  std::vector<double> dd(k.begin(), k.end());
  std::vector<double> scale(dd.size());
  for (std::size_t i = 0; i < dd.size(); ++i) scale[i] = std::abs(dd[i]);
  for (int n = 0; n <= order; ++n) {
    if (n > 0) {
      for (std::size_t i = 0; i + 1 < dd.size(); ++i) {
        const double w = t[i + static_cast<std::size_t>(n)] - t[i];
        dd[i] = (dd[i + 1] - dd[i]) / w;
        scale[i] = (scale[i + 1] + scale[i]) / w;
      }
      dd.pop_back();
      scale.pop_back();
    }
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < dd.size(); ++i) {
      const double bad = -sign * dd[i];
      if (bad > 0.0 && scale[i] > 0.0) worst = std::max(worst, bad / scale[i]);
    }
    rep.max_violation = std::max(rep.max_violation, worst);
    if (worst > tol) {
      if (n == 0) rep.nonnegative = false;
      else if (n == 1) rep.monotone = false;
      else rep.alternating = false;
    }
  }
  return rep;
}

}  // namespace vctl
