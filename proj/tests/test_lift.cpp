#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vctl/errors.hpp"
#include "vctl/lift.hpp"
#include "vctl/numerics.hpp"

using namespace vctl;
using doctest::Approx;

namespace {

double sup_rel_error(const LiftNodes& n, const Kernel& k, double lo, double hi) {
  double worst = 0.0;
  for (double t : numerics::geomspace(lo, hi, 1000)) {
    const double ref = std::pow(t, -0.25) / std::tgamma(0.75);
    (void)k;
    worst = std::max(worst, std::abs(reconstruct_kernel(n, t) - ref) / ref);
  }
  return worst;
}

std::vector<double> random_state(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("finite spectrum atoms are copied exactly") {
  const Kernel k = Kernel::finite_spectrum(0.5, {{1.0, 2.0}, {3.0, 0.1}});
  const LiftNodes n = discretize_measure(k, 10, 0.01, 2.0);
  REQUIRE(n.size() == 3);
  CHECK(n.x == std::vector<double>{0.0, 1.0, 3.0});
  CHECK(n.m == std::vector<double>{1.0, 2.0, 0.1});
  CHECK(n.xi == std::vector<double>{0.5, 1.0, 1.0});
  CHECK(n.certified_error < 1e-15);
  CHECK_FALSE(n.flagged);
}

TEST_CASE("riemann-liouville lift fidelity improves with nodes") {
  const Kernel k = Kernel::riemann_liouville(0.75);
  const LiftNodes n20 = discretize_measure(k, 20, 0.01, 2.0);
  const LiftNodes n40 = discretize_measure(k, 40, 0.01, 2.0);
  CHECK(n20.size() == 21);
  CHECK(n40.size() == 41);
  const double e20 = sup_rel_error(n20, k, 0.01, 2.0);
  const double e40 = sup_rel_error(n40, k, 0.01, 2.0);
  CHECK(e20 <= 1e-2);
  CHECK(e40 < e20);
  // recorded certificate agrees with the independent check
  CHECK(n20.certified_error == Approx(e20).epsilon(0.2));
  CHECK(n20.certified_error <= n20.tolerance);
  const LiftNodes n5 = discretize_measure(k, 5, 0.01, 2.0, LiftScheme::geometric_gauss, 1e-4);
  CHECK(n5.flagged);
  CHECK(n5.certified_error > 1e-4);
  CHECK_THROWS_AS(discretize_measure(Kernel::sampled({1, 2}, {1, 0.9}), 10, 0.1, 1.0), PreconditionError);
}

TEST_CASE("other density families lift within tolerance") {
  for (const Kernel& k : {Kernel::logarithmic(), Kernel::riemann_liouville(0.6, 0.5),
                          Kernel::shifted(Kernel::riemann_liouville(0.75), 0.05)}) {
    const LiftNodes n = discretize_measure(k, 30, 0.01, 2.0);
    CAPTURE(k.family_name());
    CHECK(n.certified_error < 1e-3);
    for (double t : {0.01, 0.1, 1.0, 2.0}) CHECK(std::abs(reconstruct_kernel(n, t) / k.eval(t) - 1.0) <= n.certified_error);
  }
}

TEST_CASE("reconstruct kernel") {
  const LiftNodes c = discretize_measure(Kernel::constant(2.0), 0, 0.1, 1.0, LiftScheme::atoms_exact);
  CHECK(reconstruct_kernel(c, 3.0) == 2.0);
  const LiftNodes e = make_nodes({0.0, 1.0}, {1.0, 1.0}, {0.0, 1.0});
  CHECK(reconstruct_kernel(e, std::log(2.0)) == Approx(0.5).epsilon(1e-15));
  const LiftNodes rl = discretize_measure(Kernel::riemann_liouville(0.75), 40, 0.01, 2.0);
  const double k1 = oracle::rl_from_measure(0.75, 1.0);
  CHECK(k1 == Approx(0.81606).epsilon(1e-5));
  CHECK(std::abs(reconstruct_kernel(rl, 1.0) - k1) / k1 <= rl.certified_error);
}

TEST_CASE("semigroup") {
  const LiftNodes rl = discretize_measure(Kernel::riemann_liouville(0.75), 20, 0.01, 2.0);
  std::mt19937_64 rng(7);
  const auto z = random_state(rl.size(), rng);
  CHECK(semigroup_apply(rl, 0.0, z) == z);
  const LiftNodes one = make_nodes({0.0, 1.0}, {1.0, 1.0}, {0.0, 1.0});
  CHECK(semigroup_apply(one, std::log(2.0), std::vector<double>{0.0, 4.0})[1] == Approx(2.0).epsilon(1e-15));
  for (int rep = 0; rep < 10; ++rep) {
    const auto s = random_state(rl.size(), rng);
    const auto a = semigroup_apply(rl, 0.3, semigroup_apply(rl, 0.45, s));
    const auto b = semigroup_apply(rl, 0.75, s);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12 * std::max(1.0, std::abs(b[i])));
    for (double eta : {-1.0, 0.3, 0.9}) CHECK(weighted_norm(rl, b, eta) <= weighted_norm(rl, s, eta));
  }
}

TEST_CASE("reconstruction operator") {
  const LiftNodes rl = discretize_measure(Kernel::riemann_liouville(0.75), 20, 0.01, 2.0);
  const auto z = lift_initial_curve(rl, InitialCurve::constant(2.0));
  CHECK(gamma_observe(rl, z) == 2.0);
  const LiftNodes two = make_nodes({0.0, 1.0}, {1.0, 0.5}, {0.0, 1.0});
  CHECK(gamma_observe(two, std::vector<double>{2.0, 4.0}) == 4.0);
  CHECK(gamma_observe(rl, std::vector<double>(rl.size(), 0.0)) == 0.0);
  CHECK_THROWS_AS(gamma_observe(two, std::vector<double>{1.0}), PreconditionError);
  for (double t : {0.0, 0.01, 0.5, 2.0})
    CHECK(gamma_observe(rl, semigroup_apply(rl, t, rl.xi)) == reconstruct_kernel(rl, t));
}

TEST_CASE("weighted norms") {
  const LiftNodes two = make_nodes({0.0, 1.0}, {1.0, 1.0}, {0.0, 1.0});
  CHECK(weighted_norm(two, std::vector<double>{0.0, 0.0}, 0.7) == 0.0);
  CHECK(weighted_norm(two, std::vector<double>{1.0, 1.0}, 1.0) == Approx(std::sqrt(3.0)).epsilon(1e-15));
  CHECK(weighted_norm(two, std::vector<double>{1.0, 1.0}, 1.0) == Approx(1.73205).epsilon(1e-5));
  std::mt19937_64 rng(3);
  const LiftNodes rl = discretize_measure(Kernel::riemann_liouville(0.75), 20, 0.01, 2.0);
  const auto s = random_state(rl.size(), rng);
  CHECK(weighted_norm(rl, s, -0.25) <= weighted_norm(rl, s, 0.625));
}

TEST_CASE("analytic smoothing constant") {
  const LiftNodes one = make_nodes({0.0, 1.0}, {1.0, 1.0}, {0.0, 1.0});
  CHECK(analytic_smoothing_constant(one, 1.0, 1.0, 0.0) == Approx(std::exp(-1.0) * std::sqrt(2.0)).epsilon(1e-15));
  CHECK(analytic_smoothing_constant(one, 1.0, 1.0, 0.0) == Approx(0.52026).epsilon(1e-5));
  CHECK(analytic_smoothing_constant(one, 200.0, 1.0, 0.0) < 1e-80);
  CHECK_THROWS_AS(analytic_smoothing_constant(one, 1.0, 0.0, 0.5), PreconditionError);

  // sup over t of value * t^{3/2}; the continuum bound is (3/2)^{3/2} e^{-3/2} ~ 0.41
  auto sup_c = [](const LiftNodes& n, std::size_t pts) {
    double best = 0.0;
    for (double t : numerics::geomspace(1e-3, 1.0, pts))
      best = std::max(best, analytic_smoothing_constant(n, t, 0.625, -0.375) * std::pow(t, 1.5));
    return best;
  };
  const Kernel k = Kernel::riemann_liouville(0.75);
  const double c20 = sup_c(discretize_measure(k, 20, 1e-3, 1.0), 200);
  const double c40 = sup_c(discretize_measure(k, 40, 1e-3, 1.0), 400);
  const double c80 = sup_c(discretize_measure(k, 80, 1e-3, 1.0), 800);
  MESSAGE("smoothing constants: ", c20, " ", c40, " ", c80);
  CHECK(std::isfinite(c20));
  CHECK(std::abs(c40 - c80) < 0.05 * c80);
  CHECK(c80 == Approx(std::pow(1.5, 1.5) * std::exp(-1.5)).epsilon(0.1));
}

TEST_CASE("initial curves") {
  const LiftNodes rl = discretize_measure(Kernel::riemann_liouville(0.75), 40, 0.01, 2.0);
  const auto z = lift_initial_curve(rl, InitialCurve::constant(2.0));
  for (double t : {0.0, 0.3, 5.0}) CHECK(gamma_observe(rl, semigroup_apply(rl, t, z)) == 2.0);
  const auto ks = lift_initial_curve(rl, InitialCurve::kernel_shaped(3.0));
  CHECK(gamma_observe(rl, semigroup_apply(rl, 1.0, ks)) == Approx(3.0 * reconstruct_kernel(rl, 1.0)).epsilon(1e-14));
  const double k3 = 3.0 * oracle::rl_from_measure(0.75, 1.0);
  CHECK(k3 == Approx(2.44818).epsilon(1e-5));
  CHECK(std::abs(gamma_observe(rl, semigroup_apply(rl, 1.0, ks)) - k3) / k3 <= rl.certified_error);
  const auto zero = lift_initial_curve(rl, InitialCurve::explicit_vector(std::vector<double>(rl.size(), 0.0)));
  CHECK(gamma_observe(rl, semigroup_apply(rl, 0.7, zero)) == 0.0);
  CHECK_THROWS_AS(lift_initial_curve(rl, InitialCurve::explicit_vector({1.0})), PreconditionError);
}

TEST_CASE("lifted model validation and defaults") {
  const Kernel k = Kernel::riemann_liouville(0.75);
  const LiftNodes n = discretize_measure(k, 20, 0.01, 2.0);
  CHECK_THROWS_AS(LiftedModel(n, k, {0.0, 0.0, 1.0}), PreconditionError);
  CHECK_THROWS_AS(LiftedModel(n, k, {0.0, 1.0, 0.0}), PreconditionError);
  CHECK_THROWS_AS(LiftedModel(n, k, {0.0, 1.0, 1.0}, 0.2), PreconditionError);
  CHECK_THROWS_AS(LiftedModel(n, k, {0.0, 1.0, 1.0}, 0.6, 0.3), PreconditionError);
  const LiftedModel m(n, k, {0.0, 1.0, 1.0});
  CHECK(m.eta() == Approx(0.625));
  CHECK(m.eta_prime() == Approx(-0.25));
  const Kernel e = Kernel::finite_spectrum(0.0, {{1.0, 1.0}});
  const LiftedModel me(discretize_measure(e, 1, 0.01, 1.0), e, {0.0, 1.0, 1.0});
  CHECK(me.eta() == 0.0);
  CHECK(me.eta_prime() == -1.0);
}

TEST_CASE("observation row with drift matches the eigen oracle") {
  const Kernel k = Kernel::finite_spectrum(0.2, {{0.5, 1.0}, {4.0, 0.7}});
  const LiftNodes n = discretize_measure(k, 1, 0.01, 2.0);
  const LiftedModel m(n, k, {-0.7, 1.0, 1.0});
  for (double tau : {0.1, 0.9, 2.0}) {
    const double o = oracle::resolvent_eig({0.0, 0.5, 4.0}, {0.2, 1.0, 0.7}, -0.7, tau);
    CHECK(m.lift_kernel(tau) == Approx(o).epsilon(1e-12));
    const Kernel eff = m.effective_kernel(KernelSource::exact, 2.0);
    CHECK(eff.eval(tau) == Approx(o).epsilon(1e-12));
    const Kernel effl = m.effective_kernel(KernelSource::lift, 2.0);
    CHECK(effl.eval(tau) == Approx(o).epsilon(1e-12));
  }
  const LiftedModel m0(n, k, {0.0, 1.0, 1.0});
  const auto r = m0.observation_row(0.4);
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == n.m[i] * std::exp(-0.4 * n.x[i]));
  CHECK(m0.effective_kernel(KernelSource::lift, 1.0).eval(0.3) == Approx(reconstruct_kernel(n, 0.3)).epsilon(1e-15));
}

TEST_CASE("trace of the discrete covariance") {
  const LiftNodes n = make_nodes({0.0, 2.0}, {1.0, 0.5}, {1.0, 1.0});
  const Kernel k = Kernel::finite_spectrum(1.0, {{2.0, 0.5}});
  const LiftedModel m(n, k, {0.0, 1.0, 1.5});
  auto integrand = [&](double s) {
    const auto st = semigroup_apply(n, s, std::vector<double>{1.5, 1.5});
    return std::pow(weighted_norm(n, st, m.eta_prime()), 2);
  };
  CHECK(m.trace_q(0.8) == Approx(oracle::simpson(integrand, 0.0, 0.8)).epsilon(1e-12));
}

TEST_CASE("nodes json round trip") {
  const LiftNodes n = discretize_measure(Kernel::logarithmic(), 12, 0.01, 1.0);
  const LiftNodes b = nodes_from_json(nodes_to_json(n));
  CHECK(b.x == n.x);
  CHECK(b.m == n.m);
  CHECK(b.certified_error == n.certified_error);
}
