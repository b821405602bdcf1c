// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "vctl/config.hpp"
#include "vctl/control.hpp"
#include "vctl/hjb.hpp"
#include "vctl/numerics.hpp"
#include "vctl/smoothing.hpp"

using namespace vctl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

double rl_primitive(double a, double t) { return std::pow(t, a) / std::tgamma(1.0 + a); }
double rl_gramian(double a, double t) {
  return std::pow(t, 2.0 * a - 1.0) / ((2.0 * a - 1.0) * std::pow(std::tgamma(a), 2));
}
double rl_kernel(double a, double t) { return std::pow(t, a - 1.0) / std::tgamma(a); }

double normal_expect(const std::function<double(double)>& f, double mean, double var) {
  const double sd = std::sqrt(var);
  return oracle::simpson(
      [&](double z) { return f(mean + sd * z) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }, -12.0,
      12.0, 4000);
}

double quad_hmin(double p, double lo, double hi) {
  const double u = std::clamp(-p, lo, hi);
  return p * u + 0.5 * u * u;
}

HjbGrids grids(int nt, int ny) {
  HjbGrids g;
  g.n_tau = nt;
  g.n_y = ny;
  return g;
}

double max_gap(const PathBatch& a, const PathBatch& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.observed.size(); ++i) m = std::max(m, std::abs(a.observed[i] - b.observed[i]));
  return m;
}

void smoothing_law(Outcome& o) {
  const auto grid = numerics::geomspace(1e-3, 10.0, 200);
  const double b = 1.3, g = 0.7;
  double worst = 0.0;
  for (double a : {0.6, 0.75, 0.9}) {
    const auto prof = smoothing_profile({Kernel::riemann_liouville(a), b, g}, grid);
    const double target = std::abs(b / g) * std::sqrt(2.0 * a - 1.0);
    for (double v : prof.lambda_sqrt_t) worst = std::max(worst, std::abs(v - target));
  }
  o.detail << "RL max |Lambda sqrt(t) - target| = " << worst;
  o.require(worst <= 1e-10, "RL law within 1e-10");
  for (const Kernel& k : {Kernel::logarithmic(), Kernel::shifted(Kernel::riemann_liouville(0.75), 0.1)}) {
    const auto prof = smoothing_profile({k, b, g}, grid);
    double ratio = 0.0;
    for (double t : grid) ratio = std::max(ratio, k.growth_ratio(t));
    const double bound = ratio * std::abs(b / g);
    o.detail << "; " << k.family_name() << " sup " << prof.kappa0 << " <= " << bound;
    o.require(std::isfinite(prof.kappa0) && prof.kappa0 <= bound + 1e-8, k.family_name() + " universal bound");
  }
}

void min_energy(Outcome& o) {
  double worst = 0.0;
  for (const Kernel& k : {Kernel::finite_spectrum(0.0, {{1.0, 1.0}}), Kernel::riemann_liouville(0.6),
                          Kernel::riemann_liouville(0.75), Kernel::riemann_liouville(0.9)}) {
    const ScalarSystem sys{k, 1.0, 1.0};
    for (double t : {0.1, 1.0, 5.0}) {
      const auto v = min_energy_control(sys, t, 1.0, 2000);
      const double target = std::abs(lambda_op(sys, t));
      worst = std::max(worst, rel(v.energy, target));
      o.require(constant_ansatz_energy(sys, t, 1.0) >= v.energy, "ansatz dominates for " + k.family_name());
    }
  }
  o.detail << "max relative gap " << worst;
  o.require(worst <= 1e-3, "relative gap <= 1e-3");
}

void growth_ratio(Outcome& o) {
  const auto grid = numerics::geomspace(1e-3, 10.0, 200);
  std::vector<double> st, sk;
  for (double t : numerics::geomspace(1e-3, 10.0, 40)) {
    st.push_back(t);
    sk.push_back(std::pow(t, -0.3) + 0.2);
  }
  const std::vector<Kernel> kernels{Kernel::riemann_liouville(0.75),
                                    Kernel::riemann_liouville(0.6, 1.0),
                                    Kernel::logarithmic(),
                                    Kernel::finite_spectrum(0.2, {{1.0, 1.0}, {5.0, 0.5}}),
                                    Kernel::constant(1.5),
                                    Kernel::shifted(Kernel::riemann_liouville(0.75), 0.1),
                                    Kernel::sampled(st, sk)};
  double lo = 1.0, hi = 0.0;
  for (const auto& k : kernels)
    for (double t : grid) {
      const double r = k.growth_ratio(t);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  o.detail << kernels.size() << " families, ratio in [" << lo << ", " << hi << "]";
  o.require(lo >= 0.0 && hi <= 1.0, "ratio in [0, 1]");
  double dev = 0.0;
  for (double a : {0.6, 0.75, 0.9}) {
    const auto k = Kernel::riemann_liouville(a);
    for (double t : grid) dev = std::max(dev, std::abs(k.growth_ratio(t) - a));
  }
  o.detail << "; RL max |ratio - alpha| " << dev;
  o.require(dev <= 1e-14, "RL ratio equals alpha");
}

void resolvent(Outcome& o) {
  const auto grid = numerics::linspace(0.1, 2.0, 39);
  double worst = 0.0;
  struct Case {
    std::vector<double> x, w;
    double c;
  };
  for (const Case& cs : {Case{{0.5, 4.0}, {1.0, 0.7}, -0.5}, Case{{1.0, 5.0}, {1.0, 0.5}, -1.0},
                         Case{{0.0, 0.5, 4.0}, {0.3, 1.0, 0.7}, -0.8}, Case{{2.0}, {1.0}, 0.5}}) {
    std::vector<std::pair<double, double>> atoms;
    double c0 = 0.0;
    for (std::size_t i = 0; i < cs.x.size(); ++i) {
      if (cs.x[i] == 0.0) c0 = cs.w[i];
      else atoms.emplace_back(cs.x[i], cs.w[i]);
    }
    const auto r = resolvent_kernel(Kernel::finite_spectrum(c0, atoms), cs.c, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
      worst = std::max(worst, rel(r.values[i], oracle::resolvent_eig(cs.x, cs.w, cs.c, grid[i])));
  }
  o.detail << "finite spectrum max rel error " << worst;
  o.require(worst <= 1e-6, "finite spectrum within 1e-6");

  const auto r1 = resolvent_kernel(Kernel::finite_spectrum(0.0, {{1.0, 1.0}}), -1.0, grid);
  double e1 = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) e1 = std::max(e1, rel(r1.values[i], std::exp(-2.0 * grid[i])));
  o.detail << "; e^{-2t} rel error " << e1;
  o.require(e1 <= 1e-6, "single exponential");

  const auto g = numerics::geomspace(1e-3, 2.0, 60);
  double viol = 0.0, march_viol = 0.0;
  for (const Kernel& k : {Kernel::riemann_liouville(0.75), Kernel::logarithmic(),
                          Kernel::finite_spectrum(0.0, {{1.0, 1.0}, {5.0, 0.5}})}) {
    for (double c : {-0.5, -2.0}) {
      const auto r = resolvent_kernel(k, c, g);
      // marched values carry O(h^2) noise that third differences amplify;
      // where an exact resolvent exists it is the one checked at full tolerance
      const auto cm = r.exact ? cm_diagnostic(g, *r.exact, 3) : cm_diagnostic(g, r.values, 3);
      viol = std::max(viol, cm.max_violation);
      o.require(cm.nonnegative && cm.monotone && cm.alternating, "CM surrogate for " + k.family_name());
      if (r.exact) {
        const auto marched = cm_diagnostic(g, r.values, 3, 1e-6);
        march_viol = std::max(march_viol, marched.max_violation);
        o.require(marched.passed(1e-6), "marched CM within its accuracy for " + k.family_name());
      }
    }
  }
  o.detail << "; CM max violation " << viol << " (marched finite spectrum " << march_viol << ")";
}

void hjb_oracles(Outcome& o) {
  const double T = 1.0, a_rl = 0.75;
  {
    const double u0 = 0.5;
    const ScalarSystem sys{Kernel::riemann_liouville(a_rl), 1.0, 1.0};
    const Hamiltonian ham(u0, u0);
    const auto phi = Payoff::tanh(1.0, 0.0, 1.0);
    const auto t0 = Clock::now();
    const auto vg = solve_hjb(sys, ham, phi, T, grids(200, 200));
    const double secs = seconds_since(t0);
    double worst = 0.0;
    for (std::size_t k = 0; k < vg.n_tau(); k += 3) {
      const double tau = vg.tau[k];
      for (std::size_t j = 0; j < vg.n_y; j += 3) {
        const double y = vg.y(j);
        const double exact =
            tau * 0.5 * u0 * u0 +
            (tau == 0.0 ? phi(y) : normal_expect(phi, y + u0 * rl_primitive(a_rl, tau), rl_gramian(a_rl, tau)));
        worst = std::max(worst, std::abs(vg.f[k * vg.n_y + j] - exact));
      }
    }
    o.detail << "singleton sup error " << worst << " (200x200 in " << std::setprecision(3) << secs << " s)"
             << std::setprecision(6);
    o.require(worst <= 2e-3, "singleton within 2e-3");
    o.require(secs <= 30.0, "200x200 within 30 s");
  }
  {
    const double a = 0.5, b = 1.0;
    const ScalarSystem sys{Kernel::riemann_liouville(a_rl), b, 0.5};
    const auto vg = solve_hjb(sys, Hamiltonian(-1.0, 1.0), Payoff::linear(a), T, grids(200, 200));
    double dworst = 0.0, fworst = 0.0;
    for (double d : vg.df) dworst = std::max(dworst, std::abs(d - a));
    for (std::size_t k = 1; k < vg.n_tau(); k += 5) {
      const double tau = vg.tau[k];
      const double drift = oracle::graded_left(
          [&](double s) { return quad_hmin(rl_kernel(a_rl, s) * b * a, -1.0, 1.0); }, 0.0, tau, 8.0, 4000);
      for (std::size_t j = 0; j < vg.n_y; j += 7)
        fworst = std::max(fworst, std::abs(vg.f[k * vg.n_y + j] - (a * vg.y(j) + drift)));
    }
    o.detail << "; linear slope error " << dworst << ", value error " << fworst;
    o.require(dworst <= 1e-6, "slope within 1e-6");
    o.require(fworst <= 1e-3, "value within 1e-3");
  }
}

void gradient_singularity(Outcome& o) {
  const ScalarSystem sys{Kernel::finite_spectrum(0.0, {{1.0, 1.0}}), 1.0, 1.0};
  const Hamiltonian ham(-1.0, 1.0);
  auto sup_profile = [&](const Payoff& phi, std::vector<double>& ts, std::vector<double>& ss) {
    const auto vg = solve_hjb(sys, ham, phi, 1.0, grids(100, 201));
    for (std::size_t k = 1; k < vg.n_tau(); ++k) {
      if (vg.tau[k] < 1e-3 || vg.tau[k] > 0.1) continue;
      double m = 0.0;
      for (double d : vg.df_row(k)) m = std::max(m, std::abs(d));
      ts.push_back(vg.tau[k]);
      ss.push_back(m);
    }
  };
  std::vector<double> ts, ss;
  sup_profile(Payoff::step(1.0), ts, ss);
  const double slope = numerics::loglog_slope(ts, ss);
  o.detail << "step exponent " << slope;
  o.require(slope >= -0.6 && slope <= -0.4, "step exponent in [-0.6, -0.4]");

  std::vector<double> tl, sl;
  const auto lip = Payoff::tanh(1.0, 0.0, 0.5);
  sup_profile(lip, tl, sl);
  double top = 0.0;
  for (double v : sl) top = std::max(top, v);
  const double bound = lip.lipschitz() * std::exp(std::abs(sys.b) * ham.lipschitz_L() * sys.kernel.primitive(1.0));
  o.detail << "; Lipschitz sup " << top << " <= " << bound << ", exponent " << numerics::loglog_slope(tl, sl);
  o.require(top <= bound, "Lipschitz gradient bounded");
}

void lift_fidelity(Outcome& o) {
  SimConfig cfg;
  cfg.n_paths = 40;
  cfg.seed = 11;
  {
    const auto k = Kernel::finite_spectrum(0.0, {{1.0, 1.0}, {5.0, 0.5}});
    const Coefficients coef{0.0, 1.0, 1.0};
    const LiftedModel m(discretize_measure(k, 0, 0.01, 2.0, LiftScheme::atoms_exact), k, coef);
    const auto x0 = lift_initial_curve(m.nodes(), InitialCurve::constant(0.3));
    std::vector<double> dts{1e-2, 5e-3, 2.5e-3}, gaps;
    for (double dt : dts) {
      cfg.dt = dt;
      const auto a = simulate_lifted(m, x0, OpenLoopControl::constant(0.5), cfg);
      const auto d = simulate_svie_direct(k, [](double) { return 0.3; }, OpenLoopControl::constant(0.5), coef, cfg);
      gaps.push_back(max_gap(a, d));
    }
    const double order = numerics::loglog_slope(dts, gaps);
    double C = 0.0;
    for (std::size_t i = 0; i < dts.size(); ++i) C = std::max(C, gaps[i] / dts[i]);
    o.detail << "finite spectrum C = " << C << ", order " << order;
    o.require(std::abs(order - 1.0) <= 0.25, "order about 1");
  }
  {
    const auto k = Kernel::riemann_liouville(0.75);
    const Coefficients coef{0.0, 1.0, 1.0};
    cfg.dt = 1e-3;
    cfg.n_paths = 20;
    const auto d = simulate_svie_direct(k, [](double) { return 0.0; }, OpenLoopControl::constant(0.5), coef, cfg,
                                        DirectWeights::cell_average);
    double prev = std::numeric_limits<double>::infinity();
    o.detail << "; RL gaps";
    for (int n : {10, 20, 40}) {
      const LiftedModel m(discretize_measure(k, n, 1e-5, 1.0), k, coef);
      const auto a = simulate_lifted(m, lift_initial_curve(m.nodes(), InitialCurve::constant(0.0)),
                                     OpenLoopControl::constant(0.5), cfg);
      const double g = max_gap(a, d);
      o.detail << " N=" << n << ":" << g;
      o.require(g < prev, "monotone in N");
      prev = g;
    }
  }
}

void verification(Outcome& o) {
  const auto t0 = Clock::now();
  const auto cfg = load_config(std::string(VCTL_SOURCE_DIR) + "/configs/rl075_linear.yaml");
  const auto model = cfg.build_model();
  const auto ham = cfg.build_hamiltonian();
  const auto vg = solve_hjb(model, cfg.hjb.source, ham, cfg.payoff, cfg.horizon, cfg.hjb.grids);
  auto sim = cfg.simulation.sim;
  sim.horizon = cfg.horizon;
  sim.store_paths = false;
  const auto rep = verify_optimality(model, vg, ham, cfg.payoff, cfg.initial_state(model), sim,
                                     default_alternatives(ham, cfg.horizon), cfg.verify.grid_tol);
  const double secs = seconds_since(t0);
  const bool in_ci = rep.v >= rep.optimal.ci_lo && rep.v <= rep.optimal.ci_hi;
  o.detail << "v = " << rep.v << ", J(u*) = " << rep.optimal.mean << " +- " << rep.optimal.std_err << " (n = "
           << rep.optimal.n << ")";
  o.require(rep.optimal.n >= 10000, ">= 1e4 paths");
  o.require(in_ci, "(a) v in the 95% CI");
  bool strict = true, identity = true;
  for (const auto& alt : rep.alternatives) {
    o.detail << "; " << alt.name << " J-v = " << alt.j_minus_v << " (" << alt.j_minus_v / alt.cost.std_err << " se)";
    strict = strict && alt.strict;
    identity = identity && alt.identity_ok;
  }
  o.require(strict, "(b) every alternative strictly worse");
  o.require(identity && rep.check_c, "(c) fundamental identity");
  o.detail << "; " << std::setprecision(3) << secs << " s";
  o.require(secs <= 120.0, "within 2 min");
}

void bel(Outcome& o) {
  const auto k = Kernel::riemann_liouville(0.75);
  const LiftedModel model(discretize_measure(k, 40, 1e-3, 1.0), k, Coefficients{0.0, 1.0, 0.5});
  const auto& nodes = model.nodes();
  std::vector<double> x(nodes.size()), dir(nodes.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = 0.1 * std::sin(1.0 + static_cast<double>(i));
    dir[i] = nodes.xi[i] * model.b();
  }
  double worst = 0.0;
  for (const Payoff& phi : {Payoff::tanh(1.0, 0.0, 1.0), Payoff::gaussian_bump(1.0, 0.2, 0.5), Payoff::quadratic(1.0, 0.1)}) {
    for (double t : {0.1, 0.5, 1.0}) {
      const double var = gramian(model, t);
      auto lifted = [&](double eps) {
        std::vector<double> z(x);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += eps * dir[i];
        return gaussian_smooth(phi, var, gamma_observe(nodes, semigroup_apply(nodes, t, z)), 64).value;
      };
      const double y = gamma_observe(nodes, semigroup_apply(nodes, t, x));
      const double weight = gaussian_smooth(phi, var, y, 64).derivative * model.lift_kernel(t) * model.b();
      const double h = 1e-4;
      const double fd = (lifted(h) - lifted(-h)) / (2.0 * h);
      worst = std::max(worst, std::abs(weight - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  o.detail << "max |BEL - FD| " << worst;
  o.require(worst <= 1e-6, "BEL within 1e-6");
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + VCTL_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void determinism(Outcome& o) {
  const fs::path root = fs::temp_directory_path() / "vctl_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path config = root / "run.yaml";
  std::ofstream(config) << "kernel: {family: riemann_liouville, alpha: 0.75}\n"
                           "coefficients: {c: -0.2, b: 1.0, g: 0.5}\n"
                           "horizon: 1.0\n"
                           "hamiltonian: {u_min: -1.0, u_max: 1.0}\n"
                           "payoff: {kind: linear, amplitude: 0.5}\n"
                           "lift: {n_nodes: 20, t_min: 1.0e-3}\n"
                           "hjb: {n_tau: 40, n_y: 60}\n"
                           "simulation: {dt: 0.01, n_paths: 400, seed: 5, direct: true, csv_paths: 50}\n"
                           "smoothing: {n_points: 50, min_energy_steps: 200}\n";
  const std::vector<std::string> subs{"kernel-info", "lift", "smoothing", "min-energy", "hjb-solve", "simulate", "verify"};
  std::size_t compared = 0;
  for (const auto& sub : subs) {
    std::vector<fs::path> dirs;
    for (const auto& [tag, threads] : std::vector<std::pair<std::string, int>>{{"a", 1}, {"b", 4}, {"c", 4}}) {
      const fs::path d = root / (sub + "_" + tag);
      const int rc = run_cli(sub + " --config \"" + config.string() + "\" --out \"" + d.string() + "\" --threads " +
                                 std::to_string(threads),
                             root / (sub + "_" + tag + ".log"));
      o.require(rc == 0, sub + " exit code " + std::to_string(rc));
      dirs.push_back(d);
    }
    for (const auto& e : fs::directory_iterator(dirs[0])) {
      if (e.path().extension() != ".csv") continue;
      const auto ref = slurp(e.path());
      for (std::size_t i = 1; i < dirs.size(); ++i) {
        const auto other = dirs[i] / e.path().filename();
        o.require(fs::exists(other) && slurp(other) == ref, sub + "/" + e.path().filename().string() + " identical");
      }
      ++compared;
    }
  }
  o.detail << compared << " CSV artifacts over " << subs.size() << " subcommands, threads 1/4/4";
  o.require(compared >= subs.size(), "every subcommand wrote CSVs");
}

}  // namespace

int main() {
  struct Item {
    const char* name;
    void (*fn)(Outcome&);
  };
  const std::vector<Item> items{{"smoothing law", smoothing_law},
                                {"minimum-energy isometry", min_energy},
                                {"growth ratio bound", growth_ratio},
                                {"resolvent", resolvent},
                                {"HJB oracles", hjb_oracles},
                                {"gradient singularity", gradient_singularity},
                                {"lift fidelity", lift_fidelity},
                                {"verification", verification},
                                {"BEL derivative", bel},
                                {"determinism", determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    Outcome o;
    o.detail << std::setprecision(6);
    const auto t0 = Clock::now();
    try {
      items[i].fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failed += o.pass ? 0 : 1;
    std::cout << "criterion " << (i + 1) << " " << (o.pass ? "PASS" : "FAIL") << "  " << items[i].name << ": "
              << o.detail.str() << "  (" << std::fixed << std::setprecision(1) << seconds_since(t0) << " s)"
              << std::defaultfloat << std::endl;
  }
  std::cout << (items.size() - failed) << "/" << items.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
