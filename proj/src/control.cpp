#include "vctl/control.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <random>

#include "vctl/errors.hpp"

namespace vctl {

std::size_t SimConfig::n_steps() const {
  if (!(horizon > 0.0)) throw PreconditionError("SimConfig: horizon must be > 0");
  if (!(dt > 0.0) || !(dt < horizon)) throw PreconditionError("SimConfig: need 0 < dt < T");
  if (n_paths == 0) throw PreconditionError("SimConfig: n_paths must be >= 1");
  return static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
}

OpenLoopControl OpenLoopControl::constant(double u) {
  return {"constant(" + nlohmann::json(u).dump() + ")", {0.0}, {u}};
}

OpenLoopControl OpenLoopControl::bang_bang(double first, double second, double t_switch) {
  if (!(t_switch > 0.0)) throw PreconditionError("bang_bang: switch time must be > 0");
  return {"bang_bang(" + nlohmann::json(first).dump() + "," + nlohmann::json(second).dump() + ")",
          {0.0, t_switch},
          {first, second}};
}

OpenLoopControl OpenLoopControl::piecewise(std::vector<double> times, std::vector<double> values) {
  if (times.empty() || times.size() != values.size()) throw PreconditionError("piecewise: times and values must match");
  if (times[0] != 0.0) throw PreconditionError("piecewise: first time must be 0");
  if (!std::is_sorted(times.begin(), times.end())) throw PreconditionError("piecewise: times must be ascending");
  return {"piecewise", std::move(times), std::move(values)};
}

double OpenLoopControl::operator()(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  const auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, std::distance(times.begin(), it) - 1));
  return values[i];
}

nlohmann::json OpenLoopControl::to_json() const { return {{"name", name}, {"times", times}, {"values", values}}; }

OpenLoopControl OpenLoopControl::from_json(const nlohmann::json& j) {
  auto c = piecewise(j.at("times").get<std::vector<double>>(), j.at("values").get<std::vector<double>>());
  c.name = j.value("name", std::string("piecewise"));
  return c;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t path_seed(std::uint64_t seed, std::size_t path) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(path)));
}

namespace {

class Noise {
 public:
  Noise(std::uint64_t seed, std::size_t path, double dt) : rng_(path_seed(seed, path)), sd_(std::sqrt(dt)) {}
  double next() { return sd_ * n01_(rng_); }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> n01_;
  double sd_;
};

struct Stepper {
  std::vector<double> decay, gain, m;
  double b, c, g, dt;

  Stepper(const LiftNodes& nodes, const Coefficients& coef, double dt_, Scheme scheme)
      : decay(nodes.size()), gain(nodes.size()), m(nodes.m), b(coef.b), c(coef.c), g(coef.g), dt(dt_) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double z = nodes.x[i] * dt;
      if (scheme == Scheme::exp_euler) {
        decay[i] = std::exp(-z);
        gain[i] = nodes.xi[i] * (z == 0.0 ? 1.0 : -std::expm1(-z) / z);
      } else {
        decay[i] = 1.0 - z;
        gain[i] = nodes.xi[i];
      }
    }
  }

  double observe(std::span<const double> X) const {
    double y = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) y += m[i] * X[i];
    return y;
  }

  void advance(std::span<double> X, double y, double u, double dW) const {
    const double inc = (b * u + c * y) * dt + g * dW;
    for (std::size_t i = 0; i < X.size(); ++i) X[i] = decay[i] * X[i] + gain[i] * inc;
  }
};

// Per-step decision: returns u, and sets p when a gradient is available.
// Throws DomainCoverageError when the path leaves the value grid.
using Decide = std::function<double(std::size_t k, std::span<const double> X, std::optional<double>& p)>;

PathBatch make_batch(const SimConfig& cfg, bool lifted) {
  PathBatch batch;
  const std::size_t n = cfg.n_steps();
  const double dt = cfg.step();
  batch.times.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) batch.times[k] = dt * static_cast<double>(k);
  batch.times[n] = cfg.horizon;
  batch.n_paths = cfg.n_paths;
  if (cfg.store_paths) {
    batch.observed.assign(cfg.n_paths * (n + 1), 0.0);
    batch.controls.assign(cfg.n_paths * n, 0.0);
  }
  if (lifted) batch.terminal_states.resize(cfg.n_paths);
  batch.terminal_y.assign(cfg.n_paths, 0.0);
  batch.excluded.assign(cfg.n_paths, 0);
  return batch;
}

template <class PathFn>
void for_each_path(const SimConfig& cfg, PathFn&& fn) {
  const auto n = static_cast<std::ptrdiff_t>(cfg.n_paths);
  if (cfg.execution == Execution::serial) {
    for (std::ptrdiff_t p = 0; p < n; ++p) fn(static_cast<std::size_t>(p));
    return;
  }
  std::exception_ptr err;
  std::mutex mu;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    try {
      fn(static_cast<std::size_t>(p));
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

PathBatch run_lifted(const LiftNodes& nodes, const Coefficients& coef, const LiftedState& xi_z, const SimConfig& cfg,
                     const Decide& decide, const Hamiltonian* ham, bool record_gaps) {
  if (xi_z.size() != nodes.size()) throw PreconditionError("simulate_lifted: initial state does not match nodes");
  PathBatch batch = make_batch(cfg, true);
  const std::size_t n = batch.n_steps();
  const double dt = cfg.step();
  const Stepper st(nodes, coef, dt, cfg.scheme);
  if (ham) batch.running_cost.assign(cfg.n_paths, 0.0);
  if (record_gaps) batch.gaps.assign(cfg.n_paths, 0.0);

  for_each_path(cfg, [&](std::size_t path) {
    Noise noise(cfg.seed, path, dt);
    LiftedState X = xi_z;
    double run = 0.0, gap = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double y = st.observe(X);
      std::optional<double> p;
      double u;
      try {
        u = decide(k, X, p);
      } catch (const DomainCoverageError&) {
        batch.excluded[path] = 1;
        return;
      }
      const double dW = noise.next();
      if (cfg.store_paths) {
        batch.observed[path * (n + 1) + k] = y;
        batch.controls[path * n + k] = u;
      }
      if (ham) {
        run += ham->cost(u) * dt;
        if (p) gap += (ham->h_cv(*p, u) - ham->h_min(*p)) * dt;
      }
      st.advance(X, y, u, dW);
      for (double v : X)
        if (!std::isfinite(v)) throw NumericError("simulate_lifted: state overflow", "path=" + std::to_string(path));
    }
    const double yT = st.observe(X);
    if (cfg.store_paths) batch.observed[path * (n + 1) + n] = yT;
    batch.terminal_y[path] = yT;
    batch.terminal_states[path] = std::move(X);
    if (ham) batch.running_cost[path] = run;
    if (record_gaps) batch.gaps[path] = gap;
  });
  batch.n_excluded = static_cast<std::size_t>(std::count(batch.excluded.begin(), batch.excluded.end(), 1));
  return batch;
}

// Observation rows and kernel factors per step for a value-grid lookup.
struct GradientTable {
  std::vector<std::vector<double>> rows;
  std::vector<double> factor;
  std::vector<double> tau;
  const ValueGrid* vg;
  double b;

  GradientTable(const LiftedModel& model, const ValueGrid& grid, const SimConfig& cfg) : vg(&grid), b(model.b()) {
    if (std::abs(grid.horizon - cfg.horizon) > 1e-12 * cfg.horizon)
      throw PreconditionError("value grid horizon does not match the simulation horizon");
    const std::size_t n = cfg.n_steps();
    const double dt = cfg.step();
    rows.resize(n);
    factor.resize(n);
    tau.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      tau[k] = cfg.horizon - dt * static_cast<double>(k);
      rows[k] = model.observation_row(tau[k]);
      double f = 0.0;
      for (std::size_t i = 0; i < rows[k].size(); ++i) f += rows[k][i] * model.nodes().xi[i];
      factor[k] = f;
    }
  }

  double operator()(std::size_t k, std::span<const double> X) const {
    double y = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) y += rows[k][i] * X[i];
    return gradient_B(*vg, tau[k], y, factor[k], b);
  }
};

}  // namespace

PathBatch simulate_lifted(const LiftNodes& nodes, const Coefficients& coef, const LiftedState& xi_z,
                          const OpenLoopControl& control, const SimConfig& cfg) {
  const double dt = cfg.step();
  const Decide decide = [&](std::size_t k, std::span<const double>, std::optional<double>&) {
    return control(dt * static_cast<double>(k));
  };
  return run_lifted(nodes, coef, xi_z, cfg, decide, nullptr, false);
}

PathBatch simulate_lifted(const LiftedModel& model, const LiftedState& xi_z, const OpenLoopControl& control,
                          const SimConfig& cfg) {
  return simulate_lifted(model.nodes(), model.coefficients(), xi_z, control, cfg);
}

PathBatch simulate_lifted(const LiftedModel& model, const LiftedState& xi_z, const OpenLoopControl& control,
                          const SimConfig& cfg, const ValueGrid& vg, const Hamiltonian& ham) {
  const GradientTable grad(model, vg, cfg);
  const double dt = cfg.step();
  const Decide decide = [&](std::size_t k, std::span<const double> X, std::optional<double>& p) {
    p = grad(k, X);
    return control(dt * static_cast<double>(k));
  };
  return run_lifted(model.nodes(), model.coefficients(), xi_z, cfg, decide, &ham, true);
}

PathBatch simulate_closed_loop(const LiftedModel& model, const ValueGrid& vg, const Hamiltonian& ham,
                               const LiftedState& xi_z, const SimConfig& cfg) {
  const GradientTable grad(model, vg, cfg);
  const Decide decide = [&](std::size_t k, std::span<const double> X, std::optional<double>& p) {
    p = grad(k, X);
    return ham.select(*p);
  };
  return run_lifted(model.nodes(), model.coefficients(), xi_z, cfg, decide, &ham, true);
}

PathBatch simulate_svie_direct(const Kernel& kernel, const std::function<double(double)>& z_curve,
                               const OpenLoopControl& control, const Coefficients& coef, const SimConfig& cfg,
                               DirectWeights weights) {
  PathBatch batch = make_batch(cfg, false);
  const std::size_t n = batch.n_steps();
  const double dt = cfg.step();
  std::vector<double> w(n + 1, 0.0), z(n + 1), u(n);
  w[1] = kernel.primitive(dt) / dt;
  for (std::size_t m = 2; m <= n; ++m) {
    const double t = dt * static_cast<double>(m);
    w[m] = weights == DirectWeights::endpoint ? kernel.eval(t) : kernel.integral(t - dt, t) / dt;
  }
  for (std::size_t k = 0; k <= n; ++k) z[k] = z_curve(batch.times[k]);
  for (std::size_t k = 0; k < n; ++k) u[k] = control(batch.times[k]);

  for_each_path(cfg, [&](std::size_t path) {
    Noise noise(cfg.seed, path, dt);
    std::vector<double> y(n + 1), inc(n);
    for (std::size_t k = 0; k <= n; ++k) {
      double acc = z[k];
      for (std::size_t j = 0; j < k; ++j) acc += w[k - j] * inc[j];
      y[k] = acc;
      if (k < n) inc[k] = (coef.c * y[k] + coef.b * u[k]) * dt + coef.g * noise.next();
    }
    if (cfg.store_paths) {
      std::copy(y.begin(), y.end(), batch.observed.begin() + static_cast<std::ptrdiff_t>(path * (n + 1)));
      std::copy(u.begin(), u.end(), batch.controls.begin() + static_cast<std::ptrdiff_t>(path * n));
    }
    batch.terminal_y[path] = y[n];
  });
  return batch;
}

std::vector<double> path_costs(const PathBatch& batch, const Hamiltonian& ham, const Payoff& phi) {
  const std::size_t n = batch.n_steps();
  const bool from_rows = !batch.controls.empty();
  if (!from_rows && batch.running_cost.empty())
    throw PreconditionError("path_costs: batch has neither control rows nor running costs");
  std::vector<double> out;
  out.reserve(batch.n_paths);
  for (std::size_t p = 0; p < batch.n_paths; ++p) {
    if (batch.excluded[p]) continue;
    double run = 0.0;
    if (from_rows) {
      for (std::size_t k = 0; k < n; ++k) run += ham.cost(batch.u(p, k)) * (batch.times[k + 1] - batch.times[k]);
    } else {
      run = batch.running_cost[p];
    }
    out.push_back(run + phi(batch.terminal_y[p]));
  }
  return out;
}

CostEstimate estimate_cost(const PathBatch& batch, const Hamiltonian& ham, const Payoff& phi) {
  const auto c = path_costs(batch, ham, phi);
  if (c.empty()) throw PreconditionError("estimate_cost: no usable paths");
  const auto s = numerics::mean_stats(c);
  return {s.mean, s.std_err, s.mean - 1.96 * s.std_err, s.mean + 1.96 * s.std_err, c.size()};
}

std::vector<OpenLoopControl> default_alternatives(const Hamiltonian& ham, double T) {
  std::vector<OpenLoopControl> out{OpenLoopControl::constant(ham.u_min()), OpenLoopControl::constant(ham.u_max())};
  if (ham.contains(0.0) && ham.u_min() != 0.0 && ham.u_max() != 0.0) out.push_back(OpenLoopControl::constant(0.0));
  if (!ham.singleton()) {
    out.push_back(OpenLoopControl::bang_bang(ham.u_min(), ham.u_max(), 0.5 * T));
    out.push_back(OpenLoopControl::bang_bang(ham.u_max(), ham.u_min(), 0.5 * T));
  } else {
    out.pop_back();
  }
  return out;
}

namespace {

numerics::MeanStats kept_stats(const PathBatch& batch, const std::vector<double>& v) {
  std::vector<double> kept;
  kept.reserve(v.size());
  for (std::size_t p = 0; p < v.size(); ++p)
    if (!batch.excluded[p]) kept.push_back(v[p]);
  return numerics::mean_stats(kept);
}

}  // namespace

VerificationReport verify_optimality(const LiftedModel& model, const ValueGrid& vg, const Hamiltonian& ham,
                                     const Payoff& phi, const LiftedState& xi_z, const SimConfig& cfg,
                                     const std::vector<OpenLoopControl>& alternatives, double grid_tol) {
  VerificationReport rep;
  rep.grid_tol = grid_tol;
  const auto row = model.observation_row(cfg.horizon);
  for (std::size_t i = 0; i < row.size(); ++i) rep.y0 += row[i] * xi_z[i];
  rep.v = vg.f_at(cfg.horizon, rep.y0);

  SimConfig light = cfg;
  light.store_paths = false;
  const auto star = simulate_closed_loop(model, vg, ham, xi_z, light);
  rep.optimal = estimate_cost(star, ham, phi);
  rep.optimal_gap = kept_stats(star, star.gaps);
  rep.excluded = star.n_excluded;
  rep.margin_b = 3.0 * rep.optimal.std_err + grid_tol - std::abs(rep.v - rep.optimal.mean);
  rep.check_b = rep.margin_b >= 0.0;
  const double star_err = std::abs(rep.optimal.mean - rep.v - rep.optimal_gap.mean);
  const double star_tol =
      3.0 * std::hypot(rep.optimal.std_err, rep.optimal_gap.std_err) + grid_tol;
  rep.check_c = star_err <= star_tol;

  rep.check_a = true;
  for (const auto& alt : alternatives) {
    const auto batch = simulate_lifted(model, xi_z, alt, light, vg, ham);
    AlternativeResult r;
    r.name = alt.name;
    r.cost = estimate_cost(batch, ham, phi);
    r.gap = kept_stats(batch, batch.gaps);
    r.j_minus_v = r.cost.mean - rep.v;
    r.ordered = r.cost.mean + 3.0 * r.cost.std_err + grid_tol >= rep.v;
    r.strict = r.j_minus_v > 2.0 * r.cost.std_err;
    r.identity_error = std::abs(r.j_minus_v - r.gap.mean);
    r.identity_tol = 3.0 * std::hypot(r.cost.std_err, r.gap.std_err) + grid_tol;
    r.identity_ok = r.identity_error <= r.identity_tol;
    rep.check_a = rep.check_a && r.ordered;
    rep.check_c = rep.check_c && r.identity_ok;
    rep.excluded += batch.n_excluded;
    rep.alternatives.push_back(std::move(r));
  }
  return rep;
}

nlohmann::json VerificationReport::to_json() const {
  auto cost_json = [](const CostEstimate& c) {
    return nlohmann::json{{"mean", c.mean}, {"std_err", c.std_err}, {"ci95", {c.ci_lo, c.ci_hi}}, {"n", c.n}};
  };
  nlohmann::json j;
  j["v"] = v;
  j["y0"] = y0;
  j["optimal"] = cost_json(optimal);
  j["optimal_gap"] = {{"mean", optimal_gap.mean}, {"std_err", optimal_gap.std_err}};
  j["excluded_paths"] = excluded;
  j["grid_tol"] = grid_tol;
  j["checks"] = {{"ordering", check_a}, {"value_match", check_b}, {"value_match_margin", margin_b},
                 {"fundamental_identity", check_c}, {"passed", passed()}};
  auto& alts = j["alternatives"] = nlohmann::json::array();
  for (const auto& a : alternatives) {
    alts.push_back({{"name", a.name},
                    {"cost", cost_json(a.cost)},
                    {"gap", {{"mean", a.gap.mean}, {"std_err", a.gap.std_err}}},
                    {"j_minus_v", a.j_minus_v},
                    {"margin_over_2se", a.j_minus_v - 2.0 * a.cost.std_err},
                    {"ordered", a.ordered},
                    {"strict", a.strict},
                    {"identity_error", a.identity_error},
                    {"identity_tol", a.identity_tol},
                    {"identity_ok", a.identity_ok}});
  }
  return j;
}

void write_paths_csv(std::ostream& os, const PathBatch& batch, std::size_t max_paths) {
  if (batch.observed.empty()) throw PreconditionError("write_paths_csv: batch does not store paths");
  const auto old = os.precision(17);
  const std::size_t n = batch.n_steps();
  os << "path,t,y,u\n";
  for (std::size_t p = 0; p < std::min(max_paths, batch.n_paths); ++p) {
    if (batch.excluded[p]) continue;
    for (std::size_t k = 0; k <= n; ++k) {
      os << p << ',' << batch.times[k] << ',' << batch.y(p, k) << ',';
      if (k < n) os << batch.u(p, k);
      os << '\n';
    }
  }
  os.precision(old);
}

}  // namespace vctl
