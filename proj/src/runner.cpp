#include "vctl/runner.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "vctl/config.hpp"
#include "vctl/control.hpp"
#include "vctl/errors.hpp"
#include "vctl/hjb.hpp"
#include "vctl/numerics.hpp"
#include "vctl/smoothing.hpp"

namespace fs = std::filesystem;

namespace vctl {

namespace {

constexpr int kSchemaVersion = 1;
constexpr const char* kVersion = "0.1.0";

struct Context {
  ExperimentConfig cfg;
  fs::path dir;
  std::vector<std::string> artifacts;
  const RunOptions& opt;
  std::ostream& log;
};

void full_precision(std::ostream& os) { os.precision(17); }

void write_file(Context& ctx, const std::string& name, const std::string& content, bool binary = false) {
  std::ofstream out(ctx.dir / name, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot write " + (ctx.dir / name).string());
  out << content;
  ctx.artifacts.push_back(name);
}

void write_json(Context& ctx, const std::string& name, const nlohmann::json& j) { write_file(ctx, name, j.dump(2) + "\n"); }

nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

// ------------------------------------------------------------------ stages

void kernel_info(Context& ctx) {
  const auto k = ctx.cfg.build_kernel();
  const double T = ctx.cfg.horizon;
  const auto grid = numerics::geomspace(1e-3 * T, T, 200);
  nlohmann::json j = k.to_json();
  j["k_infinity"] = k.k_infinity();
  const auto es = k.eta_star();
  j["eta_star"] = es ? num(*es) : nlohmann::json(nullptr);
  j["singularity_exponent"] = k.singularity_exponent();
  j["singular_at_zero"] = k.singular_at_zero();
  std::ostringstream csv;
  full_precision(csv);
  csv << "t,K,primitive,growth_ratio\n";
  double gmin = 1.0, gmax = 0.0;
  std::vector<double> kv;
  for (double t : grid) {
    const double g = k.growth_ratio(t);
    gmin = std::min(gmin, g);
    gmax = std::max(gmax, g);
    kv.push_back(k.eval(t));
    csv << t << ',' << kv.back() << ',' << k.primitive(t) << ',' << g << '\n';
  }
  j["growth_ratio"] = {{"min", gmin}, {"max", gmax}};
  const auto cm = cm_diagnostic(grid, kv, 3);
  j["cm_samples"] = {{"nonnegative", cm.nonnegative}, {"monotone", cm.monotone}, {"alternating", cm.alternating},
                     {"max_violation", cm.max_violation}};
  write_file(ctx, "kernel_samples.csv", csv.str());

  const double c = ctx.cfg.coef.c;
  if (c != 0.0) {
    const auto r = resolvent_kernel(k, c, grid);
    std::ostringstream rc;
    full_precision(rc);
    rc << "t,resolvent" << (r.exact ? ",exact" : "") << '\n';
    for (std::size_t i = 0; i < r.t.size(); ++i) {
      rc << r.t[i] << ',' << r.values[i];
      if (r.exact) rc << ',' << (*r.exact)[i];
      rc << '\n';
    }
    write_file(ctx, "resolvent.csv", rc.str());
    const auto rcm = cm_diagnostic(r.t, r.values, 3);
    j["resolvent"] = {{"c", c},
                      {"cm", {{"nonnegative", rcm.nonnegative}, {"monotone", rcm.monotone},
                              {"alternating", rcm.alternating}, {"max_violation", rcm.max_violation}}}};
  }
  write_json(ctx, "kernel.json", j);
}

void lift_stage(Context& ctx) {
  const auto model = ctx.cfg.build_model();
  const auto& n = model.nodes();
  std::ostringstream nodes;
  write_nodes_csv(nodes, n);
  write_file(ctx, "nodes.csv", nodes.str());
  std::ostringstream rc;
  full_precision(rc);
  rc << "t,K,K_lift,rel_error\n";
  for (double t : numerics::geomspace(n.t_min, n.t_max, 200)) {
    const double e = model.kernel().eval(t), l = reconstruct_kernel(n, t);
    rc << t << ',' << e << ',' << l << ',' << std::abs(l - e) / std::abs(e) << '\n';
  }
  write_file(ctx, "reconstruction.csv", rc.str());
  write_json(ctx, "lift.json",
             {{"n_nodes", n.size() - 1},
              {"t_min", n.t_min},
              {"t_max", n.t_max},
              {"certified_error", n.certified_error},
              {"tolerance", n.tolerance},
              {"flagged", n.flagged},
              {"trace_q", model.c() == 0.0 ? num(model.trace_q(ctx.cfg.horizon)) : nlohmann::json(nullptr)},
              {"eta", num(model.eta())},
              {"eta_prime", num(model.eta_prime())},
              {"nodes", nodes_to_json(n)}});
}

void smoothing_stage(Context& ctx) {
  const auto model = ctx.cfg.build_model();
  const auto& s = ctx.cfg.smoothing;
  const auto sys = scalar_system(model, KernelSource::exact, s.t_max);
  const auto grid = numerics::geomspace(s.t_min, s.t_max, static_cast<std::size_t>(s.n_points));
  const auto prof = smoothing_profile(sys, grid);
  std::ostringstream os;
  write_profile_csv(os, prof);
  write_file(ctx, "smoothing.csv", os.str());
  std::vector<double> absl;
  for (double v : prof.lambda_values) absl.push_back(std::abs(v));
  double gsup = 0.0;
  for (double t : grid) gsup = std::max(gsup, sys.kernel.growth_ratio(t));
  write_json(ctx, "smoothing.json",
             {{"kappa0", prof.kappa0},
              {"gamma_exponent", prof.gamma_exponent},
              {"lambda_exponent", numerics::loglog_slope(grid, absl)},
              {"universal_bound", gsup * std::abs(sys.b / sys.g)}});
}

void min_energy_stage(Context& ctx) {
  const auto model = ctx.cfg.build_model();
  const auto& s = ctx.cfg.smoothing;
  const double tmax = std::min(s.t_max, ctx.cfg.horizon);
  const auto sys = scalar_system(model, KernelSource::exact, tmax);
  std::ostringstream os;
  full_precision(os);
  os << "t,energy,lambda_k,ansatz_energy,relative_gap\n";
  double worst = 0.0;
  bool dominated = true;
  for (double t : numerics::geomspace(std::min(s.t_min, 0.5 * tmax), tmax, 20)) {
    const auto v = min_energy_control(sys, t, s.k, s.min_energy_steps);
    const double lk = std::abs(lambda_op(sys, t) * s.k), a = constant_ansatz_energy(sys, t, s.k);
    const double gap = std::abs(v.energy - lk) / lk;
    worst = std::max(worst, gap);
    dominated = dominated && a >= v.energy;
    os << t << ',' << v.energy << ',' << lk << ',' << a << ',' << gap << '\n';
  }
  write_file(ctx, "min_energy.csv", os.str());
  const auto v = min_energy_control(sys, tmax, s.k, s.min_energy_steps);
  std::ostringstream vc;
  full_precision(vc);
  vc << "s_left,s_right,v\n";
  for (std::size_t i = 0; i < v.values.size(); ++i) vc << v.times[i] << ',' << v.times[i + 1] << ',' << v.values[i] << '\n';
  write_file(ctx, "virtual_control.csv", vc.str());
  write_json(ctx, "min_energy.json",
             {{"max_relative_gap", worst}, {"ansatz_dominates", dominated}, {"grading", v.grading}, {"t", tmax}});
}

double initial_observation(const LiftedModel& model, const LiftedState& x0, double T) {
  const auto row = model.observation_row(T);
  double y = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) y += row[i] * x0[i];
  return y;
}

ValueGrid solve_value(Context& ctx, const LiftedModel& model, const LiftedState& x0) {
  auto grids = ctx.cfg.hjb.grids;
  grids.y_center = initial_observation(model, x0, ctx.cfg.horizon);
  return solve_hjb(model, ctx.cfg.hjb.source, ctx.cfg.build_hamiltonian(), ctx.cfg.payoff, ctx.cfg.horizon, grids);
}

ValueGrid value_for(Context& ctx, const LiftedModel& model, const LiftedState& x0) {
  fs::path snap = ctx.opt.value_snapshot ? fs::path(*ctx.opt.value_snapshot) : ctx.dir / "value.vgs";
  if (fs::exists(snap)) {
    std::ifstream in(snap, std::ios::binary);
    auto vg = read_value_snapshot(in);
    if (std::abs(vg.horizon - ctx.cfg.horizon) > 1e-12) throw PreconditionError("value snapshot horizon mismatch");
    ctx.log << "using value grid " << snap.string() << "\n";
    return vg;
  }
  return solve_value(ctx, model, x0);
}

void hjb_stage(Context& ctx) {
  const auto model = ctx.cfg.build_model();
  const auto x0 = ctx.cfg.initial_state(model);
  const auto vg = solve_value(ctx, model, x0);
  std::ostringstream csv;
  write_value_csv(csv, vg);
  write_file(ctx, "value.csv", csv.str());
  std::ostringstream bin(std::ios::binary);
  write_value_snapshot(bin, vg);
  write_file(ctx, "value.vgs", bin.str(), true);

  const auto sys = scalar_system(model, ctx.cfg.hjb.source, ctx.cfg.horizon);
  std::ostringstream gc;
  full_precision(gc);
  gc << "tau,sup_df,sup_grad_B,sup_d2f_KB\n";
  std::vector<double> ts, ss, t2, s2;
  for (std::size_t k = 1; k < vg.n_tau(); ++k) {
    const auto row = vg.df_row(k);
    double m = 0.0, m2 = 0.0;
    for (double d : row) m = std::max(m, std::abs(d));
    for (std::size_t j = 1; j + 1 < row.size(); ++j) m2 = std::max(m2, std::abs(row[j + 1] - row[j - 1]) / (2.0 * vg.dy));
    const double kb = std::abs(sys.kernel.eval(vg.tau[k]) * sys.b);
    gc << vg.tau[k] << ',' << m << ',' << m * kb << ',' << m2 * kb << '\n';
    if (vg.tau[k] <= 0.1 * ctx.cfg.horizon) {
      if (m > 0.0) {
        ts.push_back(vg.tau[k]);
        ss.push_back(m);
      }
      if (m2 * kb > 0.0) {
        t2.push_back(vg.tau[k]);
        s2.push_back(m2 * kb);
      }
    }
  }
  write_file(ctx, "gradient.csv", gc.str());
  const double y0 = initial_observation(model, x0, ctx.cfg.horizon);
  const std::size_t N = vg.n_tau() - 1;
  const std::vector<std::size_t> rows{N / 4, N / 2, N, N};
  const std::vector<double> ys{y0, y0, y0, y0 + 0.5 * std::sqrt(vg.gramian[N])};
  nlohmann::json j{{"n_tau", vg.n_tau()},
                   {"n_y", vg.n_y},
                   {"y_min", vg.y_min},
                   {"y_max", vg.y_max()},
                   {"y0", y0},
                   {"v0", vg.f_at(ctx.cfg.horizon, y0)},
                   {"kernel_source", ctx.cfg.hjb.source == KernelSource::lift ? "lift" : "exact"},
                   {"metadata", vg.metadata},
                   {"mild_residual", mild_residual(vg, sys, ctx.cfg.build_hamiltonian(), rows, ys)}};
  j["gradient_exponent"] = ts.size() >= 2 ? num(numerics::loglog_slope(ts, ss)) : nlohmann::json(nullptr);
  j["second_derivative_exponent"] = t2.size() >= 2 ? num(numerics::loglog_slope(t2, s2)) : nlohmann::json(nullptr);
  write_json(ctx, "hjb.json", j);
}

nlohmann::json cost_json(const CostEstimate& c) {
  return {{"mean", c.mean}, {"std_err", c.std_err}, {"ci95", {c.ci_lo, c.ci_hi}}, {"n", c.n}};
}

void simulate_stage(Context& ctx) {
  const auto model = ctx.cfg.build_model();
  const auto x0 = ctx.cfg.initial_state(model);
  const auto ham = ctx.cfg.build_hamiltonian();
  const auto& spec = ctx.cfg.simulation;
  auto sim = spec.sim;
  PathBatch batch;
  nlohmann::json j;
  if (spec.control) {
    batch = simulate_lifted(model, x0, *spec.control, sim);
    j["control"] = spec.control->to_json();
  } else {
    const auto vg = value_for(ctx, model, x0);
    batch = simulate_closed_loop(model, vg, ham, x0, sim);
    j["control"] = "feedback";
  }
  std::ostringstream os;
  write_paths_csv(os, batch, spec.csv_paths);
  write_file(ctx, "paths.csv", os.str());
  j["n_paths"] = batch.n_paths;
  j["n_steps"] = batch.n_steps();
  j["excluded"] = batch.n_excluded;
  j["cost"] = cost_json(estimate_cost(batch, ham, ctx.cfg.payoff));
  const auto ty = numerics::mean_stats(batch.terminal_y);
  j["terminal_y"] = {{"mean", ty.mean}, {"std_err", ty.std_err}};

  if (spec.direct && spec.control) {
    const auto kernel = model.kernel();
    const auto& nodes = model.nodes();
    std::function<double(double)> z;
    switch (ctx.cfg.initial.kind) {
      case InitialCurve::Kind::constant: {
        const double v = ctx.cfg.initial.value;
        z = [v](double) { return v; };
        break;
      }
      case InitialCurve::Kind::kernel_shaped: {
        const double v = ctx.cfg.initial.value;
        z = [v, kernel](double t) { return t > 0.0 ? v * kernel.eval(t) : v * kernel.eval(1e-12); };
        break;
      }
      case InitialCurve::Kind::explicit_vector:
        z = [&nodes, &x0](double t) { return gamma_observe(nodes, semigroup_apply(nodes, t, x0)); };
        break;
    }
    const auto d = simulate_svie_direct(kernel, z, *spec.control, model.coefficients(), sim, spec.direct_weights);
    std::ostringstream ds;
    write_paths_csv(ds, d, spec.csv_paths);
    write_file(ctx, "direct_paths.csv", ds.str());
    double gap = 0.0;
    for (std::size_t i = 0; i < d.observed.size(); ++i)
      if (!batch.excluded[i / d.times.size()]) gap = std::max(gap, std::abs(d.observed[i] - batch.observed[i]));
    j["direct"] = {{"max_pathwise_gap", gap}, {"gap_over_dt", gap / sim.step()}};
  }
  write_json(ctx, "simulate.json", j);
}

bool verify_stage(Context& ctx) {
  const auto model = ctx.cfg.build_model();
  const auto x0 = ctx.cfg.initial_state(model);
  const auto ham = ctx.cfg.build_hamiltonian();
  const auto vg = value_for(ctx, model, x0);
  const auto alts = ctx.cfg.verify.alternatives.empty() ? default_alternatives(ham, ctx.cfg.horizon)
                                                        : ctx.cfg.verify.alternatives;
  const auto rep =
      verify_optimality(model, vg, ham, ctx.cfg.payoff, x0, ctx.cfg.simulation.sim, alts, ctx.cfg.verify.grid_tol);
  write_json(ctx, "verify.json", rep.to_json());
  ctx.log << "verify: v=" << rep.v << " J*=" << rep.optimal.mean << " +- " << rep.optimal.std_err
          << (rep.passed() ? " PASS" : " FAIL") << "\n";
  return rep.passed();
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

nlohmann::json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

void update_run_info(const fs::path& dir, const std::string& name, const nlohmann::json& entry) {
  nlohmann::json info = nlohmann::json::object();
  const auto p = dir / "run_info.json";
  if (fs::exists(p)) {
    try {
      info = read_json_file(p);
    } catch (const std::exception&) {
      info = nlohmann::json::object();
    }
  }
  info[name] = entry;
  std::ofstream(p) << info.dump(2) << "\n";
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"kernel-info", "lift",     "smoothing", "min-energy",
                                              "hjb-solve",   "simulate", "verify"};
  return names;
}

int run_subcommand(const std::string& name, const RunOptions& opt, std::ostream& log, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(opt.config_path);
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return exit_config;
  }
  if (opt.seed) cfg.simulation.sim.seed = *opt.seed;
  if (opt.threads) {
    if (*opt.threads < 1) {
      err << "--threads must be >= 1\n";
      return exit_config;
    }
    omp_set_num_threads(*opt.threads);
  }
  const fs::path dir = opt.out_dir ? fs::path(*opt.out_dir) : fs::path(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    err << "cannot create output directory " << dir.string() << ": " << ec.message() << "\n";
    return exit_config;
  }
  Context ctx{cfg, dir, {}, opt, log};
  const auto start = std::chrono::steady_clock::now();
  const std::string started = timestamp();
  int code = exit_ok;
  try {
    if (name == "kernel-info") kernel_info(ctx);
    else if (name == "lift") lift_stage(ctx);
    else if (name == "smoothing") smoothing_stage(ctx);
    else if (name == "min-energy") min_energy_stage(ctx);
    else if (name == "hjb-solve") hjb_stage(ctx);
    else if (name == "simulate") simulate_stage(ctx);
    else if (name == "verify") code = verify_stage(ctx) ? exit_ok : exit_numeric;
    else {
      err << "unknown subcommand '" << name << "'\n";
      return exit_config;
    }
  } catch (const PreconditionError& e) {
    err << cfg.source << ": invalid model: " << e.what() << "\n";
    return exit_config;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    std::ofstream(dir / "error.json") << nlohmann::json{{"subcommand", name}, {"error", e.what()},
                                                          {"diagnostic", e.diagnostic()}}
                                                .dump(2)
                                         << "\n";
    return exit_numeric;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    std::ofstream(dir / "error.json") << nlohmann::json{{"subcommand", name}, {"error", e.what()}}.dump(2) << "\n";
    return exit_numeric;
  }
  nlohmann::json manifest{{"schema_version", kSchemaVersion},
                          {"version", kVersion},
                          {"subcommand", name},
                          {"config_hash", config_hash(cfg)},
                          {"seed", cfg.simulation.sim.seed},
                          {"config", cfg.canonical()},
                          {"artifacts", ctx.artifacts},
                          {"exit_code", code}};
  std::ofstream(dir / (name + ".manifest.json")) << manifest.dump(2) << "\n";
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  update_run_info(dir, name, {{"started", started}, {"finished", timestamp()}, {"seconds", secs},
                              {"threads", omp_get_max_threads()}});
  log << name << ": wrote " << ctx.artifacts.size() << " artifacts to " << dir.string() << "\n";
  return code;
}

namespace {

std::map<std::string, std::vector<double>> read_csv_columns(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::map<std::string, std::vector<double>> cols;
  std::vector<std::string> names;
  if (!std::getline(in, line)) return cols;
  std::stringstream hs(line);
  for (std::string n; std::getline(hs, n, ',');) names.push_back(n);
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string cell;
    for (std::size_t i = 0; i < names.size() && std::getline(ls, cell, ','); ++i)
      if (!cell.empty()) cols[names[i]].push_back(std::stod(cell));
  }
  return cols;
}

}  // namespace

int emit_report(const std::string& dir_name, std::ostream& log, std::ostream& err) {
  const fs::path dir(dir_name);
  if (!fs::is_directory(dir)) {
    err << "report: " << dir_name << " is not a directory\n";
    return exit_config;
  }
  bool any = false;
  for (const auto& s : subcommands()) any = any || fs::exists(dir / (s + ".manifest.json"));
  if (!any) {
    err << "report: no run artifacts in " << dir_name << "\n";
    return exit_config;
  }
  nlohmann::json rep{{"schema_version", kSchemaVersion}, {"version", kVersion}};
  std::vector<std::pair<std::string, double>> fits;
  try {
    nlohmann::json runs = nlohmann::json::object();
    for (const auto& s : subcommands()) {
      const auto p = dir / (s + ".manifest.json");
      if (!fs::exists(p)) continue;
      const auto m = read_json_file(p);
      runs[s] = {{"config_hash", m.at("config_hash")}, {"exit_code", m.at("exit_code")}};
    }
    rep["runs"] = runs;
    if (fs::exists(dir / "kernel.json")) {
      const auto k = read_json_file(dir / "kernel.json");
      rep["kernel"] = {{"family", k.at("family")}, {"eta_star", k.at("eta_star")}, {"growth_ratio", k.at("growth_ratio")}};
    }
    if (fs::exists(dir / "smoothing.csv")) {
      auto c = read_csv_columns(dir / "smoothing.csv");
      std::vector<double> absl;
      for (double v : c.at("lambda")) absl.push_back(std::abs(v));
      const double slope = numerics::loglog_slope(c.at("t"), absl);
      double lo = c.at("lambda_sqrt_t").front(), hi = lo;
      for (double v : c.at("lambda_sqrt_t")) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      rep["smoothing"] = {{"lambda_exponent", slope}, {"lambda_sqrt_t_min", lo}, {"lambda_sqrt_t_max", hi}};
      fits.emplace_back("lambda_exponent", slope);
    }
    if (fs::exists(dir / "min_energy.json")) {
      const auto m = read_json_file(dir / "min_energy.json");
      rep["min_energy"] = m;
      fits.emplace_back("min_energy_max_relative_gap", m.at("max_relative_gap").get<double>());
    }
    if (fs::exists(dir / "lift.json")) {
      const auto l = read_json_file(dir / "lift.json");
      rep["lift"] = {{"n_nodes", l.at("n_nodes")}, {"certified_error", l.at("certified_error")}, {"flagged", l.at("flagged")}};
      fits.emplace_back("lift_certified_error", l.at("certified_error").get<double>());
    }
    if (fs::exists(dir / "hjb.json")) {
      const auto h = read_json_file(dir / "hjb.json");
      rep["hjb"] = {{"v0", h.at("v0")}, {"gradient_exponent", h.at("gradient_exponent")},
                    {"second_derivative_exponent", h.value("second_derivative_exponent", nlohmann::json(nullptr))},
                    {"mild_residual", h.at("mild_residual")}};
      for (const char* key : {"gradient_exponent", "second_derivative_exponent"})
        if (h.contains(key) && h.at(key).is_number()) fits.emplace_back(key, h.at(key).get<double>());
      fits.emplace_back("mild_residual", h.at("mild_residual").get<double>());
    }
    if (fs::exists(dir / "simulate.json")) rep["simulate"] = read_json_file(dir / "simulate.json");
    if (fs::exists(dir / "verify.json")) {
      const auto v = read_json_file(dir / "verify.json");
      nlohmann::json alts = nlohmann::json::array();
      for (const auto& a : v.at("alternatives")) {
        alts.push_back({{"name", a.at("name")}, {"j_minus_v", a.at("j_minus_v")}, {"margin_over_2se", a.at("margin_over_2se")},
                        {"identity_error", a.at("identity_error")}, {"identity_tol", a.at("identity_tol")}});
        fits.emplace_back("j_minus_v:" + a.at("name").get<std::string>(), a.at("j_minus_v").get<double>());
      }
      rep["verify"] = {{"v", v.at("v")}, {"optimal", v.at("optimal")}, {"checks", v.at("checks")}, {"alternatives", alts}};
    }
  } catch (const std::exception& e) {
    err << "report: malformed artifact: " << e.what() << "\n";
    return exit_config;
  }
  std::ofstream(dir / "report.json") << rep.dump(2) << "\n";
  std::ofstream csv(dir / "report_fits.csv");
  csv.precision(17);
  csv << "quantity,value\n";
  for (const auto& [k, v] : fits) csv << k << ',' << v << '\n';
  log << "report: wrote report.json and report_fits.csv to " << dir.string() << "\n";
  return exit_ok;
}

}  // namespace vctl
