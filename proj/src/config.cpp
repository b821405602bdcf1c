#include "vctl/config.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "vctl/errors.hpp"

namespace vctl {

namespace {

std::string where(const std::string& src, const YAML::Mark& m) {
  if (m.line < 0) return src + ":?:?";
  return src + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
}

// Mapping reader that rejects keys it was never asked about.
class Section {
 public:
  Section(YAML::Node node, std::string path, const std::string& src) : node_(node), path_(std::move(path)), src_(src) {
    if (!node_.IsMap()) fail(node_, "'" + path_ + "' must be a mapping");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return static_cast<bool>(node_[key]);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return as<T>(node_[key], key);
  }

  template <class T>
  T require(const std::string& key) {
    if (!has(key)) fail(node_, "missing required key '" + key + "' in '" + path_ + "'");
    return as<T>(node_[key], key);
  }

  YAML::Node child(const std::string& key) {
    seen_.insert(key);
    return node_[key];
  }

  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  T as(const YAML::Node& n, const std::string& key) {
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, "'" + path(key) + "' has the wrong type");
    }
  }

  void finish() {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      const auto key = it->first.as<std::string>();
      if (!seen_.count(key)) fail(it->first, "unknown key '" + key + "' in '" + (path_.empty() ? "<root>" : path_) + "'");
    }
  }

  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
    throw ConfigError(where(src_, n.Mark()) + ": " + msg);
  }

  const YAML::Node& node() const { return node_; }

 private:
  YAML::Node node_;
  std::string path_;
  const std::string& src_;
  std::set<std::string> seen_;
};

void check(bool ok, const Section& s, const YAML::Node& n, const std::string& msg) {
  if (!ok) s.fail(n, msg);
}

nlohmann::json parse_kernel(Section s, const std::string& src) {
  const auto fam = s.require<std::string>("family");
  nlohmann::json j{{"family", fam}};
  if (fam == "riemann_liouville") {
    j["params"] = {{"alpha", s.require<double>("alpha")}, {"beta", s.get<double>("beta", 0.0)}};
  } else if (fam == "logarithmic") {
    j["params"] = nlohmann::json::object();
  } else if (fam == "constant") {
    j = {{"family", "finite_spectrum"}, {"params", {{"c0", s.require<double>("value")}, {"atoms", nlohmann::json::array()}}}};
  } else if (fam == "exponential") {
    const double rate = s.require<double>("rate"), w = s.get<double>("weight", 1.0);
    j = {{"family", "finite_spectrum"}, {"params", {{"c0", 0.0}, {"atoms", {{{"lambda", rate}, {"weight", w}}}}}}};
  } else if (fam == "finite_spectrum") {
    nlohmann::json atoms = nlohmann::json::array();
    if (s.has("atoms")) {
      const auto list = s.child("atoms");
      check(list.IsSequence(), s, list, "'" + s.path("atoms") + "' must be a list of [lambda, weight] pairs");
      for (const auto& a : list) {
        check(a.IsSequence() && a.size() == 2, s, a, "each atom must be [lambda, weight]");
        atoms.push_back({{"lambda", s.as<double>(a[0], "atoms")}, {"weight", s.as<double>(a[1], "atoms")}});
      }
    }
    j["params"] = {{"c0", s.get<double>("c0", 0.0)}, {"atoms", atoms}};
  } else if (fam == "shifted") {
    const double eps = s.require<double>("epsilon");
    check(s.has("base"), s, s.node(), "missing required key 'base' in '" + s.path("") + "'");
    j["params"] = {{"epsilon", eps}, {"base", parse_kernel(Section(s.child("base"), s.path("base"), src), src)}};
  } else if (fam == "sampled") {
    auto file = s.require<std::string>("file");
    if (std::filesystem::path(file).is_relative() && !src.empty() && src.front() != '<')
      file = (std::filesystem::path(src).parent_path() / file).string();
    std::ifstream in(file);
    check(static_cast<bool>(in), s, s.child("file"), "cannot open samples file '" + file + "'");
    try {
      j = read_samples_csv(in).to_json();
    } catch (const std::exception& e) {
      s.fail(s.child("file"), e.what());
    }
  } else {
    s.fail(s.child("family"), "unknown kernel family '" + fam + "'");
  }
  s.finish();
  return j;
}

OpenLoopControl parse_control(Section s) {
  const auto kind = s.require<std::string>("kind");
  OpenLoopControl c;
  if (kind == "constant") {
    c = OpenLoopControl::constant(s.require<double>("value"));
  } else if (kind == "bang_bang") {
    const double sw = s.require<double>("switch");
    check(sw > 0.0, s, s.child("switch"), "switch time must be > 0");
    c = OpenLoopControl::bang_bang(s.require<double>("first"), s.require<double>("second"), sw);
  } else if (kind == "piecewise") {
    try {
      c = OpenLoopControl::piecewise(s.require<std::vector<double>>("times"), s.require<std::vector<double>>("values"));
    } catch (const PreconditionError& e) {
      s.fail(s.node(), e.what());
    }
  } else {
    s.fail(s.child("kind"), "unknown control kind '" + kind + "'");
  }
  s.finish();
  return c;
}

Payoff parse_payoff(Section s) {
  const auto kind = s.require<std::string>("kind");
  Payoff p;
  const double a = s.get<double>("amplitude", 1.0), c = s.get<double>("center", 0.0), w = s.get<double>("width", 1.0);
  if (kind == "constant") p = Payoff::constant(a);
  else if (kind == "linear") p = Payoff::linear(a);
  else if (kind == "quadratic") p = Payoff::quadratic(a, c);
  else if (kind == "tanh") p = Payoff::tanh(a, c, w);
  else if (kind == "gaussian_bump") p = Payoff::gaussian_bump(a, c, w);
  else if (kind == "step") p = Payoff::step(a, c);
  else if (kind == "call") p = Payoff::call(a, c);
  else s.fail(s.child("kind"), "unknown payoff kind '" + kind + "'");
  p.offset = s.get<double>("offset", 0.0);
  check(w > 0.0, s, s.node(), "payoff width must be > 0");
  s.finish();
  return p;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& src) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(where(src, e.mark) + ": " + e.msg);
  }
  if (!root.IsDefined() || root.IsNull()) throw ConfigError(src + ":1:1: empty configuration");
  ExperimentConfig cfg;
  cfg.source = src;
  Section top(root, "", src);

  if (!top.has("kernel")) top.fail(root, "missing required key 'kernel'");
  cfg.kernel = parse_kernel(Section(top.child("kernel"), "kernel", src), src);
  try {
    (void)Kernel::from_json(cfg.kernel);
  } catch (const std::exception& e) {
    top.fail(top.child("kernel"), std::string("invalid kernel: ") + e.what());
  }

  if (top.has("coefficients")) {
    Section s(top.child("coefficients"), "coefficients", src);
    cfg.coef.c = s.get("c", cfg.coef.c);
    cfg.coef.b = s.get("b", cfg.coef.b);
    cfg.coef.g = s.get("g", cfg.coef.g);
    check(cfg.coef.b != 0.0, s, s.node(), "coefficient b must be nonzero");
    check(cfg.coef.g != 0.0, s, s.node(), "coefficient g must be nonzero");
    s.finish();
  }
  cfg.horizon = top.get("horizon", cfg.horizon);
  check(cfg.horizon > 0.0, top, top.child("horizon"), "horizon must be > 0");

  if (top.has("initial_curve")) {
    Section s(top.child("initial_curve"), "initial_curve", src);
    const auto kind = s.require<std::string>("kind");
    if (kind == "constant") cfg.initial = InitialCurve::constant(s.require<double>("value"));
    else if (kind == "kernel_shaped") cfg.initial = InitialCurve::kernel_shaped(s.require<double>("value"));
    else if (kind == "explicit") cfg.initial = InitialCurve::explicit_vector(s.require<std::vector<double>>("vector"));
    else s.fail(s.child("kind"), "unknown initial curve kind '" + kind + "'");
    s.finish();
  }

  if (top.has("hamiltonian")) {
    Section s(top.child("hamiltonian"), "hamiltonian", src);
    auto& h = cfg.hamiltonian;
    h.u_min = s.get("u_min", h.u_min);
    h.u_max = s.get("u_max", h.u_max);
    h.cost = s.get("cost", h.cost);
    h.weight = s.get("weight", h.weight);
    check(h.u_min <= h.u_max, s, s.node(), "u_min must be <= u_max");
    check(h.cost == "quadratic" || h.cost == "absolute", s, s.node(), "cost must be 'quadratic' or 'absolute'");
    check(h.weight > 0.0, s, s.node(), "cost weight must be > 0");
    s.finish();
  }

  if (top.has("payoff")) cfg.payoff = parse_payoff(Section(top.child("payoff"), "payoff", src));

  if (top.has("lift")) {
    Section s(top.child("lift"), "lift", src);
    auto& l = cfg.lift;
    l.n_nodes = s.get("n_nodes", l.n_nodes);
    l.t_min = s.get("t_min", l.t_min);
    if (s.has("t_max")) l.t_max = s.get<double>("t_max", 0.0);
    l.tolerance = s.get("tolerance", l.tolerance);
    check(l.n_nodes >= 3, s, s.node(), "n_nodes must be >= 3");
    check(l.t_min > 0.0 && (!l.t_max || *l.t_max > l.t_min), s, s.node(), "need 0 < t_min < t_max");
    s.finish();
  }

  if (top.has("hjb")) {
    Section s(top.child("hjb"), "hjb", src);
    auto& g = cfg.hjb.grids;
    g.n_tau = s.get("n_tau", g.n_tau);
    g.n_y = s.get("n_y", g.n_y);
    if (s.has("y_half_width")) g.y_half_width = s.get<double>("y_half_width", 0.0);
    g.quad_order = s.get("quad_order", g.quad_order);
    g.kappa = s.get("kappa", g.kappa);
    g.picard_tol = s.get("picard_tol", g.picard_tol);
    g.picard_max_iter = s.get("picard_max_iter", g.picard_max_iter);
    const auto src_name = s.get<std::string>("kernel_source", "lift");
    check(src_name == "lift" || src_name == "exact", s, s.node(), "kernel_source must be 'lift' or 'exact'");
    cfg.hjb.source = src_name == "lift" ? KernelSource::lift : KernelSource::exact;
    check(g.n_tau >= 2 && g.n_y >= 8, s, s.node(), "need n_tau >= 2 and n_y >= 8");
    check(g.quad_order >= 8, s, s.node(), "quad_order must be >= 8");
    s.finish();
  }

  auto& sim = cfg.simulation;
  sim.sim.horizon = cfg.horizon;
  if (top.has("simulation")) {
    Section s(top.child("simulation"), "simulation", src);
    sim.sim.dt = s.get("dt", sim.sim.dt);
    sim.sim.n_paths = s.get("n_paths", sim.sim.n_paths);
    sim.sim.seed = s.get("seed", sim.sim.seed);
    const auto scheme = s.get<std::string>("scheme", "exp_euler");
    check(scheme == "exp_euler" || scheme == "euler", s, s.node(), "scheme must be 'exp_euler' or 'euler'");
    sim.sim.scheme = scheme == "euler" ? Scheme::euler : Scheme::exp_euler;
    if (s.has("control")) {
      const auto c = s.child("control");
      if (c.IsScalar() && c.as<std::string>() == "feedback") sim.control.reset();
      else sim.control = parse_control(Section(c, "simulation.control", src));
    }
    sim.csv_paths = s.get("csv_paths", sim.csv_paths);
    sim.direct = s.get("direct", sim.direct);
    const auto w = s.get<std::string>("direct_weights", "endpoint");
    check(w == "endpoint" || w == "cell_average", s, s.node(), "direct_weights must be 'endpoint' or 'cell_average'");
    sim.direct_weights = w == "endpoint" ? DirectWeights::endpoint : DirectWeights::cell_average;
    check(sim.sim.dt > 0.0 && sim.sim.dt < cfg.horizon, s, s.node(), "need 0 < dt < horizon");
    check(sim.sim.n_paths >= 1, s, s.node(), "n_paths must be >= 1");
    s.finish();
  }

  if (top.has("smoothing")) {
    Section s(top.child("smoothing"), "smoothing", src);
    auto& m = cfg.smoothing;
    m.t_min = s.get("t_min", m.t_min);
    m.t_max = s.get("t_max", m.t_max);
    m.n_points = s.get("n_points", m.n_points);
    m.min_energy_steps = s.get("min_energy_steps", m.min_energy_steps);
    m.k = s.get("k", m.k);
    check(m.t_min > 0.0 && m.t_max > m.t_min, s, s.node(), "need 0 < t_min < t_max");
    check(m.n_points >= 2 && m.min_energy_steps >= 2, s, s.node(), "need n_points >= 2 and min_energy_steps >= 2");
    s.finish();
  }

  if (top.has("verify")) {
    Section s(top.child("verify"), "verify", src);
    cfg.verify.grid_tol = s.get("grid_tol", cfg.verify.grid_tol);
    if (s.has("alternatives")) {
      const auto list = s.child("alternatives");
      check(list.IsSequence(), s, list, "'verify.alternatives' must be a list");
      for (const auto& a : list) cfg.verify.alternatives.push_back(parse_control(Section(a, "verify.alternatives", src)));
    }
    s.finish();
  }

  cfg.output_dir = top.get("output_dir", cfg.output_dir);
  top.finish();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ":0:0: cannot open configuration file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

Kernel ExperimentConfig::build_kernel() const { return Kernel::from_json(kernel); }

Hamiltonian ExperimentConfig::build_hamiltonian() const {
  const auto cost = hamiltonian.cost == "absolute" ? RunningCost::absolute(hamiltonian.weight)
                                                   : RunningCost::quadratic(hamiltonian.weight);
  return Hamiltonian(hamiltonian.u_min, hamiltonian.u_max, cost);
}

LiftedModel ExperimentConfig::build_model() const {
  const auto k = build_kernel();
  const bool atoms = std::holds_alternative<AtomMeasure>(k.measure());
  const auto nodes = discretize_measure(k, lift.n_nodes, lift.t_min, lift.t_max.value_or(horizon),
                                        atoms ? LiftScheme::atoms_exact : LiftScheme::geometric_gauss, lift.tolerance);
  return LiftedModel(nodes, k, coef);
}

LiftedState ExperimentConfig::initial_state(const LiftedModel& model) const {
  return lift_initial_curve(model.nodes(), initial);
}

nlohmann::json ExperimentConfig::canonical() const {
  nlohmann::json j;
  j["kernel"] = kernel;
  j["coefficients"] = {{"c", coef.c}, {"b", coef.b}, {"g", coef.g}};
  j["horizon"] = horizon;
  const char* ik = initial.kind == InitialCurve::Kind::constant        ? "constant"
                   : initial.kind == InitialCurve::Kind::kernel_shaped ? "kernel_shaped"
                                                                        : "explicit";
  j["initial_curve"] = {{"kind", ik}, {"value", initial.value}, {"vector", initial.vector}};
  j["hamiltonian"] = {{"u_min", hamiltonian.u_min}, {"u_max", hamiltonian.u_max}, {"cost", hamiltonian.cost},
                      {"weight", hamiltonian.weight}};
  j["payoff"] = payoff.to_json();
  j["lift"] = {{"n_nodes", lift.n_nodes}, {"t_min", lift.t_min}, {"t_max", lift.t_max.value_or(horizon)},
               {"tolerance", lift.tolerance}};
  const auto& g = hjb.grids;
  j["hjb"] = {{"n_tau", g.n_tau},
              {"n_y", g.n_y},
              {"y_half_width", g.y_half_width ? nlohmann::json(*g.y_half_width) : nlohmann::json(nullptr)},
              {"quad_order", g.quad_order},
              {"kappa", g.kappa},
              {"picard_tol", g.picard_tol},
              {"picard_max_iter", g.picard_max_iter},
              {"kernel_source", hjb.source == KernelSource::lift ? "lift" : "exact"}};
  const auto& s = simulation;
  j["simulation"] = {{"dt", s.sim.dt},
                     {"n_paths", s.sim.n_paths},
                     {"seed", s.sim.seed},
                     {"scheme", s.sim.scheme == Scheme::euler ? "euler" : "exp_euler"},
                     {"control", s.control ? s.control->to_json() : nlohmann::json("feedback")},
                     {"csv_paths", s.csv_paths},
                     {"direct", s.direct},
                     {"direct_weights", s.direct_weights == DirectWeights::endpoint ? "endpoint" : "cell_average"}};
  j["smoothing"] = {{"t_min", smoothing.t_min},
                    {"t_max", smoothing.t_max},
                    {"n_points", smoothing.n_points},
                    {"min_energy_steps", smoothing.min_energy_steps},
                    {"k", smoothing.k}};
  auto alts = nlohmann::json::array();
  for (const auto& a : verify.alternatives) alts.push_back(a.to_json());
  j["verify"] = {{"grid_tol", verify.grid_tol}, {"alternatives", alts}};
  return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = cfg.canonical().dump();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw NumericError("config_hash: digest failed", "");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

}  // namespace vctl
