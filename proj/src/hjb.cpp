#include "vctl/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "vctl/errors.hpp"
#include "vctl/numerics.hpp"

namespace vctl {

namespace {

constexpr char kSnapshotMagic[8] = {'V', 'C', 'T', 'L', 'V', 'G', '1', '\n'};

// Row weights of the time convolution and the per-row static data.
struct TimeMesh {
  std::vector<double> tau;
  std::vector<double> K;       // K(tau_k), k >= 1
  std::vector<double> gram;    // g^2 int_0^{tau_k} K^2
  std::vector<double> left;    // panel p: int K (tau_{p+1} - s)/h
  std::vector<double> right;   // panel p: int K (s - tau_p)/h
  double first_panel = 0.0;    // I_K(tau_1)
};

TimeMesh build_mesh(const ScalarSystem& sys, double T, int n) {
  TimeMesh m;
  const auto N = static_cast<std::size_t>(n);
  m.tau.resize(N + 1);
  for (std::size_t k = 0; k <= N; ++k) {
    const double r = static_cast<double>(k) / static_cast<double>(n);
    m.tau[k] = T * r * r;
  }
  m.tau[N] = T;
  m.K.assign(N + 1, 0.0);
  m.gram.assign(N + 1, 0.0);
  for (std::size_t k = 1; k <= N; ++k) {
    m.K[k] = sys.kernel.eval(m.tau[k]);
    m.gram[k] = sys.g * sys.g * sys.kernel.square_integral(0.0, m.tau[k]);
  }
  m.first_panel = sys.kernel.primitive(m.tau[1]);
  static const numerics::QuadratureRule gl = numerics::gauss_legendre(16);
  m.left.assign(N, 0.0);
  m.right.assign(N, 0.0);
  for (std::size_t p = 1; p < N; ++p) {
    const double a = m.tau[p], b = m.tau[p + 1], h = b - a;
    double l = 0.0, r = 0.0;
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      const double x = 0.5 * (1.0 + gl.nodes[q]);
      const double kv = sys.kernel.eval(a + h * x);
      l += gl.weights[q] * kv * (1.0 - x);
      r += gl.weights[q] * kv * x;
    }
    m.left[p] = 0.5 * h * l;
    m.right[p] = 0.5 * h * r;
  }
  return m;
}

// weight of row j (1 <= j <= k) in the convolution ending at row k
double row_weight(const TimeMesh& m, std::size_t k, std::size_t j) {
  double w = 0.0;
  if (j == 1) w += m.first_panel;
  if (j < k) w += m.left[j];
  if (j > 1) w += m.right[j - 1];
  return w;
}

double reduced_h(const Hamiltonian& ham, double h0, double Kv, double b, double df) {
  return (ham.h_min(Kv * b * df) - h0) / Kv;
}

struct Layout {
  double y_min;
  double dy;
  std::size_t n_y;
};

Layout make_layout(const ScalarSystem& sys, const Hamiltonian& ham, double T, const HjbGrids& grids) {
  if (grids.n_y < 8) throw PreconditionError("solve_hjb: n_y must be >= 8");
  if (grids.n_tau < 2) throw PreconditionError("solve_hjb: n_tau must be >= 2");
  if (grids.quad_order < 8) throw PreconditionError("solve_hjb: quad_order must be >= 8");
  const double sigma_max = std::abs(sys.g) * std::sqrt(sys.kernel.square_integral(0.0, T));
  double half = auto_y_half_width(sys, ham, T, grids.kappa);
  if (grids.y_half_width) {
    if (*grids.y_half_width < grids.kappa * sigma_max) {
      throw DomainCoverageError("solve_hjb: y span is narrower than kappa standard deviations of the noise",
                                "half_width=" + std::to_string(*grids.y_half_width) +
                                    ";required=" + std::to_string(grids.kappa * sigma_max));
    }
    half = *grids.y_half_width;
  }
  const auto n_y = static_cast<std::size_t>(grids.n_y);
  return {grids.y_center - half, 2.0 * half / static_cast<double>(n_y - 1), n_y};
}

void check_finite(std::span<const double> v, const char* what, std::size_t row) {
  for (double x : v)
    if (!std::isfinite(x))
      throw NumericError(std::string("solve_hjb: non-finite ") + what, "row=" + std::to_string(row));
}

double point_sweep(const RowSweep& s, std::size_t i) {
  const ValueGrid& vg = *s.grid;
  const auto& gh = numerics::gauss_hermite_normal(vg.quad_order);
  const double y = vg.y(i);
  double acc = 0.0;
  for (std::size_t j = 1; j < s.k; ++j) {
    const numerics::UniformCubic R(vg.y_min, vg.dy, std::span<const double>(s.R->data() + j * vg.n_y, vg.n_y));
    const double sd = std::sqrt((*s.variances)[j]);
    double e = 0.0;
    for (std::size_t q = 0; q < gh.nodes.size(); ++q) e += gh.weights[q] * R(y + sd * gh.nodes[q]);
    acc += (*s.weights)[j] * e;
  }
  return acc;
}

}  // namespace

void sweep_row_serial(const RowSweep& s, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = point_sweep(s, i);
}

void sweep_row_parallel(const RowSweep& s, std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = point_sweep(s, static_cast<std::size_t>(i));
}

double sigma_profile(const ScalarSystem& sys, double s, double tau) {
  if (s < 0.0 || tau < 0.0) throw DomainError("sigma_profile: need s >= 0 and tau >= 0");
  if (tau == 0.0) return 0.0;
  return sys.g * sys.g * sys.kernel.square_integral(s, s + tau);
}

double sigma_profile(const LiftedModel& model, double s, double tau) {
  return sigma_profile(scalar_system(model, KernelSource::exact, s + tau), s, tau);
}

double auto_y_half_width(const ScalarSystem& sys, const Hamiltonian& ham, double T, double kappa) {
  const double sigma_max = std::abs(sys.g) * std::sqrt(sys.kernel.square_integral(0.0, T));
  const double drift = std::abs(sys.b) * ham.lipschitz_L() * sys.kernel.primitive(T);
  return kappa * sigma_max + drift;
}

double ValueGrid::f_at(double t, double yv) const {
  if (yv < y_min || yv > y_max())
    throw DomainCoverageError("f_at: observation outside the value grid", "y=" + std::to_string(yv));
  if (t < 0.0 || t > horizon * (1.0 + 1e-12)) throw DomainError("f_at: tau outside [0, T]");
  t = std::min(t, horizon);
  auto it = std::upper_bound(tau.begin(), tau.end(), t);
  std::size_t k = static_cast<std::size_t>(std::distance(tau.begin(), it));
  k = std::clamp<std::size_t>(k, 1, tau.size() - 1);
  const double w = (t - tau[k - 1]) / (tau[k] - tau[k - 1]);
  const numerics::UniformCubic a(y_min, dy, f_row(k - 1)), b(y_min, dy, f_row(k));
  return (1.0 - w) * a(yv) + w * b(yv);
}

double ValueGrid::df_at(double t, double yv) const {
  if (yv < y_min || yv > y_max())
    throw DomainCoverageError("df_at: observation outside the value grid", "y=" + std::to_string(yv));
  if (t < 0.0 || t > horizon * (1.0 + 1e-12)) throw DomainError("df_at: tau outside [0, T]");
  t = std::min(t, horizon);
  if (t < tau[1]) {
    if (!kernel) throw PreconditionError("df_at: value grid carries no kernel for tau below the first row");
    const double var = t > 0.0 ? g * g * kernel->square_integral(0.0, t) : 0.0;
    return gaussian_smooth(terminal, var, yv, quad_order).derivative;
  }
  auto it = std::upper_bound(tau.begin(), tau.end(), t);
  std::size_t k = static_cast<std::size_t>(std::distance(tau.begin(), it));
  k = std::clamp<std::size_t>(k, 2, tau.size() - 1);
  const double w = (t - tau[k - 1]) / (tau[k] - tau[k - 1]);
  const numerics::UniformCubic a(y_min, dy, df_row(k - 1)), b(y_min, dy, df_row(k));
  return (1.0 - w) * a(yv) + w * b(yv);
}

ValueGrid solve_hjb(const ScalarSystem& sys, const Hamiltonian& ham, const Payoff& phi, double T,
                    const HjbGrids& grids) {
  if (!(T > 0.0)) throw PreconditionError("solve_hjb: T must be > 0");
  const Layout lay = make_layout(sys, ham, T, grids);
  const TimeMesh mesh = build_mesh(sys, T, grids.n_tau);
  const std::size_t N = mesh.tau.size() - 1, ny = lay.n_y;

  ValueGrid vg;
  vg.tau = mesh.tau;
  vg.y_min = lay.y_min;
  vg.dy = lay.dy;
  vg.n_y = ny;
  vg.horizon = T;
  vg.terminal = phi;
  vg.b = sys.b;
  vg.g = sys.g;
  vg.quad_order = grids.quad_order;
  vg.gramian = mesh.gram;
  vg.kernel = sys.kernel;
  vg.f.assign((N + 1) * ny, 0.0);
  vg.df.assign((N + 1) * ny, 0.0);
  std::vector<double> R((N + 1) * ny, 0.0);

  for (std::size_t i = 0; i < ny; ++i) {
    const auto sm = gaussian_smooth(phi, 0.0, vg.y(i), grids.quad_order);
    vg.f[i] = sm.value;
    vg.df[i] = phi.smooth() ? phi.derivative(vg.y(i)) : sm.derivative;
  }

  const double h0 = ham.h_min(0.0);
  std::vector<double> phi_v(ny), phi_d(ny), G(ny), total(ny), df_cur(ny), df_new(ny), Rk(ny);
  std::vector<double> weights, variances;
  int max_picard = 0;
  for (std::size_t k = 1; k <= N; ++k) {
    for (std::size_t i = 0; i < ny; ++i) {
      const auto sm = gaussian_smooth(phi, mesh.gram[k], vg.y(i), grids.quad_order);
      phi_v[i] = sm.value;
      phi_d[i] = sm.derivative;
    }
    weights.assign(k, 0.0);
    variances.assign(k, 0.0);
    for (std::size_t j = 1; j < k; ++j) {
      weights[j] = row_weight(mesh, k, j);
      variances[j] = sys.g * sys.g * sys.kernel.square_integral(mesh.tau[j], mesh.tau[k]);
    }
    const RowSweep sweep{&vg, &R, &weights, &variances, k};
    if (grids.execution == Execution::parallel) sweep_row_parallel(sweep, G);
    else sweep_row_serial(sweep, G);

    // implicit own-row term by Picard iteration
    const double wkk = row_weight(mesh, k, k);
    const double Kk = mesh.K[k];
    const auto prev = vg.df_row(k - 1);
    if (k == 1) std::copy(phi_d.begin(), phi_d.end(), df_cur.begin());
    else std::copy(prev.begin(), prev.end(), df_cur.begin());
    double last_change = std::numeric_limits<double>::infinity();
    int it = 0;
    for (;; ++it) {
      for (std::size_t i = 0; i < ny; ++i) {
        Rk[i] = reduced_h(ham, h0, Kk, sys.b, df_cur[i]);
        total[i] = G[i] + wkk * Rk[i];
      }
      const auto dG = numerics::differentiate_uniform(total, vg.dy);
      double change = 0.0, scale = 1.0;
      for (std::size_t i = 0; i < ny; ++i) {
        df_new[i] = phi_d[i] + dG[i];
        change = std::max(change, std::abs(df_new[i] - df_cur[i]));
        scale = std::max(scale, std::abs(df_new[i]));
      }
      std::swap(df_cur, df_new);
      if (change <= grids.picard_tol * scale) break;
      if (it >= 2 && change > last_change) {
        throw NumericError("solve_hjb: Picard iteration for the implicit row does not contract",
                           "row=" + std::to_string(k) + ";change=" + std::to_string(change) +
                               ";previous=" + std::to_string(last_change));
      }
      if (it + 1 >= grids.picard_max_iter) {
        throw NumericError("solve_hjb: Picard iteration did not converge",
                           "row=" + std::to_string(k) + ";change=" + std::to_string(change));
      }
      last_change = change;
    }
    max_picard = std::max(max_picard, it + 1);
    double* frow = vg.f.data() + k * ny;
    double* drow = vg.df.data() + k * ny;
    double* rrow = R.data() + k * ny;
    for (std::size_t i = 0; i < ny; ++i) {
      rrow[i] = reduced_h(ham, h0, Kk, sys.b, df_cur[i]);
      frow[i] = phi_v[i] + mesh.tau[k] * h0 + G[i] + wkk * rrow[i];
      drow[i] = df_cur[i];
    }
    check_finite(vg.f_row(k), "value", k);
    check_finite(vg.df_row(k), "gradient", k);
  }
  vg.metadata["max_picard_iterations"] = max_picard;
  vg.metadata["hamiltonian"] = ham.to_json();
  vg.metadata["kappa"] = grids.kappa;
  return vg;
}

ValueGrid solve_hjb(const LiftedModel& model, KernelSource source, const Hamiltonian& ham, const Payoff& phi,
                    double T, const HjbGrids& grids) {
  auto vg = solve_hjb(scalar_system(model, source, T), ham, phi, T, grids);
  vg.metadata["kernel_source"] = source == KernelSource::lift ? "lift" : "exact";
  return vg;
}

ContractionReport contraction_diagnostic(const ScalarSystem& sys, const Hamiltonian& ham, const Payoff& phi, double T,
                                         const HjbGrids& grids, int iterations) {
  const Layout lay = make_layout(sys, ham, T, grids);
  const TimeMesh mesh = build_mesh(sys, T, grids.n_tau);
  const std::size_t N = mesh.tau.size() - 1, ny = lay.n_y;
  ValueGrid vg;
  vg.tau = mesh.tau;
  vg.y_min = lay.y_min;
  vg.dy = lay.dy;
  vg.n_y = ny;
  vg.quad_order = grids.quad_order;
  std::vector<double> f((N + 1) * ny), df((N + 1) * ny), phi_v((N + 1) * ny), phi_d((N + 1) * ny);
  for (std::size_t k = 0; k <= N; ++k)
    for (std::size_t i = 0; i < ny; ++i) {
      const auto sm = gaussian_smooth(phi, mesh.gram[k], vg.y(i), grids.quad_order);
      phi_v[k * ny + i] = sm.value;
      phi_d[k * ny + i] = (k == 0 && phi.smooth()) ? phi.derivative(vg.y(i)) : sm.derivative;
    }
  f = phi_v;
  df = phi_d;
  const double h0 = ham.h_min(0.0);
  ContractionReport rep;
  std::vector<double> R((N + 1) * ny, 0.0), G(ny), weights, variances;
  for (int n = 0; n < iterations; ++n) {
    for (std::size_t k = 1; k <= N; ++k)
      for (std::size_t i = 0; i < ny; ++i) R[k * ny + i] = reduced_h(ham, h0, mesh.K[k], sys.b, df[k * ny + i]);
    std::vector<double> f_new(f.size()), df_new(df.size());
    std::copy(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(ny), f_new.begin());
    std::copy(df.begin(), df.begin() + static_cast<std::ptrdiff_t>(ny), df_new.begin());
    for (std::size_t k = 1; k <= N; ++k) {
      weights.assign(k + 1, 0.0);
      variances.assign(k + 1, 0.0);
      for (std::size_t j = 1; j <= k; ++j) {
        weights[j] = row_weight(mesh, k, j);
        variances[j] = j < k ? sys.g * sys.g * sys.kernel.square_integral(mesh.tau[j], mesh.tau[k]) : 0.0;
      }
      const RowSweep sweep{&vg, &R, &weights, &variances, k + 1};
      if (grids.execution == Execution::parallel) sweep_row_parallel(sweep, G);
      else sweep_row_serial(sweep, G);
      const auto dG = numerics::differentiate_uniform(G, vg.dy);
      for (std::size_t i = 0; i < ny; ++i) {
        f_new[k * ny + i] = phi_v[k * ny + i] + mesh.tau[k] * h0 + G[i];
        df_new[k * ny + i] = phi_d[k * ny + i] + dG[i];
      }
    }
    double gf = 0.0, gd = 0.0;
    for (std::size_t k = 1; k <= N; ++k)
      for (std::size_t i = 0; i < ny; ++i) {
        gf = std::max(gf, std::abs(f_new[k * ny + i] - f[k * ny + i]));
        gd = std::max(gd, std::sqrt(mesh.tau[k]) * mesh.K[k] * std::abs(sys.b) *
                              std::abs(df_new[k * ny + i] - df[k * ny + i]));
      }
    rep.gaps.push_back(gf + gd);
    f.swap(f_new);
    df.swap(df_new);
  }
  constexpr double floor = 1e-13;
  for (std::size_t i = 1; i < rep.gaps.size(); ++i) {
    const double r = rep.gaps[i - 1] > 0.0 ? rep.gaps[i] / rep.gaps[i - 1] : 0.0;
    rep.ratios.push_back(r);
    if (rep.gaps[i] > floor && r >= 1.0) rep.decreasing = false;
  }
  rep.flagged = !rep.decreasing;
  return rep;
}

double mild_residual(const ValueGrid& vg, const ScalarSystem& sys, const Hamiltonian& ham,
                     std::span<const std::size_t> rows, std::span<const double> ys, int fine_order) {
  if (rows.size() != ys.size()) throw PreconditionError("mild_residual: rows and ys must match");
  const std::size_t N = vg.tau.size() - 1, ny = vg.n_y;
  const double h0 = ham.h_min(0.0);
  std::vector<double> R((N + 1) * ny, 0.0), Kv(N + 1, 0.0);
  for (std::size_t k = 1; k <= N; ++k) {
    Kv[k] = sys.kernel.eval(vg.tau[k]);
    for (std::size_t i = 0; i < ny; ++i) R[k * ny + i] = reduced_h(ham, h0, Kv[k], sys.b, vg.df[k * ny + i]);
  }
  const auto& gh = numerics::gauss_hermite_normal(fine_order);
  const auto gl = numerics::gauss_legendre(6);
  auto expect_row = [&](std::size_t j, double y, double var) {
    const numerics::UniformCubic c(vg.y_min, vg.dy, std::span<const double>(R.data() + j * ny, ny));
    const double sd = std::sqrt(std::max(var, 0.0));
    double e = 0.0;
    for (std::size_t q = 0; q < gh.nodes.size(); ++q) e += gh.weights[q] * c(y + sd * gh.nodes[q]);
    return e;
  };
  double worst = 0.0;
  for (std::size_t p = 0; p < rows.size(); ++p) {
    const std::size_t k = rows[p];
    if (k == 0 || k > N) throw PreconditionError("mild_residual: row out of range");
    const double y = ys[p], tk = vg.tau[k];
    const double var_k = sys.g * sys.g * sys.kernel.square_integral(0.0, tk);
    double rhs = gaussian_smooth(vg.terminal, var_k, y, fine_order).value + tk * h0;
    // first panel: R held at its row-1 value, K integrated with a graded rule
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      const double v = 0.5 * (1.0 + gl.nodes[q]);
      const double s = vg.tau[1] * std::pow(v, 4.0);
      const double jac = 0.5 * vg.tau[1] * 4.0 * std::pow(v, 3.0) * gl.weights[q];
      const double var = sys.g * sys.g * sys.kernel.square_integral(s, tk);
      rhs += jac * sys.kernel.eval(s) * expect_row(1, y, var);
    }
    for (std::size_t j = 1; j < k; ++j) {
      const double a = vg.tau[j], b = vg.tau[j + 1], h = b - a;
      for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
        const double x = 0.5 * (1.0 + gl.nodes[q]);
        const double s = a + h * x;
        const double var = sys.g * sys.g * sys.kernel.square_integral(s, tk);
        const double e = (1.0 - x) * expect_row(j, y, var) + x * expect_row(j + 1, y, var);
        rhs += 0.5 * h * gl.weights[q] * sys.kernel.eval(s) * e;
      }
    }
    worst = std::max(worst, std::abs(vg.f_at(tk, y) - rhs));
  }
  return worst;
}

double gradient_B(const ValueGrid& vg, double tau, double y_obs, double kernel_factor, double b) {
  return kernel_factor * b * vg.df_at(tau, y_obs);
}

double gradient_B(const ValueGrid& vg, const LiftedModel& model, double t, std::span<const double> x) {
  const double tau = vg.horizon - t;
  if (!(tau > 0.0)) throw DomainError("gradient_B: need t < T");
  const auto row = model.observation_row(tau);
  if (row.size() != x.size()) throw PreconditionError("gradient_B: state length does not match nodes");
  double y = 0.0, kf = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    y += row[i] * x[i];
    kf += row[i] * model.nodes().xi[i];
  }
  return gradient_B(vg, tau, y, kf, model.b());
}

void write_value_csv(std::ostream& os, const ValueGrid& vg) {
  const auto old = os.precision(17);
  os << "tau,y,f,df\n";
  for (std::size_t k = 0; k < vg.tau.size(); ++k)
    for (std::size_t i = 0; i < vg.n_y; ++i)
      os << vg.tau[k] << ',' << vg.y(i) << ',' << vg.f[k * vg.n_y + i] << ',' << vg.df[k * vg.n_y + i] << '\n';
  os.precision(old);
}

void write_value_snapshot(std::ostream& os, const ValueGrid& vg) {
  nlohmann::json h;
  h["tau"] = vg.tau;
  h["y_min"] = vg.y_min;
  h["dy"] = vg.dy;
  h["n_y"] = vg.n_y;
  h["horizon"] = vg.horizon;
  h["terminal"] = vg.terminal.to_json();
  h["b"] = vg.b;
  h["g"] = vg.g;
  h["quad_order"] = vg.quad_order;
  h["gramian"] = vg.gramian;
  if (vg.kernel) h["kernel"] = vg.kernel->to_json();
  h["metadata"] = vg.metadata;
  const std::string header = h.dump();
  const std::uint64_t len = header.size();
  os.write(kSnapshotMagic, sizeof(kSnapshotMagic));
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  os.write(reinterpret_cast<const char*>(vg.f.data()), static_cast<std::streamsize>(vg.f.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(vg.df.data()), static_cast<std::streamsize>(vg.df.size() * sizeof(double)));
}

ValueGrid read_value_snapshot(std::istream& is) {
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kSnapshotMagic, sizeof(magic)) != 0)
    throw PreconditionError("read_value_snapshot: not a value-grid snapshot");
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header(len, '\0');
  is.read(header.data(), static_cast<std::streamsize>(len));
  if (!is) throw PreconditionError("read_value_snapshot: truncated header");
  const auto h = nlohmann::json::parse(header);
  ValueGrid vg;
  vg.tau = h.at("tau").get<std::vector<double>>();
  vg.y_min = h.at("y_min").get<double>();
  vg.dy = h.at("dy").get<double>();
  vg.n_y = h.at("n_y").get<std::size_t>();
  vg.horizon = h.at("horizon").get<double>();
  vg.terminal = Payoff::from_json(h.at("terminal"));
  vg.b = h.at("b").get<double>();
  vg.g = h.at("g").get<double>();
  vg.quad_order = h.at("quad_order").get<int>();
  vg.gramian = h.at("gramian").get<std::vector<double>>();
  if (h.contains("kernel")) vg.kernel = Kernel::from_json(h.at("kernel"));
  vg.metadata = h.value("metadata", nlohmann::json::object());
  const std::size_t n = vg.tau.size() * vg.n_y;
  vg.f.resize(n);
  vg.df.resize(n);
  is.read(reinterpret_cast<char*>(vg.f.data()), static_cast<std::streamsize>(n * sizeof(double)));
  is.read(reinterpret_cast<char*>(vg.df.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw PreconditionError("read_value_snapshot: truncated data");
  return vg;
}

}  // namespace vctl
