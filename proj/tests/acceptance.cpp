// Acceptance suite: one line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "flockhydro/app.hpp"

using namespace flockhydro;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    passed = passed && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [failed]");
  }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

ModelParams model(double sigma, int d, double alpha = 0.0, double beta = 1.0) {
  ModelParams p;
  p.sigma = sigma;
  p.dim = d;
  if (alpha > 0.0) p.potential = SelfPropulsion{alpha, beta};
  return p;
}

Vector tilted(int d) {
  Vector om(d);
  if (d == 2) om << 0.6, 0.8;
  else om << 0.48, 0.6, 0.64;
  return om;
}

Outcome gaussian_suite() {
  Outcome o;
  double ez = 0, ec = 0, ep = 0;
  for (int d : {2, 3})
    for (double sigma : {0.25, 1.0, 4.0}) {
      const ModelParams p = model(sigma, d);
      const PolarGrid grid = build_polar_grid(p, 64, 128);
      const EquilibriumTable t = make_equilibrium_table(p, grid);
      const double z = std::pow(2 * std::numbers::pi * sigma, 0.5 * d);
      ez = std::max(ez, std::abs(t.Z - z) / z);
      ec = std::max({ec, std::abs(t.c1 - 1.0), std::abs(compute_c1(p, grid) - 1.0)});
      const Vector om = tilted(d);
      const Matrix target = sigma * (Matrix::Identity(d, d) - om * om.transpose());
      ep = std::max(ep, (pressure_tensor(om, t) - target).cwiseAbs().maxCoeff() / sigma);
    }
  o.require(ez < 1e-9, "Z rel err " + fmt("%.1e", ez));
  o.require(ec < 1e-9, "|c1 - 1| " + fmt("%.1e", ec));
  o.require(ep < 1e-8, "pressure err " + fmt("%.1e", ep));
  return o;
}

Outcome spectral_identity() {
  Outcome o;
  double worst = 0.0, axis = 0.0;
  for (int d : {2, 3})
    for (double sigma : {0.5, 1.0, 2.0})
      for (double ratio : {0.5, 1.0, 2.0}) {
        const ModelParams p = model(sigma, d, ratio, 1.0);
        const PolarGrid grid = build_polar_grid(p, 96, 128);
        const double c1 = compute_c1(p, grid);
        const Vector om = tilted(d);
        const Matrix P = pressure_tensor(om, make_equilibrium_table(p, grid));
        Eigen::SelfAdjointEigenSolver<Matrix> es(P);
        const double scale = sigma * c1;
        // smallest eigenvalue 0 along Omega, the others sigma c1
        worst = std::max(worst, std::abs(es.eigenvalues()[0]) / scale);
        for (int k = 1; k < d; ++k) worst = std::max(worst, std::abs(es.eigenvalues()[k] - scale) / scale);
        axis = std::max(axis, 1.0 - std::abs(es.eigenvectors().col(0).dot(om)));
      }
  o.require(worst < 1e-8, "max rel eigenvalue err " + fmt("%.1e", worst));
  o.require(axis < 1e-8, "null vector vs Omega " + fmt("%.1e", axis));
  return o;
}

Outcome chi_solve() {
  Outcome o;
  for (int d : {2, 3}) {
    const ModelParams p = model(1.0, d, 1.0);
    const double r64 = compute_chi(p, 64, 64).residual_norm;
    const double r128 = compute_chi(p, 128, 128).residual_norm;
    const ChiField c256 = compute_chi(p, 256, 256);
    const double q1 = std::log2(r64 / r128), q2 = std::log2(r128 / c256.residual_norm);
    o.require(q1 >= 1.8 && q2 >= 1.8, "d=" + std::to_string(d) + " orders " + fmt("%.2f", q1) + "/" + fmt("%.2f", q2));
    const ChiField chi = compute_chi(p, 128, 128);
    const EquilibriumTable table = make_equilibrium_table(p, build_polar_grid(p, 64, 128));
    const AdjointKernelReport rep = verify_adjoint_kernel(chi, table, 20);
    o.require(rep.w_recovery_error < 5e-4, "W err " + fmt("%.1e", rep.w_recovery_error));
    o.require(rep.weak_residual_max < 5e-4, "weak res " + fmt("%.1e", rep.weak_residual_max));
  }
  return o;
}

Outcome gci_equivalence() {
  Outcome o;
  for (int d : {2, 3}) {
    const ModelParams p = model(1.0, d, 1.0);
    const ChiField chi = compute_chi(p, 128, 128);
    const EquilibriumTable table = make_equilibrium_table(p, build_polar_grid(p, 64, 128));
    const GciReport g = verify_gci_equivalence(chi, table, 20, 5);
    o.require(g.positive.size() == 20 && g.positive_max() < 1e-4,
              "d=" + std::to_string(d) + " max positive " + fmt("%.1e", g.positive_max()));
    o.require(g.negative.size() == 5 && g.negative_min() > 1e-3, "min negative " + fmt("%.2e", g.negative_min()));
  }
  return o;
}

Outcome coefficient_cross_checks() {
  Outcome o;
  double worst = 0.0;
  for (int d : {2, 3}) {
    const ModelParams p = model(1.0, d, 1.0);
    const Coefficients c = compute_coefficients(p, 96, 128);
    worst = std::max(worst, std::abs(c.c2 - c.c2_tilde / c.c1_tilde));
  }
  o.require(worst < 1e-10, "|c2 - c2~/c1~| " + fmt("%.1e", worst));

  const ModelParams p = model(1.0, 3, 1.0);
  auto chi = std::make_shared<const ChiField>(compute_chi(p, 256, 256));
  const Vector om = tilted(3);
  const Frame f(om);
  const PsiEvaluator psi = reconstruct_psi(chi, f.transverse(0), om);
  const CounterRng rng{2024};
  double sym = 0.0;
  for (int k = 0; k < 10; ++k) {
    // rotation about Omega by a random angle, applied to random velocities
    const double a = 2 * std::numbers::pi * rng.uniforms(k, 0, 0)[0];
    Matrix kx(3, 3);
    kx << 0, -om[2], om[1], om[2], 0, -om[0], -om[1], om[0], 0;
    const Matrix r = Matrix::Identity(3, 3) + std::sin(a) * kx + (1 - std::cos(a)) * kx * kx;
    for (int m = 0; m < 20; ++m) {
      const auto n1 = rng.normals(k, 1, m), n2 = rng.normals(k, 2, m);
      Vector v(3);
      v << n1[0] + om[0], n1[1] + om[1], n2[0] + om[2];
      const double lhs = psi.with_direction(r * v, r * f.transverse(0));
      const double rhs = psi(v);
      sym = std::max(sym, std::abs(lhs - rhs));
    }
  }
  o.require(sym < 1e-6, "rotation symmetry residual " + fmt("%.1e", sym));
  return o;
}

Outcome laplace_asymptotics() {
  Outcome o;
  int ok = 0, total = 0;
  double worst = 0.0;
  for (double alpha : {1.0, 2.0})
    for (double sigma : {0.5, 1.0})
      for (int d : {2, 3}) {
        const SelfPropulsion v{alpha, 1.0};
        const double lim = laplace_limit_c1(v, sigma, d);
        const auto curve = c1_lambda_curve(v, sigma, d, {25.0, 100.0});
        const double e25 = std::abs(curve[0].c1 - lim) / lim, e100 = std::abs(curve[1].c1 - lim) / lim;
        worst = std::max(worst, e100);
        ++total;
        ok += e100 < 0.02 && e100 < e25;
      }
  o.require(ok == total, std::to_string(ok) + "/" + std::to_string(total) + " cases, max rel err at 100 " +
                             fmt("%.1e", worst));
  return o;
}

Outcome soh_solver() {
  Outcome o;
  Coefficients c;
  c.c1 = 0.7;
  c.c2 = 0.5;
  c.params = model(0.5, 2);
  auto phi = [](double a) {
    Vector w(2);
    w << std::cos(a), std::sin(a);
    return w;
  };
  const double tp = 2 * std::numbers::pi;
  SolverConfig cfg;
  cfg.t_end = 1.0;
  const HydroState flat = init_state(
      SpatialMesh::square(16, 16, 1, 1), [](const Vector&) { return 2.0; }, [&](const Vector&) { return phi(0.3); },
      c);
  const HydroState fe = run(flat, cfg).back();
  double drift = 0.0;
  for (int k = 0; k < flat.mesh.cells(); ++k)
    drift = std::max({drift, std::abs(fe.rho[k] - 2.0), (fe.omega.col(k) - flat.omega.col(k)).norm()});
  o.require(drift < 1e-14, "constant state drift " + fmt("%.1e", drift));

  const HydroState s = init_state(
      SpatialMesh::square(32, 32, 1, 1),
      [&](const Vector& x) { return 1.0 + 0.4 * std::sin(tp * x[0]) * std::cos(tp * x[1]); },
      [&](const Vector& x) { return phi(std::sin(tp * x[1])); }, c);
  const double dt = stable_dt(s, cfg);
  HydroState cur = s;
  double defect = 0.0;
  for (int k = 0; k < 1000; ++k) {
    cur = step(cur, dt, cfg);
    defect = std::max(defect, cur.max_unit_defect());
  }
  const double dm = std::abs(cur.total_mass() - s.total_mass()) / s.total_mass();
  o.require(dm < 1e-13, "mass drift/1e3 steps " + fmt("%.1e", dm));
  o.require(defect < 1e-12, "max ||Omega|-1| " + fmt("%.1e", defect));

  auto err = [&](int n) {
    const HydroState a = init_state(
        SpatialMesh::line(n, 1.0), [&](const Vector& x) { return 1.0 + 0.3 * std::sin(tp * x[0]); },
        [&](const Vector&) { return phi(0.0); }, c);
    SolverConfig ac;
    ac.t_end = 0.5;
    const HydroState e = run(a, ac).back();
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      const double lo = double(k) / n - c.c1 * 0.5, hi = lo + 1.0 / n;
      sum += std::abs(e.rho[k] - (1.0 - 0.3 * (std::cos(tp * hi) - std::cos(tp * lo)) * n / tp)) / n;
    }
    return sum;
  };
  const double e1 = err(100), e2 = err(200), e3 = err(400);
  const double q = std::min(std::log2(e1 / e2), std::log2(e2 / e3));
  o.require(q >= 0.9, "advection order " + fmt("%.2f", q));
  return o;
}

Outcome kinetic_relaxation() {
  Outcome o;
  struct Setting {
    ModelParams p;
    std::string name;
  };
  const Setting settings[] = {{model(0.5, 2, 1.0), "V11 s=0.5 d=2"}, {model(1.0, 3), "V0 s=1 d=3"}};
  for (const auto& s : settings) {
    const RelaxationReport r = relaxation_test(s.p, 1.0, 100000, 50.0, 8);
    o.require(r.ks_speed < 0.01 && r.ks_angle < 0.01,
              s.name + " KS " + fmt("%.4f", r.ks_speed) + "/" + fmt("%.4f", r.ks_angle));
  }
  return o;
}

Outcome hydro_limit() {
  Outcome o;
  const ModelParams p = model(0.25, 2, 1.0);
  const Coefficients c = compute_coefficients(p, 96, 128);
  HydroComparisonSetup s;
  s.box_length = 2.0;
  s.n_bins = 64;
  s.t_end = 0.5;
  const double k = 2 * std::numbers::pi / s.box_length;
  s.rho0 = [k](double x) { return 1.0 + 0.5 * std::sin(k * x); };
  s.omega0 = [k](double x) {
    Vector w(2);
    w << std::cos(0.8 * std::sin(k * x)), std::sin(0.8 * std::sin(k * x));
    return w;
  };
  const auto rows = hydro_comparison(p, c, {0.2, 0.1, 0.05}, 1000000, s, 11);
  std::string table;
  for (const auto& r : rows)
    table += " eps=" + fmt("%.2f", r.epsilon) + ": rho " + fmt("%.4f", r.err_rho) + "+-" + fmt("%.4f", r.err_rho_sd) +
             ", omega " + fmt("%.4f", r.err_omega) + "+-" + fmt("%.4f", r.err_omega_sd);
  o.require(errors_decrease(rows), "errors decrease beyond 1 sd:" + table);
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome infrastructure() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "flockhydro_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  Checkpoint ck;
  ck.shape = {3, 4};
  for (int k = 0; k < 12; ++k) ck.data.push_back(std::sin(1.0 + k) * std::pow(10.0, 3 * k - 18));
  ck.data[5] = -0.0;
  write_checkpoint(ck, (root / "x.chk").string());
  const Checkpoint back = read_checkpoint((root / "x.chk").string());
  o.require(back.shape == ck.shape && std::memcmp(back.data.data(), ck.data.data(), 96) == 0, "checkpoint bitwise");

  bool same = true;
  const std::string base =
      "[model]\nsigma = 0.5\npotential = self_propulsion\n[grid]\nn_quad = 32\nn_chi = 32\n"
      "[run]\nt_end = 0.2\noutput_every = 0.1\n[space]\nnx = 32\n[particles]\nparticles = 5000\nn_bins = 16\n";
  for (const char* cmd : {"hydro", "kinetic"}) {
    for (const char* run : {"a", "b"}) {
      std::ostringstream out, err;
      const RunConfig cfg = parse_config_text(base, {{"command", cmd}, {"output_dir", (root / run / cmd).string()}});
      same = same && dispatch(cfg, out, err) == kExitOk;
    }
    for (const auto& entry : fs::directory_iterator(root / "a" / cmd))
      same = same && slurp(entry.path()) == slurp(root / "b" / cmd / entry.path().filename());
  }
  o.require(same, "reruns byte-identical");

  int guards = 0;
  for (const std::string bad : {"sgima = 1\n", "sigma = -1\n", "[grid]\nn_chi = two\n", "[run]\ncfl = 3\n"}) {
    try {
      parse_config_text("command = coeffs\n" + bad);
    } catch (const ConfigError&) {
      ++guards;
    }
  }
  o.require(guards == 4, std::to_string(guards) + "/4 config guards");
  fs::remove_all(root);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {1, "Gaussian closed forms", 5, gaussian_suite},
      {2, "pressure tensor spectral identity", 10, spectral_identity},
      {3, "chi solve verification", 60, chi_solve},
      {4, "GCI equivalence", 60, gci_equivalence},
      {5, "coefficient cross-checks", 30, coefficient_cross_checks},
      {6, "Laplace asymptotics", 30, laplace_asymptotics},
      {7, "SOH solver", 60, soh_solver},
      {8, "kinetic relaxation", 300, kinetic_relaxation},
      {9, "hydrodynamic limit", 1200, hydro_limit},
      {10, "infrastructure", 60, infrastructure},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool ok = o.passed && in_time;
    failed += !ok;
    std::printf("criterion %2d %-34s %s  (%.1f s of %.0f s%s)  %s\n", c.id, c.name, ok ? "PASS" : "FAIL", secs,
                c.budget_s, in_time ? "" : ", over budget", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
