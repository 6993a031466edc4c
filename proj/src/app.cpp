#include "flockhydro/app.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <omp.h>

#include "CLI11.hpp"

namespace flockhydro {

namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string numbered(const std::string& stem, int k, const std::string& ext) {
  std::ostringstream os;
  os << stem << '_' << std::setw(4) << std::setfill('0') << k << ext;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os << text;
}

std::string model_fields(const ModelParams& p, std::map<std::string, std::string>& f) {
  f["sigma"] = format_double(p.sigma);
  f["d"] = std::to_string(p.dim);
  f["eta"] = format_double(p.eta);
  if (const auto* sp = std::get_if<SelfPropulsion>(&p.potential)) {
    f["potential"] = "self_propulsion";
    f["alpha"] = format_double(sp->alpha);
    f["beta"] = format_double(sp->beta);
  } else if (std::holds_alternative<TabulatedRadial>(p.potential)) {
    f["potential"] = "tabulated";
  } else {
    f["potential"] = "zero";
  }
  return f["potential"];
}

// Fields as rows of [rho, omega_1..omega_d] per cell.
Checkpoint field_checkpoint(const std::vector<double>& rho, const Matrix& omega, std::vector<std::size_t> lead,
                            double time, std::uint64_t digest) {
  Checkpoint ck;
  const int d = static_cast<int>(omega.rows());
  ck.shape = std::move(lead);
  ck.shape.push_back(1 + d);
  ck.config_digest = digest;
  ck.fields["time"] = format_double(time);
  ck.fields["columns"] = d == 2 ? "rho omega_1 omega_2" : "rho omega_1 omega_2 omega_3";
  for (std::size_t k = 0; k < rho.size(); ++k) {
    ck.data.push_back(rho[k]);
    for (int m = 0; m < d; ++m) ck.data.push_back(omega(m, k));
  }
  return ck;
}

std::string field_csv_1d(const std::vector<double>& rho, const Matrix& omega, double dx, double time) {
  const int d = static_cast<int>(omega.rows());
  std::string s = "x,t,rho";
  for (int m = 1; m <= d; ++m) s += ",omega_" + std::to_string(m);
  s += "\n";
  for (std::size_t k = 0; k < rho.size(); ++k) {
    s += format_double((k + 0.5) * dx) + "," + format_double(time) + "," + format_double(rho[k]);
    for (int m = 0; m < d; ++m) s += "," + format_double(omega(m, k));
    s += "\n";
  }
  return s;
}

int run_coeffs(const RunConfig& c, const fs::path& dir, std::ostream& out) {
  const Coefficients co = compute_coefficients(c.model, c.n_quad, c.n_chi, c.chi_tol);
  std::string alpha, beta;
  if (const auto* sp = std::get_if<SelfPropulsion>(&c.model.potential))
    alpha = format_double(sp->alpha), beta = format_double(sp->beta);
  write_text(dir / "coefficients.csv", "sigma,d,alpha,beta,c1,c2\n" + format_double(c.model.sigma) + "," +
                                           std::to_string(c.model.dim) + "," + alpha + "," + beta + "," +
                                           format_double(co.c1) + "," + format_double(co.c2) + "\n");
  out << "c1 = " << format_double(co.c1) << "\nc2 = " << format_double(co.c2) << "\n";
  if (!c.lambdas.empty()) {
    std::string s = "lambda,c1,c2\n";
    for (double lam : c.lambdas) {
      const Coefficients cl = compute_coefficients(c.model.with_potential_scaled(lam), c.n_quad, c.n_chi, c.chi_tol);
      s += format_double(lam) + "," + format_double(cl.c1) + "," + format_double(cl.c2) + "\n";
      out << "lambda = " << format_double(lam) << ": c1 = " << format_double(cl.c1) << ", c2 = "
          << format_double(cl.c2) << "\n";
    }
    write_text(dir / "lambda_sweep.csv", s);
  }
  return kExitOk;
}

int run_chi(const RunConfig& c, const fs::path& dir, std::ostream& out) {
  const ChiField chi = compute_chi(c.model, c.n_chi, c.n_chi, c.chi_tol, c.truncation_tol);
  write_checkpoint(chi_checkpoint(chi, c.truncation_tol, config_digest(c)), (dir / "chi.chk").string());
  out << "solver " << chi.solver << ", algebraic residual " << chi.algebraic_residual << ", strong residual "
      << chi.residual_norm << "\n";
  return kExitOk;
}

int run_hydro(const RunConfig& c, const fs::path& dir, std::ostream& out) {
  const Coefficients co = compute_coefficients(c.model, c.n_quad, c.n_chi, c.chi_tol);
  const HydroState init = initial_hydro_state(c, co);
  SolverConfig sc;
  sc.cfl = c.cfl;
  sc.t_end = c.t_end;
  sc.output_every = c.output_every;
  sc.flux = c.flux == "rusanov" ? FluxKind::Rusanov : FluxKind::Upwind;
  const std::vector<HydroState> snaps = run(init, sc);
  const std::uint64_t digest = config_digest(c);
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    const HydroState& s = snaps[k];
    std::vector<std::size_t> lead;
    if (s.mesh.space_dim == 2) lead = {static_cast<std::size_t>(s.mesh.ny), static_cast<std::size_t>(s.mesh.nx)};
    else lead = {static_cast<std::size_t>(s.mesh.nx)};
    write_checkpoint(field_checkpoint(s.rho, s.omega, lead, s.time, digest),
                     (dir / numbered("hydro", static_cast<int>(k), ".chk")).string());
    if (s.mesh.space_dim == 1)
      write_text(dir / numbered("hydro", static_cast<int>(k), ".csv"), field_csv_1d(s.rho, s.omega, s.mesh.dx(), s.time));
  }
  out << "c1 = " << format_double(co.c1) << ", c2 = " << format_double(co.c2) << "\n"
      << snaps.size() << " snapshots, mass drift " << snaps.back().total_mass() - init.total_mass()
      << ", max unit defect " << snaps.back().max_unit_defect() << "\n";
  return kExitOk;
}

int run_kinetic(const RunConfig& c, const fs::path& dir, std::ostream& out) {
  ParticleEnsemble e;
  double total_mass = 1.0;
  int bins = 1;
  if (c.homogeneous) {
    e = make_homogeneous(c.model, c.epsilon,
                         sample_equilibrium(c.model, profile_omega(c, 0.0), c.particles, c.seed), c.seed);
  } else {
    bins = c.n_bins;
    e = make_inhomogeneous(
        c.model, c.epsilon, c.particles, c.lx, bins, [&](double x) { return profile_rho(c, x); },
        [&](double x) { return profile_omega(c, x); }, c.seed);
    const int m = 100000;
    total_mass = 0.0;
    for (int k = 0; k < m; ++k) total_mass += profile_rho(c, (k + 0.5) * c.lx / m);
    total_mass *= c.lx / m;
  }
  const double dt_max = c.dt_over_epsilon * c.epsilon;
  const std::uint64_t digest = config_digest(c);
  int index = 0;
  double t = 0.0;
  auto snapshot = [&] {
    const MomentField f = empirical_moments(e, bins, total_mass);
    const double dx = c.homogeneous ? 1.0 : c.lx / bins;
    write_checkpoint(field_checkpoint(f.rho_hat, f.omega_hat, {static_cast<std::size_t>(bins)}, t, digest),
                     (dir / numbered("kinetic", index, ".chk")).string());
    write_text(dir / numbered("kinetic", index, ".csv"), field_csv_1d(f.rho_hat, f.omega_hat, dx, t));
    ++index;
  };
  snapshot();
  const double interval = c.output_every > 0.0 ? c.output_every : c.t_end;
  while (t < c.t_end * (1.0 - 1e-12) && interval > 0.0) {
    const double span = std::min(interval, c.t_end - t);
    const long steps = static_cast<long>(std::ceil(span / dt_max - 1e-9));
    const double dt = span / steps;
    for (long s = 0; s < steps; ++s) kinetic_step(e, dt);
    t += span;
    snapshot();
  }
  const Vector mean = e.velocities.rowwise().mean();
  out << index << " snapshots, " << e.steps_taken << " steps, |mean velocity| = " << format_double(mean.norm())
      << ", zero-moment fallbacks " << e.zero_moment_warnings << "\n";
  return kExitOk;
}

int run_compare(const RunConfig& c, const fs::path& dir, std::ostream& out) {
  if (c.ny != 0) throw ConfigError("space.ny", "compare runs in 1D");
  const Coefficients co = compute_coefficients(c.model, c.n_quad, c.n_chi, c.chi_tol);
  HydroComparisonSetup s;
  s.box_length = c.lx;
  s.n_bins = c.n_bins;
  s.t_end = c.t_end;
  s.rho0 = [&](double x) { return profile_rho(c, x); };
  s.omega0 = [&](double x) { return profile_omega(c, x); };
  s.dt_over_epsilon = c.dt_over_epsilon;
  s.soh_refinement = c.soh_refinement;
  s.bootstrap = c.bootstrap;
  const auto rows = hydro_comparison(c.model, co, c.epsilons, c.particles, s, c.seed);
  std::string csv = "epsilon,err_rho,err_rho_sd,err_omega,err_omega_sd\n";
  for (const auto& r : rows) {
    csv += format_double(r.epsilon) + "," + format_double(r.err_rho) + "," + format_double(r.err_rho_sd) + "," +
           format_double(r.err_omega) + "," + format_double(r.err_omega_sd) + "\n";
  }
  write_text(dir / "compare.csv", csv);
  out << csv << "errors decrease with epsilon: " << (errors_decrease(rows) ? "yes" : "no") << "\n";
  return kExitOk;
}

int run_verify(const RunConfig& c, const fs::path& dir, std::ostream& out) {
  const auto rows = verify_suite(c);
  const std::string report = format_report(rows);
  write_text(dir / "verify_report.txt", report);
  out << report;
  for (const auto& r : rows)
    if (!r.passed) return kExitNumerical;
  return kExitOk;
}

}  // namespace

double profile_rho(const RunConfig& c, double x, double y) {
  const bool two_d = c.ny > 0;
  if (c.profile == "constant") return c.rho_mean;
  if (c.profile == "bump") {
    auto g = [](double u, double L) { return std::exp(-std::pow((u - 0.5 * L) / (0.05 * L), 2)); };
    return c.rho_mean + c.rho_amp * g(x, c.lx) * (two_d ? g(y, c.ly) : 1.0);
  }
  return c.rho_mean + c.rho_amp * std::sin(kTwoPi * x / c.lx) * (two_d ? std::sin(kTwoPi * y / c.ly) : 1.0);
}

Vector profile_omega(const RunConfig& c, double x, double y) {
  double phi = c.phi_amp;
  if (c.profile == "wave")
    phi = c.ny > 0 ? c.phi_amp * std::cos(kTwoPi * x / c.lx) * std::cos(kTwoPi * y / c.ly)
                   : c.phi_amp * std::sin(kTwoPi * x / c.lx);
  Vector w = Vector::Zero(c.model.dim);
  w[0] = std::cos(phi);
  w[1] = std::sin(phi);
  return w;
}

HydroState initial_hydro_state(const RunConfig& c, const Coefficients& coeffs) {
  const SpatialMesh mesh = c.ny > 0 ? SpatialMesh::square(c.nx, c.ny, c.lx, c.ly) : SpatialMesh::line(c.nx, c.lx);
  return init_state(
      mesh, [&](const Vector& x) { return profile_rho(c, x[0], x.size() > 1 ? x[1] : 0.0); },
      [&](const Vector& x) { return profile_omega(c, x[0], x.size() > 1 ? x[1] : 0.0); }, coeffs);
}

Checkpoint chi_checkpoint(const ChiField& chi, double truncation_tol, std::uint64_t digest) {
  Checkpoint ck;
  const ChiMesh& m = chi.mesh();
  ck.shape = {static_cast<std::size_t>(m.n_theta + 1), static_cast<std::size_t>(m.n_r + 1)};
  ck.data = chi.values();
  ck.config_digest = digest;
  model_fields(chi.params(), ck.fields);
  ck.fields["n_theta"] = std::to_string(m.n_theta);
  ck.fields["n_r"] = std::to_string(m.n_r);
  ck.fields["r_max"] = format_double(m.r_max);
  ck.fields["truncation_tol"] = format_double(truncation_tol);
  return ck;
}

ChiField chi_from_checkpoint(const Checkpoint& ck) {
  auto field = [&](const std::string& k) {
    const auto it = ck.fields.find(k);
    if (it == ck.fields.end()) throw FormatError("chi checkpoint lacks '" + k + "'");
    return it->second;
  };
  ModelParams p;
  p.sigma = std::stod(field("sigma"));
  p.dim = std::stoi(field("d"));
  p.eta = std::stod(field("eta"));
  const std::string pot = field("potential");
  if (pot == "self_propulsion") p.potential = SelfPropulsion{std::stod(field("alpha")), std::stod(field("beta"))};
  else if (pot != "zero") throw FormatError("chi checkpoint with potential '" + pot + "' cannot be restored");
  p.validate();
  const int nt = std::stoi(field("n_theta")), nr = std::stoi(field("n_r"));
  if (ck.shape.size() != 2 || ck.shape[0] != static_cast<std::size_t>(nt + 1) ||
      ck.shape[1] != static_cast<std::size_t>(nr + 1))
    throw FormatError("chi checkpoint shape does not match its mesh");
  PolarGrid grid = build_polar_grid(p, nt, nr, std::stod(field("truncation_tol")));
  if (grid.r_max != std::stod(field("r_max"))) throw FormatError("recomputed r_max differs from the checkpoint");
  const ChiMesh mesh{nt, nr, grid.r_max};
  return ChiField(p, std::move(grid), mesh, ck.data);
}

std::vector<CheckResult> verify_suite(const RunConfig& c) {
  const ModelParams& p = c.model;
  const int d = p.dim;
  std::vector<CheckResult> rows;
  auto add = [&](const std::string& name, double value, double tol) { rows.push_back({name, value, tol, value <= tol}); };

  const PolarGrid grid = build_polar_grid(p, c.n_quad, c.n_quad, c.truncation_tol);
  const EquilibriumTable table = make_equilibrium_table(p, grid);
  const double c1 = compute_c1(p, grid);
  add("c1: moment ratio vs Phi_Omega route", std::abs(c1 - table.c1), 1e-9);
  if (std::holds_alternative<ZeroPotential>(p.potential)) {
    const double z = std::pow(kTwoPi * p.sigma, 0.5 * d);
    add("Z = (2 pi sigma)^(d/2), relative", std::abs(table.Z - z) / z, 1e-9);
    add("c1 = 1 for V = 0", std::abs(table.c1 - 1.0), 1e-9);
  }
  Vector omega(d);
  if (d == 2) omega << 0.8, 0.6;
  else omega << 0.48, 0.6, 0.64;
  add("first moment = c1 Omega", (first_moment(omega, table) - table.c1 * omega).norm(), 1e-9);
  const Matrix proj = Matrix::Identity(d, d) - omega * omega.transpose();
  const Matrix target = p.sigma * table.c1 * proj;
  add("pressure tensor = sigma c1 (I - Omega Omega), relative",
      (pressure_tensor(omega, table) - target).cwiseAbs().maxCoeff() / target.cwiseAbs().maxCoeff(), 1e-8);

  const ChiField chi = compute_chi(p, c.n_chi, c.n_chi, c.chi_tol, c.truncation_tol);
  add("chi algebraic residual", chi.algebraic_residual, c.chi_tol);
  const AdjointKernelReport adj = verify_adjoint_kernel(chi, table, c.n_test, c.seed);
  for (const auto& r : adj.checks) rows.push_back(r);
  const GciReport gci = verify_gci_equivalence(chi, table, c.n_densities, c.n_negative, c.seed + 6);
  add("GCI: max |int Q(f) psi| over axial mixtures", gci.positive_max(), gci.positive_tolerance);
  if (!gci.negative.empty()) {
    const double m = gci.negative_min();
    rows.push_back({"GCI: min |int Q(f) psi| over transverse controls (must exceed)", m, gci.negative_threshold,
                    m > gci.negative_threshold});
  }
  const Coefficients co = compute_coefficients(p, grid, chi);
  add("c2 ratio vs c2_tilde / c1_tilde", std::abs(co.c2 - co.c2_tilde / co.c1_tilde), 1e-10);
  return rows;
}

std::string format_report(const std::vector<CheckResult>& rows) {
  std::size_t w = 5;
  for (const auto& r : rows) w = std::max(w, r.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(w) + 2) << "check" << std::setw(14) << "value" << std::setw(14)
     << "tolerance"
     << "result\n";
  int failed = 0;
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(w) + 2) << r.name << std::setw(14) << std::setprecision(4)
       << std::scientific << r.value << std::setw(14) << r.tolerance << (r.passed ? "PASS" : "FAIL") << "\n";
    failed += !r.passed;
  }
  os << rows.size() - failed << "/" << rows.size() << " checks passed\n";
  return os.str();
}

int dispatch(const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    validate_config(c);
    const fs::path dir(c.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("output_dir", "cannot create '" + c.output_dir + "': " + ec.message());
    if (c.command == "coeffs") return run_coeffs(c, dir, out);
    if (c.command == "chi") return run_chi(c, dir, out);
    if (c.command == "hydro") return run_hydro(c, dir, out);
    if (c.command == "kinetic") return run_kinetic(c, dir, out);
    if (c.command == "compare") return run_compare(c, dir, out);
    return run_verify(c, dir, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"flockhydro: equilibria, collision invariants, coefficients, SOH and particle runs"};
  std::string command, config_path;
  app.add_option("command", command, "coeffs, chi, hydro, kinetic, verify or compare")->required();
  app.add_option("--config", config_path, "key = value config file");
  app.allow_extras();
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitConfig;
  }

  try {
    Overrides overrides;
    const std::vector<std::string> extras = app.remaining();
    for (std::size_t k = 0; k < extras.size(); ++k) {
      const std::string& a = extras[k];
      if (a.rfind("--", 0) != 0 || a.size() < 3) throw ConfigError(a, "expected --key value");
      const std::string body = a.substr(2);
      if (const auto eq = body.find('='); eq != std::string::npos) {
        overrides.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      } else {
        if (k + 1 >= extras.size()) throw ConfigError(body, "missing value");
        overrides.emplace_back(body, extras[++k]);
      }
    }
    overrides.emplace_back("command", command);
    if (const char* env = std::getenv("FLOCKHYDRO_THREADS")) {
      char* end = nullptr;
      const long n = std::strtol(env, &end, 10);
      if (*env == '\0' || *end != '\0' || n < 1) throw ConfigError("FLOCKHYDRO_THREADS", "expected a positive integer");
      omp_set_num_threads(static_cast<int>(std::min<long>(n, omp_get_max_threads())));
    }
    const RunConfig cfg = config_path.empty() ? parse_config_text("", overrides) : parse_config(config_path, overrides);
    return dispatch(cfg, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace flockhydro
