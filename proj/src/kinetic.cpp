#include "flockhydro/kinetic.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>
#include <tuple>

namespace flockhydro {

namespace {

// Reductions are summed per fixed chunk and then in chunk order, so results do
// not depend on the number of threads.
constexpr int kChunk = 4096;
constexpr std::uint32_t kInitTag = 0x80000000u;
constexpr std::uint32_t kPositionTag = 0x90000000u;
constexpr std::uint32_t kBootstrapTag = 0xA0000000u;

double potential_floor(const ModelParams& p) {
  if (const auto* sp = std::get_if<SelfPropulsion>(&p.potential)) return -sp->alpha * sp->alpha / (4.0 * sp->beta);
  if (const auto* tab = std::get_if<TabulatedRadial>(&p.potential)) {
    double m = std::numeric_limits<double>::infinity();
    const int n = 4000;
    for (int k = 0; k <= n; ++k) m = std::min(m, tab->value(tab->last_node() * k / n));
    return m - 1e-12 * std::max(1.0, std::abs(m));
  }
  return 0.0;
}

// One draw from M_Omega for particle p; returns false if the rejection loop
// gives up (never observed for confining potentials at sane sigma).
bool sample_one(const ModelParams& p, const Vector& omega, std::uint64_t particle, const CounterRng& rng,
                std::uint32_t stream, double v_floor, double r_limit, Vector& out) {
  const int d = p.dim;
  const double s = std::sqrt(p.sigma);
  for (std::uint32_t attempt = 0; attempt < 100000; ++attempt) {
    const auto n01 = rng.normals(particle, kInitTag | stream, 3 * attempt);
    const auto n23 = rng.normals(particle, kInitTag | stream, 3 * attempt + 1);
    const auto u = rng.uniforms(particle, kInitTag | stream, 3 * attempt + 2);
    out[0] = omega[0] + s * n01[0];
    out[1] = omega[1] + s * n01[1];
    if (d == 3) out[2] = omega[2] + s * n23[0];
    const double r = out.norm();
    if (r > r_limit) continue;
    const double accept = std::exp(-(p.scaled_potential(r) - p.eta * v_floor) / p.sigma);
    if (u[0] < accept) return true;
  }
  return false;
}

int cell_of(double x, double L, int n) { return std::min(n - 1, std::max(0, static_cast<int>(x / L * n))); }

}  // namespace

ParticleEnsemble make_homogeneous(const ModelParams& params, double epsilon, Matrix velocities,
                                  std::uint64_t seed) {
  params.validate();
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
  if (velocities.cols() < 1 || velocities.rows() != params.dim)
    throw DomainError("velocities must be a d x N matrix with N >= 1");
  if (!velocities.allFinite()) throw DomainError("velocities must be finite");
  ParticleEnsemble e;
  e.params = params;
  e.epsilon = epsilon;
  e.seed = seed;
  e.velocities = std::move(velocities);
  e.n_cells = 1;
  const Orientation o = orientation_of(e.velocities.rowwise().sum());
  e.cell_omega = o.zero ? Vector(Vector::Unit(params.dim, 0)) : o.direction;
  return e;
}

Matrix sample_equilibrium(const ModelParams& params, const Vector& omega, int n, std::uint64_t seed,
                          std::uint32_t stream) {
  params.validate();
  if (omega.size() != params.dim || !(std::abs(omega.norm() - 1.0) <= 1e-12))
    throw DomainError("omega must be a unit vector of dimension d");
  const CounterRng rng{seed};
  const double floor = potential_floor(params);
  const double limit = potential_domain_limit(params.potential);
  Matrix out(params.dim, n);
  int failed = -1;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k) {
    Vector v(params.dim);
    if (!sample_one(params, omega, k, rng, stream, floor, limit, v)) {
#pragma omp critical
      failed = k;
    }
    out.col(k) = v;
  }
  if (failed >= 0) throw IntegrandError("equilibrium rejection sampler did not accept");
  return out;
}

ParticleEnsemble make_inhomogeneous(const ModelParams& params, double epsilon, int n, double box_length,
                                    int n_cells, const std::function<double(double)>& rho0,
                                    const std::function<Vector(double)>& omega0, std::uint64_t seed) {
  params.validate();
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
  if (n < 1 || n_cells < 1 || !(box_length > 0.0)) throw DomainError("invalid particle setup");
  double rmax = 0.0;
  for (int k = 0; k < 20000; ++k) {
    const double r = rho0((k + 0.5) * box_length / 20000);
    if (!(r >= 0.0)) throw DomainError("rho0 must be nonnegative");
    rmax = std::max(rmax, r);
  }
  if (!(rmax > 0.0)) throw DomainError("rho0 vanishes identically");
  rmax *= 1.05;

  ParticleEnsemble e;
  e.params = params;
  e.epsilon = epsilon;
  e.seed = seed;
  e.box_length = box_length;
  e.n_cells = n_cells;
  e.positions.resize(n);
  e.velocities.resize(params.dim, n);
  const CounterRng rng{seed};
  const double floor = potential_floor(params);
  const double limit = potential_domain_limit(params.potential);
  int failed = -1;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k) {
    double x = 0.0;
    for (std::uint32_t attempt = 0;; ++attempt) {
      const auto u = rng.uniforms(k, kPositionTag, attempt);
      x = u[0] * box_length;
      if (u[1] * rmax < rho0(x)) break;
    }
    e.positions[k] = x;
    Vector om = omega0(x);
    om /= om.norm();
    Vector v(params.dim);
    if (!sample_one(params, om, k, rng, 0, floor, limit, v)) {
#pragma omp critical
      failed = k;
    }
    e.velocities.col(k) = v;
  }
  if (failed >= 0) throw IntegrandError("equilibrium rejection sampler did not accept");
  e.cell_omega.resize(params.dim, n_cells);
  for (int c = 0; c < n_cells; ++c) {
    const Vector om = omega0((c + 0.5) * box_length / n_cells);
    if (!(om.norm() >= 1e-14)) throw ZeroOrientation("initial orientation vanishes");
    e.cell_omega.col(c) = om / om.norm();
  }
  return e;
}

Matrix empirical_orientation(ParticleEnsemble& e) {
  const int d = e.dim(), n = e.size();
  const int nc = e.homogeneous() ? 1 : e.n_cells;
  if (e.frozen_omega) return e.frozen_omega->replicate(1, nc);
  const int chunks = (n + kChunk - 1) / kChunk;
  std::vector<Matrix> partial(chunks, Matrix::Zero(d, nc));
#pragma omp parallel for schedule(static)
  for (int c = 0; c < chunks; ++c) {
    const int hi = std::min(n, (c + 1) * kChunk);
    for (int k = c * kChunk; k < hi; ++k) {
      const int cell = e.homogeneous() ? 0 : cell_of(e.positions[k], e.box_length, nc);
      partial[c].col(cell) += e.velocities.col(k);
    }
  }
  Matrix sum = Matrix::Zero(d, nc);
  for (const Matrix& m : partial) sum += m;
  Matrix out(d, nc);
  for (int c = 0; c < nc; ++c) {
    const Orientation o = orientation_of(sum.col(c));
    if (o.zero || o.near_zero) {
      out.col(c) = e.cell_omega.col(c);
      ++e.zero_moment_warnings;
      if (e.zero_moment_warnings == 1)
        std::cerr << "warning: zero velocity moment in alignment cell " << c
                  << ", keeping the previous orientation\n";
    } else {
      out.col(c) = o.direction;
    }
  }
  e.cell_omega = out;
  return out;
}

void kinetic_step(ParticleEnsemble& e, double dt) {
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  if (dt > 0.1 * e.epsilon * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "dt = " << dt << " exceeds 0.1 epsilon = " << 0.1 * e.epsilon;
    throw StiffStep(os.str());
  }
  const Matrix om = empirical_orientation(e);
  const ModelParams& p = e.params;
  const int d = e.dim(), n = e.size();
  const double a = dt / e.epsilon;
  const double b = e.noise ? std::sqrt(2.0 * p.sigma * dt / e.epsilon) : 0.0;
  const CounterRng rng{e.seed};
  const auto step_word = static_cast<std::uint32_t>(e.steps_taken & 0x7FFFFFFFu);
  const double limit = potential_domain_limit(p.potential);
  const bool homog = e.homogeneous();
  int bad = -1;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k) {
    double v[3] = {0.0, 0.0, 0.0};
    for (int m = 0; m < d; ++m) v[m] = e.velocities(m, k);
    const int cell = homog ? 0 : cell_of(e.positions[k], e.box_length, e.n_cells);
    const double r = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (!(r <= limit)) {
#pragma omp critical
      bad = k;
      continue;
    }
    const double g = r > 0.0 ? p.scaled_potential_derivative(r) / r : 0.0;
    const auto n01 = rng.normals(k, step_word, 0);
    double xi[3] = {n01[0], n01[1], 0.0};
    if (d == 3) xi[2] = rng.normals(k, step_word, 1)[0];
    if (!homog) {
      double x = e.positions[k] + dt * v[0];
      x -= e.box_length * std::floor(x / e.box_length);
      if (x >= e.box_length) x = 0.0;
      e.positions[k] = x;
    }
    for (int m = 0; m < d; ++m)
      e.velocities(m, k) = v[m] - a * (v[m] - om(m, cell) + g * v[m]) + b * xi[m];
  }
  ++e.steps_taken;
  if (bad >= 0) {
    std::ostringstream os;
    os << "particle " << bad << " left the domain of the tabulated potential";
    throw DomainError(os.str());
  }
  if (!e.velocities.allFinite()) throw StiffStep("velocities became non-finite; reduce dt");
}

MomentField empirical_moments(const ParticleEnsemble& e, int n_bins, double total_mass,
                              const std::vector<int>& indices) {
  if (n_bins < 1) throw DomainError("n_bins must be at least 1");
  const int d = e.dim();
  const double L = e.homogeneous() ? 1.0 : e.box_length;
  MomentField f;
  f.edges.resize(n_bins + 1);
  for (int b = 0; b <= n_bins; ++b) f.edges[b] = L * b / n_bins;
  f.rho_hat.assign(n_bins, 0.0);
  f.samples_per_bin.assign(n_bins, 0);
  f.mean_velocity = Matrix::Zero(d, n_bins);
  f.omega_hat = Matrix::Zero(d, n_bins);
  f.empty.assign(n_bins, true);
  for (int k : indices) {
    const int b = e.homogeneous() ? 0 : cell_of(e.positions[k], L, n_bins);
    ++f.samples_per_bin[b];
    f.mean_velocity.col(b) += e.velocities.col(k);
  }
  const double w = total_mass / static_cast<double>(indices.size());
  const double dx = L / n_bins;
  for (int b = 0; b < n_bins; ++b) {
    f.rho_hat[b] = f.samples_per_bin[b] * w / dx;
    if (f.samples_per_bin[b] == 0) continue;
    f.mean_velocity.col(b) /= f.samples_per_bin[b];
    const Orientation o = orientation_of(f.mean_velocity.col(b));
    f.empty[b] = o.zero;
    f.omega_hat.col(b) = o.direction;
  }
  return f;
}

MomentField empirical_moments(const ParticleEnsemble& e, int n_bins, double total_mass) {
  std::vector<int> all(e.size());
  for (int k = 0; k < e.size(); ++k) all[k] = k;
  return empirical_moments(e, n_bins, total_mass, all);
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw DomainError("KS statistic needs samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double F = cdf(samples[i]);
    dmax = std::max({dmax, std::abs(F - i / n), std::abs((i + 1) / n - F)});
  }
  return dmax;
}

namespace {

double interp(const std::vector<double>& x, const std::vector<double>& y, double t) {
  if (t <= x.front()) return y.front();
  if (t >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), t);
  const std::size_t k = it - x.begin();
  const double s = (t - x[k - 1]) / (x[k] - x[k - 1]);
  return y[k - 1] + s * (y[k] - y[k - 1]);
}

}  // namespace

double MarginalCdfs::speed(double r) const { return interp(r_knots, r_cdf, r); }
double MarginalCdfs::angle(double theta) const { return interp(theta_knots, theta_cdf, theta); }

MarginalCdfs equilibrium_marginals(const ModelParams& params, int cells) {
  const double r_max = truncation_radius(params);
  const double ls = peak_log_weight(params, r_max);
  const int d = params.dim;
  const Rule1D g = gauss_legendre(4, 0.0, 1.0);
  const Rule1D th_full = gauss_legendre(256, 0.0, std::numbers::pi);
  const Rule1D r_full = gauss_legendre(512, 0.0, r_max);
  auto density = [&](double th, double r) {
    return std::exp(params.log_weight(std::cos(th), r) - ls) * std::pow(r, d - 1) *
           (d == 3 ? std::sin(th) : 1.0);
  };
  MarginalCdfs m;
  m.r_knots.resize(cells + 1);
  m.r_cdf.assign(cells + 1, 0.0);
  m.theta_knots.resize(cells + 1);
  m.theta_cdf.assign(cells + 1, 0.0);
  const double hr = r_max / cells, ht = std::numbers::pi / cells;
  for (int k = 0; k <= cells; ++k) {
    m.r_knots[k] = k * hr;
    m.theta_knots[k] = k * ht;
  }
  for (int k = 0; k < cells; ++k) {
    double mr = 0.0, mt = 0.0;
    for (std::size_t q = 0; q < g.size(); ++q) {
      const double r = (k + g.nodes[q]) * hr, th = (k + g.nodes[q]) * ht;
      double inner_r = 0.0, inner_t = 0.0;
      for (std::size_t i = 0; i < th_full.size(); ++i) inner_r += th_full.weights[i] * density(th_full.nodes[i], r);
      for (std::size_t j = 0; j < r_full.size(); ++j) inner_t += r_full.weights[j] * density(th, r_full.nodes[j]);
      mr += g.weights[q] * hr * inner_r;
      mt += g.weights[q] * ht * inner_t;
    }
    m.r_cdf[k + 1] = m.r_cdf[k] + mr;
    m.theta_cdf[k + 1] = m.theta_cdf[k] + mt;
  }
  for (double& x : m.r_cdf) x /= m.r_cdf.back();
  for (double& x : m.theta_cdf) x /= m.theta_cdf.back();
  return m;
}

namespace {

std::pair<double, double> marginal_ks(const ParticleEnsemble& e, const Vector& om, const MarginalCdfs& cdfs) {
  const int n = e.size();
  std::vector<double> speeds(n), angles(n);
  for (int k = 0; k < n; ++k) {
    const double r = e.velocities.col(k).norm();
    speeds[k] = r;
    angles[k] = std::acos(std::clamp(e.velocities.col(k).dot(om) / r, -1.0, 1.0));
  }
  return {ks_statistic(std::move(speeds), [&](double r) { return cdfs.speed(r); }),
          ks_statistic(std::move(angles), [&](double t) { return cdfs.angle(t); })};
}

}  // namespace

RelaxationReport relaxation_test(const ModelParams& params, double epsilon, int n, double t_end,
                                 std::uint64_t seed, const RelaxationOptions& options) {
  params.validate();
  if (!(t_end >= 10.0 * epsilon)) throw DomainError("t_end must be at least 10 epsilon");
  if (n < 1) throw DomainError("N must be at least 1");
  const int d = params.dim;
  Matrix v0;
  if (options.start_at_equilibrium) {
    v0 = sample_equilibrium(params, Vector::Unit(d, 0), n, seed, 1);
  } else {
    // off-equilibrium start: Gaussian around 0.5 e_1 with the noise variance
    const CounterRng rng{seed};
    v0.resize(d, n);
    const double s = std::sqrt(params.sigma);
    for (int k = 0; k < n; ++k) {
      const auto a = rng.normals(k, kInitTag | 2, 0), b = rng.normals(k, kInitTag | 2, 1);
      v0(0, k) = 0.5 + s * a[0];
      v0(1, k) = s * a[1];
      if (d == 3) v0(2, k) = s * b[0];
    }
  }
  ParticleEnsemble e = make_homogeneous(params, epsilon, std::move(v0), seed);
  const MarginalCdfs cdfs = equilibrium_marginals(params);
  const long steps = static_cast<long>(std::ceil(t_end / (options.dt_over_epsilon * epsilon) - 1e-9));
  const double dt = t_end / steps;
  RelaxationReport rep;
  long next_check = options.n_checkpoints > 0 ? steps / options.n_checkpoints : steps + 1;
  int done_checks = 0;
  for (long s = 1; s <= steps; ++s) {
    kinetic_step(e, dt);
    if (s == next_check && s < steps) {
      const Vector om = orientation_of(e.velocities.rowwise().sum()).direction;
      const auto [ks_r, ks_t] = marginal_ks(e, om, cdfs);
      rep.checkpoints.push_back({s * dt, ks_r, ks_t});
      ++done_checks;
      next_check = steps * (done_checks + 1) / options.n_checkpoints;
    }
  }
  const Vector mean = e.velocities.rowwise().mean();
  rep.final_orientation = orientation_of(mean).direction;
  const auto [ks_r, ks_t] = marginal_ks(e, rep.final_orientation, cdfs);
  rep.ks_speed = ks_r;
  rep.ks_angle = ks_t;
  rep.mean_velocity_norm = mean.norm();
  rep.c1 = compute_c1(params, build_polar_grid(params, 96, 96));
  return rep;
}

ComparisonRow compare_to_hydro(const ParticleEnsemble& e, const HydroState& ref, double total_mass, int bootstrap,
                               std::uint64_t seed) {
  const int nb = ref.mesh.nx;
  const double dx = ref.mesh.dx();
  auto errors = [&](const MomentField& f) {
    double er = 0.0, eo = 0.0;
    for (int b = 0; b < nb; ++b) {
      er += std::abs(f.rho_hat[b] - ref.rho[b]) * dx;
      const double c = f.empty[b] ? -1.0 : std::clamp(f.omega_hat.col(b).dot(ref.omega.col(b)), -1.0, 1.0);
      eo += std::acos(c) * dx;
    }
    return std::pair{er, eo};
  };
  ComparisonRow row;
  row.epsilon = e.epsilon;
  std::tie(row.err_rho, row.err_omega) = errors(empirical_moments(e, nb, total_mass));
  if (bootstrap > 1) {
    const CounterRng rng{seed};
    const int n = e.size();
    std::vector<int> idx(n);
    double sr = 0, sr2 = 0, so = 0, so2 = 0;
    for (int b = 0; b < bootstrap; ++b) {
      for (int k = 0; k < n; ++k) {
        const double u = rng.uniforms(k, kBootstrapTag, b)[0];
        idx[k] = std::min(n - 1, static_cast<int>(u * n));
      }
      const auto [er, eo] = errors(empirical_moments(e, nb, total_mass, idx));
      sr += er, sr2 += er * er, so += eo, so2 += eo * eo;
    }
    const double B = bootstrap;
    row.err_rho_sd = std::sqrt(std::max(0.0, (sr2 - sr * sr / B) / (B - 1)));
    row.err_omega_sd = std::sqrt(std::max(0.0, (so2 - so * so / B) / (B - 1)));
  }
  return row;
}

std::vector<ComparisonRow> hydro_comparison(const ModelParams& params, const Coefficients& coeffs,
                                            const std::vector<double>& epsilons, int n,
                                            const HydroComparisonSetup& setup, std::uint64_t seed) {
  if (!setup.rho0 || !setup.omega0) throw DomainError("initial fields are required");
  if (setup.n_bins < 3 || setup.soh_refinement < 1) throw DomainError("invalid comparison mesh");
  const int nb = setup.n_bins, fine = nb * setup.soh_refinement;
  const double L = setup.box_length;

  // reference solution on a refined mesh, averaged onto the bins
  const HydroState init = init_state(
      SpatialMesh::line(fine, L), [&](const Vector& x) { return setup.rho0(x[0]); },
      [&](const Vector& x) { return setup.omega0(x[0]); }, coeffs);
  const double total_mass = init.total_mass();
  SolverConfig cfg;
  cfg.t_end = setup.t_end;
  const HydroState fine_end = run(init, cfg).back();
  HydroState ref;
  ref.mesh = SpatialMesh::line(nb, L);
  ref.coeffs = coeffs;
  ref.time = fine_end.time;
  ref.rho.assign(nb, 0.0);
  ref.omega = Matrix::Zero(params.dim, nb);
  for (int k = 0; k < fine; ++k) {
    const int b = k / setup.soh_refinement;
    ref.rho[b] += fine_end.rho[k] / setup.soh_refinement;
    ref.omega.col(b) += fine_end.rho[k] * fine_end.omega.col(k);
  }
  for (int b = 0; b < nb; ++b) ref.omega.col(b).normalize();

  std::vector<ComparisonRow> rows;
  for (double eps : epsilons) {
    // common random numbers across epsilon: same seed, same initial sample
    ParticleEnsemble e = make_inhomogeneous(params, eps, n, L, nb, setup.rho0, setup.omega0, seed);
    if (setup.t_end > 0.0) {
      const long steps = static_cast<long>(std::ceil(setup.t_end / (setup.dt_over_epsilon * eps) - 1e-9));
      const double dt = setup.t_end / steps;
      for (long s = 0; s < steps; ++s) kinetic_step(e, dt);
    }
    rows.push_back(compare_to_hydro(e, ref, total_mass, setup.bootstrap, seed + 1));
  }
  return rows;
}

bool errors_decrease(const std::vector<ComparisonRow>& rows) {
  std::vector<ComparisonRow> r = rows;
  std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.epsilon > b.epsilon; });
  for (std::size_t k = 0; k + 1 < r.size(); ++k) {
    const double band_rho = std::hypot(r[k].err_rho_sd, r[k + 1].err_rho_sd);
    const double band_om = std::hypot(r[k].err_omega_sd, r[k + 1].err_omega_sd);
    if (!(r[k].err_rho - r[k + 1].err_rho > band_rho)) return false;
    if (!(r[k].err_omega - r[k + 1].err_omega > band_om)) return false;
  }
  return true;
}

}  // namespace flockhydro
