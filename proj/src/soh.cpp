#include "flockhydro/soh.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace flockhydro {

namespace {

constexpr double kVacuum = 1e-30;

int wrap(int i, int n) { return ((i % n) + n) % n; }

// Neighbor of cell (i, j) shifted by +-1 along axis `ax`.
int neighbor(const SpatialMesh& m, int i, int j, int ax, int shift) {
  return ax == 0 ? m.index(wrap(i + shift, m.nx), j) : m.index(i, wrap(j + shift, m.ny));
}

double face_flux(double rl, double rr, double al, double ar, FluxKind kind) {
  if (kind == FluxKind::Upwind) {
    const double u = 0.5 * (al + ar);
    return u >= 0.0 ? u * rl : u * rr;
  }
  const double s = std::max(std::abs(al), std::abs(ar));
  return 0.5 * (al * rl + ar * rr) - 0.5 * s * (rr - rl);
}

void check_vacuum(const HydroState& s) {
  for (int k = 0; k < s.mesh.cells(); ++k)
    if (!(s.rho[k] >= kVacuum)) {
      std::ostringstream os;
      os << "density " << s.rho[k] << " below 1e-30 in cell " << k << " at t = " << s.time;
      throw VacuumCell(os.str());
    }
}

}  // namespace

SpatialMesh SpatialMesh::line(int nx, double lx) {
  if (nx < 3 || !(lx > 0.0)) throw DomainError("1D mesh needs at least 3 cells and positive length");
  SpatialMesh m;
  m.space_dim = 1;
  m.nx = nx;
  m.lx = lx;
  return m;
}

SpatialMesh SpatialMesh::square(int nx, int ny, double lx, double ly) {
  if (nx < 3 || ny < 3 || !(lx > 0.0) || !(ly > 0.0))
    throw DomainError("2D mesh needs at least 3 cells per axis and positive lengths");
  SpatialMesh m;
  m.space_dim = 2;
  m.nx = nx;
  m.ny = ny;
  m.lx = lx;
  m.ly = ly;
  return m;
}

Vector SpatialMesh::center(int i, int j) const {
  Vector x(space_dim);
  x[0] = (i + 0.5) * dx();
  if (space_dim == 2) x[1] = (j + 0.5) * dy();
  return x;
}

void SolverConfig::validate() const {
  if (!(cfl > 0.0 && cfl <= 1.0)) throw DomainError("cfl must lie in (0, 1]");
  if (!(t_end >= 0.0)) throw DomainError("t_end must be nonnegative");
  if (!(output_every >= 0.0)) throw DomainError("output_every must be nonnegative");
  if (!project_each_step) throw DomainError("only project_each_step is supported");
}

double HydroState::total_mass() const {
  double m = 0.0;
  for (double r : rho) m += r;
  return m * mesh.cell_volume();
}

double HydroState::max_unit_defect() const {
  double e = 0.0;
  for (int k = 0; k < omega.cols(); ++k) e = std::max(e, std::abs(omega.col(k).norm() - 1.0));
  return e;
}

HydroState init_state(const SpatialMesh& mesh, const std::function<double(const Vector&)>& rho_field,
                      const std::function<Vector(const Vector&)>& omega_field, const Coefficients& coeffs) {
  const int d = coeffs.params.dim;
  if (mesh.space_dim > d) throw DomainError("space dimension exceeds velocity dimension");
  HydroState s;
  s.mesh = mesh;
  s.coeffs = coeffs;
  s.rho.resize(mesh.cells());
  s.omega.resize(d, mesh.cells());
  for (int j = 0; j < mesh.ny; ++j)
    for (int i = 0; i < mesh.nx; ++i) {
      const Vector x = mesh.center(i, j);
      const int k = mesh.index(i, j);
      const double r = rho_field(x);
      if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("rho_field must be finite and nonnegative");
      const Vector w = omega_field(x);
      if (w.size() != d) throw DomainError("omega_field has the wrong dimension");
      const double n = w.norm();
      if (!(n >= 1e-14)) {
        std::ostringstream os;
        os << "orientation vanishes at cell " << k << " (|omega| = " << n << ")";
        throw ZeroOrientation(os.str());
      }
      s.rho[k] = r;
      s.omega.col(k) = w / n;
    }
  return s;
}

double stable_dt(const HydroState& state, const SolverConfig& config) {
  const double h = state.mesh.space_dim == 1 ? state.mesh.dx() : std::min(state.mesh.dx(), state.mesh.dy());
  const double smax = std::max(std::abs(state.coeffs.c1), std::abs(state.coeffs.c2)) +
                      std::sqrt(state.coeffs.params.sigma);
  return config.cfl * h / smax;
}

HydroState step(const HydroState& state, double dt, const SolverConfig& config) {
  check_vacuum(state);
  const SpatialMesh& m = state.mesh;
  const int d = state.velocity_dim();
  const int nc = m.cells();
  const double c1 = state.coeffs.c1, c2 = state.coeffs.c2, sigma = state.coeffs.params.sigma;
  const double h[2] = {m.dx(), m.dy()};

  HydroState next = state;
  next.time = state.time + dt;

#pragma omp parallel for schedule(static)
  for (int k = 0; k < nc; ++k) {
    const int i = k % m.nx, j = k / m.nx;
    double drho = 0.0;
    Vector transport = Vector::Zero(d);
    Vector grad = Vector::Zero(d);
    const Vector om = state.omega.col(k);
    for (int ax = 0; ax < m.space_dim; ++ax) {
      const int kp = neighbor(m, i, j, ax, 1), km = neighbor(m, i, j, ax, -1);
      const double a = c1 * om[ax];
      const double ap = c1 * state.omega(ax, kp), am = c1 * state.omega(ax, km);
      const double f_plus = face_flux(state.rho[k], state.rho[kp], a, ap, config.flux);
      const double f_minus = face_flux(state.rho[km], state.rho[k], am, a, config.flux);
      drho -= (f_plus - f_minus) / h[ax];

      const double u = c2 * om[ax];
      const Vector& op = state.omega.col(kp);
      const Vector& omm = state.omega.col(km);
      if (config.flux == FluxKind::Upwind) {
        transport += u >= 0.0 ? Vector(u * (om - omm) / h[ax]) : Vector(u * (op - om) / h[ax]);
      } else {
        const double s = std::max({std::abs(u), std::abs(c2 * op[ax]), std::abs(c2 * omm[ax])});
        transport += u * (op - omm) / (2 * h[ax]) - s * (op - 2 * om + omm) / (2 * h[ax]);
      }
      grad[ax] = (state.rho[kp] - state.rho[km]) / (2 * h[ax]);
    }
    const Vector source = sigma * (grad - om.dot(grad) * om) / state.rho[k];
    next.rho[k] = state.rho[k] + dt * drho;
    Vector w = om - dt * (transport + source);
    next.omega.col(k) = w / w.norm();
  }
  for (int k = 0; k < nc; ++k)
    if (!std::isfinite(next.omega(0, k))) {
      std::ostringstream os;
      os << "orientation update degenerated in cell " << k << " at t = " << next.time;
      throw ZeroOrientation(os.str());
    }
  check_vacuum(next);
  return next;
}

std::vector<HydroState> run(const HydroState& state, const SolverConfig& config) {
  config.validate();
  std::vector<HydroState> out{state};
  const double t0 = state.time;
  const double t_end = t0 + config.t_end;
  const double dt_max = stable_dt(state, config);
  double next_out = config.output_every > 0.0 ? t0 + config.output_every : t_end;
  HydroState cur = state;
  // tolerance for landing on output times
  const double eps = 1e-12 * std::max(1.0, t_end);
  while (cur.time < t_end - eps) {
    const double target = std::min(next_out, t_end);
    cur = step(cur, std::min(dt_max, target - cur.time), config);
    if (cur.time >= target - eps) {
      cur.time = target;
      if (target < t_end - eps) {
        out.push_back(cur);
        next_out += config.output_every;
      }
    }
  }
  if (config.t_end > 0.0) out.push_back(cur);
  return out;
}

WaveSpeeds wave_speed_probe(const HydroState& state, const SolverConfig& config) {
  if (state.mesh.space_dim != 1) throw DomainError("wave_speed_probe needs a 1D state");
  const int n = state.mesh.nx;
  std::vector<double> sorted = state.rho;
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  const double base = sorted[n / 2];
  auto amplitude = [&](const HydroState& s, int& peak) {
    double amax = 0.0;
    peak = 0;
    for (int k = 0; k < n; ++k)
      if (std::abs(s.rho[k] - base) > amax) amax = std::abs(s.rho[k] - base), peak = k;
    return amax;
  };
  int peak0 = 0;
  if (amplitude(state, peak0) <= 1e-14 * std::max(1.0, std::abs(base))) return {};

  SolverConfig cfg = config;
  const double smax = std::max(std::abs(state.coeffs.c1), std::abs(state.coeffs.c2)) +
                      std::sqrt(state.coeffs.params.sigma);
  const double horizon = 0.25 * state.mesh.lx / smax;
  cfg.t_end = config.t_end > 0.0 ? std::min(config.t_end, horizon) : horizon;
  cfg.output_every = cfg.t_end / 40.0;
  const std::vector<HydroState> traj = run(state, cfg);

  // edges of the half-maximum region around the current peak, unwrapped by
  // accumulating minimal-image displacements between snapshots
  std::vector<double> t, left, right;
  double prev_l = 0.0, prev_r = 0.0, acc_l = 0.0, acc_r = 0.0;
  const double dx = state.mesh.dx(), L = state.mesh.lx;
  for (std::size_t s = 0; s < traj.size(); ++s) {
    int peak = 0;
    const double amax = amplitude(traj[s], peak);
    if (amax <= 0.0) continue;
    int lo = peak, hi = peak;
    for (int step = 1; step < n; ++step) {
      if (std::abs(traj[s].rho[wrap(peak - step, n)] - base) >= 0.5 * amax) lo = peak - step;
      else break;
    }
    for (int step = 1; step < n; ++step) {
      if (std::abs(traj[s].rho[wrap(peak + step, n)] - base) >= 0.5 * amax) hi = peak + step;
      else break;
    }
    const double xl = (lo + 0.0) * dx, xr = (hi + 1.0) * dx;
    if (t.empty()) {
      acc_l = xl;
      acc_r = xr;
    } else {
      auto min_image = [L](double delta) { return delta - L * std::round(delta / L); };
      acc_l += min_image(xl - prev_l);
      acc_r += min_image(xr - prev_r);
    }
    prev_l = xl;
    prev_r = xr;
    t.push_back(traj[s].time);
    left.push_back(acc_l);
    right.push_back(acc_r);
  }
  auto slope = [&](const std::vector<double>& y) {
    const double nn = static_cast<double>(t.size());
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t k = 0; k < t.size(); ++k) st += t[k], sy += y[k], stt += t[k] * t[k], sty += t[k] * y[k];
    const double den = nn * stt - st * st;
    return den > 0.0 ? (nn * sty - st * sy) / den : 0.0;
  };
  const double a = slope(left), b = slope(right);
  return {std::min(a, b), std::max(a, b)};
}

}  // namespace flockhydro
