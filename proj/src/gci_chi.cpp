#include "flockhydro/gci_chi.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/SparseCholesky>

namespace flockhydro {

namespace {

constexpr double kPi = std::numbers::pi;
// Exponent floor for element weights: keeps far-tail rows of the matrix
// nonzero without affecting the solution where the weight matters.
constexpr double kMinLogWeight = -700.0;
constexpr int kDirectLimit = 100000;
constexpr int kBallRadialPoints = 48;

double clamped_weight(const ModelParams& p, double log_scale, double c, double r) {
  const double lw = p.log_weight(c, r) - log_scale;
  if (std::isnan(lw)) return lw;
  return std::exp(std::max(lw, kMinLogWeight));
}

// Coefficients of the (theta, r) energy at one point.
struct EnergyWeights {
  double a_theta, a_r, mass, load, measure;
};

EnergyWeights energy_weights(const ModelParams& p, double log_scale, double th, double r) {
  const double s = std::sin(th);
  const double e = clamped_weight(p, log_scale, std::cos(th), r);
  EnergyWeights w{};
  if (p.dim == 2) {
    w.a_theta = p.sigma * e / r;
    w.a_r = p.sigma * r * e;
    w.mass = 0.0;
    w.load = r * r * s * e;
    w.measure = r * e;
  } else {
    w.a_theta = p.sigma * s * e;
    w.a_r = p.sigma * r * r * s * e;
    w.mass = p.sigma * e / s;
    w.load = r * r * r * s * s * e;
    w.measure = r * r * s * e;
  }
  return w;
}

SparseMatrix jacobi_scaled(const SparseMatrix& A, const Eigen::VectorXd& s) {
  SparseMatrix B = A;
  for (int k = 0; k < B.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(B, k); it; ++it) it.valueRef() *= s[it.row()] * s[it.col()];
  return B;
}

}  // namespace

double ChiMesh::d_theta() const { return kPi / n_theta; }

std::vector<double> ChiMesh::theta_edges() const {
  std::vector<double> out(n_theta + 1);
  for (int i = 0; i <= n_theta; ++i) out[i] = theta_vertex(i);
  out.back() = kPi;
  return out;
}

std::vector<double> ChiMesh::r_edges() const {
  std::vector<double> out(n_r + 1);
  for (int j = 0; j <= n_r; ++j) out[j] = r_vertex(j);
  out.back() = r_max;
  return out;
}

std::string BoundaryPolicy::describe() const {
  std::string s = dirichlet_axis ? "dirichlet(theta=0,pi)" : "natural(theta=0,pi)";
  s += dirichlet_origin ? " dirichlet(r=0)" : " natural(r=0)";
  return s + " natural(r=r_max)";
}

WeakFormSystem assemble_weak_form(const ModelParams& params, const PolarGrid& grid,
                                  const BoundaryPolicy& policy) {
  params.validate();
  if (grid.dim != params.dim) throw DomainError("grid dimension does not match the model");
  WeakFormSystem sys;
  sys.params = params;
  sys.grid = grid;
  sys.boundary_policy = policy;
  ChiMesh& mesh = sys.mesh;
  mesh.n_theta = static_cast<int>(grid.n_theta());
  mesh.n_r = static_cast<int>(grid.n_r());
  mesh.r_max = grid.r_max;

  const int nt = mesh.n_theta, nr = mesh.n_r;
  sys.unknown_of_vertex.assign(mesh.vertex_count(), -1);
  int n = 0;
  for (int i = 0; i <= nt; ++i)
    for (int j = 0; j <= nr; ++j) {
      if (policy.dirichlet_axis && (i == 0 || i == nt)) continue;
      if (policy.dirichlet_origin && j == 0) continue;
      sys.unknown_of_vertex[mesh.vertex(i, j)] = n++;
    }

  const Rule1D g = gauss_legendre(3, 0.0, 1.0);
  const double dt = mesh.d_theta(), dr = mesh.d_r();
  std::vector<Eigen::Triplet<double>> t_theta, t_r, t_mass;
  t_theta.reserve(16 * nt * nr);
  t_r.reserve(16 * nt * nr);
  if (params.dim == 3) t_mass.reserve(16 * nt * nr);
  sys.rhs = Eigen::VectorXd::Zero(n);

  for (int a = 0; a < nt; ++a)
    for (int b = 0; b < nr; ++b) {
      double Kt[4][4] = {}, Kr[4][4] = {}, Km[4][4] = {}, F[4] = {};
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) {
          const double s = g.nodes[p], t = g.nodes[q];
          const double th = (a + s) * dt, r = (b + t) * dr;
          const double wq = g.weights[p] * g.weights[q] * dt * dr;
          const EnergyWeights w = energy_weights(params, grid.log_scale, th, r);
          if (!std::isfinite(w.a_theta) || !std::isfinite(w.a_r) || !std::isfinite(w.mass) ||
              !std::isfinite(w.load)) {
            std::ostringstream os;
            os << "nonfinite elemental weight in element (" << a << ", " << b << ") at theta = " << th
               << ", r = " << r;
            throw SingularAssembly(os.str());
          }
          // local vertex order: (0,0), (1,0), (0,1), (1,1) in (theta, r)
          const double N[4] = {(1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t};
          const double Ns[4] = {-(1 - t) / dt, (1 - t) / dt, -t / dt, t / dt};
          const double Nt[4] = {-(1 - s) / dr, -s / dr, (1 - s) / dr, s / dr};
          for (int k = 0; k < 4; ++k) {
            F[k] += wq * w.load * N[k];
            for (int l = 0; l < 4; ++l) {
              Kt[k][l] += wq * w.a_theta * Ns[k] * Ns[l];
              Kr[k][l] += wq * w.a_r * Nt[k] * Nt[l];
              Km[k][l] += wq * w.mass * N[k] * N[l];
            }
          }
        }
      const int vid[4] = {mesh.vertex(a, b), mesh.vertex(a + 1, b), mesh.vertex(a, b + 1),
                          mesh.vertex(a + 1, b + 1)};
      for (int k = 0; k < 4; ++k) {
        const int gk = sys.unknown_of_vertex[vid[k]];
        if (gk < 0) continue;
        sys.rhs[gk] += F[k];
        for (int l = 0; l < 4; ++l) {
          const int gl = sys.unknown_of_vertex[vid[l]];
          if (gl < 0) continue;
          t_theta.emplace_back(gk, gl, Kt[k][l]);
          t_r.emplace_back(gk, gl, Kr[k][l]);
          if (params.dim == 3) t_mass.emplace_back(gk, gl, Km[k][l]);
        }
      }
    }

  sys.theta_part.resize(n, n);
  sys.r_part.resize(n, n);
  sys.zeroth_order_part.resize(n, n);
  sys.theta_part.setFromTriplets(t_theta.begin(), t_theta.end());
  sys.r_part.setFromTriplets(t_r.begin(), t_r.end());
  sys.zeroth_order_part.setFromTriplets(t_mass.begin(), t_mass.end());
  sys.matrix = sys.theta_part + sys.r_part + sys.zeroth_order_part;
  return sys;
}

int conjugate_gradient(const SparseMatrix& A, const Eigen::VectorXd& b, Eigen::VectorXd& x, double tol,
                       int max_iterations) {
  const Eigen::VectorXd inv_diag = A.diagonal().cwiseInverse();
  if (x.size() != b.size()) x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd r = b - A * x;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    return 0;
  }
  Eigen::VectorXd z = inv_diag.cwiseProduct(r);
  Eigen::VectorXd p = z, Ap(b.size());
  double rz = r.dot(z);
  for (int it = 1; it <= max_iterations; ++it) {
    Ap.noalias() = A * p;
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) {
      std::ostringstream os;
      os << "CG breakdown after " << it << " iterations (p^T A p = " << pAp << ")";
      throw NoConvergence(os.str());
    }
    const double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    if (r.norm() <= tol * bnorm) {
      // the recursive residual drifts; confirm against b - A x and restart if needed
      r = b - A * x;
      if (r.norm() <= tol * bnorm) return it;
      z = inv_diag.cwiseProduct(r);
      p = z;
      rz = r.dot(z);
      continue;
    }
    z = inv_diag.cwiseProduct(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  std::ostringstream os;
  os << "CG did not converge in " << max_iterations << " iterations, relative residual "
     << (b - A * x).norm() / bnorm;
  throw NoConvergence(os.str());
}

ChiField solve_chi(const WeakFormSystem& system, double tol) {
  if (!(tol > 0.0 && tol <= 1e-4)) throw DomainError("solver tolerance must lie in (0, 1e-4]");
  const SparseMatrix& A = system.matrix;
  const Eigen::VectorXd& b = system.rhs;
  const int n = system.unknowns();
  Eigen::VectorXd diag = A.diagonal();
  for (int k = 0; k < n; ++k)
    if (!(diag[k] > 0.0)) throw SingularAssembly("nonpositive diagonal entry at unknown " + std::to_string(k));

  Eigen::VectorXd x;
  int iterations = 0;
  std::string solver;
  const double bnorm = b.norm();
  if (n < kDirectLimit) {
    const Eigen::VectorXd s = diag.cwiseSqrt().cwiseInverse();
    const SparseMatrix As = jacobi_scaled(A, s);
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(As);
    if (ldlt.info() != Eigen::Success) throw SingularAssembly("sparse LDL^T factorization failed");
    Eigen::VectorXd xs = ldlt.solve(s.cwiseProduct(b));
    // a few refinement sweeps against the scaled residual
    for (int sweep = 0; sweep < 3; ++sweep) {
      const Eigen::VectorXd rs = s.cwiseProduct(b) - As * xs;
      if (rs.norm() <= 1e-3 * tol * bnorm * s.maxCoeff()) break;
      xs += ldlt.solve(rs);
    }
    x = s.cwiseProduct(xs);
    solver = "ldlt";
  } else {
    x = Eigen::VectorXd::Zero(n);
    iterations = conjugate_gradient(A, b, x, tol, 20 * n);
    solver = "pcg";
  }
  const double algebraic = bnorm > 0.0 ? (A * x - b).norm() / bnorm : 0.0;
  if (!(algebraic <= tol)) {
    std::ostringstream os;
    os << solver << " solve reached relative residual " << algebraic << " above tolerance " << tol;
    throw NoConvergence(os.str());
  }

  std::vector<double> values(system.mesh.vertex_count(), 0.0);
  for (int v = 0; v < system.mesh.vertex_count(); ++v) {
    const int k = system.unknown_of_vertex[v];
    if (k >= 0) values[v] = x[k];
  }
  ChiField chi(system.params, system.grid, system.mesh, std::move(values));
  chi.algebraic_residual = algebraic;
  chi.iterations = iterations;
  chi.solver = solver;
  chi.residual_norm = chi.strong_residual();
  return chi;
}

ChiField compute_chi(const ModelParams& params, int n_theta, int n_r, double tol, double truncation_tol) {
  const PolarGrid grid = build_polar_grid(params, n_theta, n_r, truncation_tol);
  return solve_chi(assemble_weak_form(params, grid), tol);
}

ChiField::ChiField(ModelParams params, PolarGrid grid, ChiMesh mesh, std::vector<double> values)
    : params_(std::move(params)), grid_(std::move(grid)), mesh_(mesh), values_(std::move(values)) {
  if (static_cast<int>(values_.size()) != mesh_.vertex_count())
    throw DomainError("chi values do not match the mesh");
}

double ChiField::operator()(double c, double r) const {
  if (!(r >= 0.0)) throw DomainError("chi evaluated at negative r");
  const double th = std::acos(std::clamp(c, -1.0, 1.0));
  const double u = th / mesh_.d_theta();
  const int i = std::clamp(static_cast<int>(u), 0, mesh_.n_theta - 1);
  const double s = u - i;
  const double w = std::min(r, mesh_.r_max) / mesh_.d_r();
  const int j = std::clamp(static_cast<int>(w), 0, mesh_.n_r - 1);
  const double t = w - j;
  return (1 - s) * (1 - t) * at(i, j) + s * (1 - t) * at(i + 1, j) + (1 - s) * t * at(i, j + 1) +
         s * t * at(i + 1, j + 1);
}

PolarGrid ChiField::element_grid(int points_per_cell) const {
  PolarGrid g;
  g.dim = grid_.dim;
  g.r_max = mesh_.r_max;
  g.log_scale = grid_.log_scale;
  g.theta = composite_gauss(mesh_.theta_edges(), points_per_cell);
  g.r = composite_gauss(mesh_.r_edges(), points_per_cell);
  return g;
}

double ChiField::strong_residual() const {
  // Conservative five-point form of
  //   -d_theta(A_theta d_theta chi) - d_r(A_r d_r chi) + m chi = f
  // divided pointwise by r^{d-2} sin^{d-2} e and measured in L2(r^{d-1} sin^{d-2} e).
  // The extra factor r offsets the 1 / r^2 of the angular term at the origin.
  const double dt = mesh_.d_theta(), dr = mesh_.d_r();
  const double ls = grid_.log_scale;
  double num = 0.0, den = 0.0;
  for (int i = 1; i < mesh_.n_theta; ++i)
    for (int j = 1; j < mesh_.n_r; ++j) {
      const double th = mesh_.theta_vertex(i), r = mesh_.r_vertex(j);
      const EnergyWeights c = energy_weights(params_, ls, th, r);
      const double at_p = energy_weights(params_, ls, th + 0.5 * dt, r).a_theta;
      const double at_m = energy_weights(params_, ls, th - 0.5 * dt, r).a_theta;
      const double ar_p = energy_weights(params_, ls, th, r + 0.5 * dr).a_r;
      const double ar_m = energy_weights(params_, ls, th, r - 0.5 * dr).a_r;
      const double x = at(i, j);
      const double R = -(at_p * (at(i + 1, j) - x) - at_m * (x - at(i - 1, j))) / (dt * dt) -
                       (ar_p * (at(i, j + 1) - x) - ar_m * (x - at(i, j - 1))) / (dr * dr) + c.mass * x -
                       c.load;
      if (!(c.measure > 0.0)) continue;
      num += R * R * r * r / c.measure;
      den += c.load * c.load * r * r / c.measure;
    }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

PsiEvaluator::PsiEvaluator(std::shared_ptr<const ChiField> chi, Vector direction, Vector omega)
    : chi_(std::move(chi)), direction_(std::move(direction)), omega_(std::move(omega)) {
  if (!chi_) throw DomainError("psi needs a chi field");
  const int d = chi_->params().dim;
  if (omega_.size() != d || direction_.size() != d) throw DomainError("psi vectors have the wrong dimension");
  if (!(std::abs(omega_.norm() - 1.0) <= 1e-12)) throw DomainError("omega must be a unit vector");
  if (!(std::abs(direction_.norm() - 1.0) <= 1e-12)) throw DomainError("E must be a unit vector");
  if (!(std::abs(direction_.dot(omega_)) <= 1e-12)) throw DomainError("E must be orthogonal to omega");
}

double PsiEvaluator::with_direction(const Vector& v, const Vector& w) const {
  const double a = v.dot(omega_);
  const double p2 = (v - a * omega_).squaredNorm();
  if (p2 < 1e-28) {
    std::ostringstream os;
    os << "psi evaluated on the axis (|P v|^2 = " << p2 << ")";
    throw AxisEvaluation(os.str());
  }
  const double r = std::sqrt(a * a + p2);
  return (*chi_)(a / r, r) * v.dot(w) / std::sqrt(p2);
}

double PsiEvaluator::operator()(const Vector& v) const { return with_direction(v, direction_); }

PsiEvaluator reconstruct_psi(std::shared_ptr<const ChiField> chi, const Vector& direction, const Vector& omega) {
  return PsiEvaluator(std::move(chi), direction, omega);
}

Vector invariant_field(const ChiField& chi, const Frame& frame, const Vector& v) {
  const std::shared_ptr<const ChiField> ref(std::shared_ptr<const ChiField>{}, &chi);
  Vector F = Vector::Zero(frame.dim());
  for (int k = 0; k + 1 < frame.dim(); ++k) {
    const PsiEvaluator psi(ref, frame.transverse(k), frame.axis());
    F += psi(v) * frame.transverse(k);
  }
  return F;
}

double BumpFunction::value(const Vector& v) const {
  const double q = (v - center).squaredNorm() / (radius * radius);
  return q < 1.0 ? std::pow(1.0 - q, kBumpPower) : 0.0;
}

Vector BumpFunction::gradient(const Vector& v) const {
  const Vector x = v - center;
  const double q = x.squaredNorm() / (radius * radius);
  if (q >= 1.0) return Vector::Zero(v.size());
  const double g1 = -kBumpPower * std::pow(1.0 - q, kBumpPower - 1);
  return g1 * 2.0 / (radius * radius) * x;
}

double BumpFunction::laplacian(const Vector& v) const {
  const Vector x = v - center;
  const double rho2 = radius * radius;
  const double q = x.squaredNorm() / rho2;
  if (q >= 1.0) return 0.0;
  const double g1 = -kBumpPower * std::pow(1.0 - q, kBumpPower - 1);
  const double g2 = kBumpPower * (kBumpPower - 1) * std::pow(1.0 - q, kBumpPower - 2);
  return g2 * 4.0 * x.squaredNorm() / (rho2 * rho2) + g1 * 2.0 * static_cast<double>(v.size()) / rho2;
}

double GaussianMixture::value(const Vector& v) const {
  double f = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k)
    f += weights[k] * std::exp(-(v - centers[k]).squaredNorm() / (2 * widths[k] * widths[k]));
  return f;
}

Vector GaussianMixture::gradient(const Vector& v) const {
  Vector g = Vector::Zero(v.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double s2 = widths[k] * widths[k];
    const Vector x = v - centers[k];
    g -= weights[k] * std::exp(-x.squaredNorm() / (2 * s2)) / s2 * x;
  }
  return g;
}

double GaussianMixture::laplacian(const Vector& v) const {
  double l = 0.0;
  const double d = static_cast<double>(v.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double s2 = widths[k] * widths[k];
    const double x2 = (v - centers[k]).squaredNorm();
    l += weights[k] * std::exp(-x2 / (2 * s2)) * (x2 / (s2 * s2) - d / s2);
  }
  return l;
}

double GaussianMixture::mass() const {
  double m = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double d = static_cast<double>(centers[k].size());
    m += weights[k] * std::pow(2 * kPi * widths[k] * widths[k], 0.5 * d);
  }
  return m;
}

Vector GaussianMixture::first_moment() const {
  Vector m = Vector::Zero(centers.front().size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double d = static_cast<double>(centers[k].size());
    m += weights[k] * std::pow(2 * kPi * widths[k] * widths[k], 0.5 * d) * centers[k];
  }
  return m;
}

void GaussianMixture::normalize() {
  const double m = mass();
  for (double& w : weights) w /= m;
}

double integrate_velocity(const ChiField& chi, const Vector& omega, int n_phi,
                          const std::function<double(const Vector&, double, double)>& f) {
  double total = 0.0;
  for_each_velocity(chi.element_grid(), Frame(omega), n_phi,
                    [&](const Vector& v, double c, double r, double w) { total += w * f(v, c, r); });
  return total;
}

Vector w_functional(const std::function<double(const Vector&)>& psi, const ChiField& chi,
                    const EquilibriumTable& table, const Vector& omega, int n_phi) {
  const ModelParams& p = table.params;
  Vector W = Vector::Zero(p.dim);
  for_each_velocity(chi.element_grid(), Frame(omega), n_phi, [&](const Vector& v, double, double, double w) {
    W += (w * psi(v) * equilibrium_density(v, omega, table)) * grad_phi_omega(v, omega, p);
  });
  return W / (p.sigma * table.c1);
}

namespace {

// Quadrature on the ball |v - a| < radius in polar coordinates centred at a:
// Gauss in the radius (and in the polar cosine for d = 3), equispaced in the
// periodic angle.
template <class Fn>
void for_each_velocity_in_ball(int d, const Vector& a, double radius, int n_angle, Fn&& fn) {
  const Rule1D rho = gauss_legendre(kBallRadialPoints, 0.0, radius);
  const double dphi = 2.0 * kPi / n_angle;
  Vector v(d);
  if (d == 2) {
    for (int k = 0; k < n_angle; ++k) {
      const double phi = dphi * (k + 0.5);
      for (std::size_t i = 0; i < rho.size(); ++i) {
        v << a[0] + rho.nodes[i] * std::cos(phi), a[1] + rho.nodes[i] * std::sin(phi);
        fn(v, rho.weights[i] * rho.nodes[i] * dphi);
      }
    }
    return;
  }
  const Rule1D mu = gauss_legendre(n_angle / 2, -1.0, 1.0);
  for (std::size_t m = 0; m < mu.size(); ++m) {
    const double st = std::sqrt(1.0 - mu.nodes[m] * mu.nodes[m]);
    for (int k = 0; k < n_angle; ++k) {
      const double phi = dphi * (k + 0.5);
      for (std::size_t i = 0; i < rho.size(); ++i) {
        const double rr = rho.nodes[i];
        v << a[0] + rr * st * std::cos(phi), a[1] + rr * st * std::sin(phi), a[2] + rr * mu.nodes[m];
        fn(v, rho.weights[i] * rr * rr * mu.weights[m] * dphi);
      }
    }
  }
}

}  // namespace

double weak_form_residual(const std::function<double(const Vector&)>& psi, const Vector& W,
                          const BumpFunction& test, const EquilibriumTable& table, const Vector& omega,
                          int n_angle) {
  const ModelParams& p = table.params;
  double a = 0.0, l = 0.0, scale = 0.0;
  for_each_velocity_in_ball(p.dim, test.center, test.radius, n_angle, [&](const Vector& v, double w) {
    const double M = equilibrium_density(v, omega, table);
    const Vector pv = v - v.dot(omega) * omega;
    const double th = test.value(v);
    a += w * M * psi(v) * (grad_phi_omega(v, omega, p).dot(test.gradient(v)) - p.sigma * test.laplacian(v));
    l += w * M * th * pv.dot(W);
    scale += w * M * std::abs(th) * pv.norm();
  });
  return scale > 0.0 ? (a - l) / scale : 0.0;
}

bool AdjointKernelReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

namespace {

Vector tilted_axis(int d) {
  Vector o(d);
  if (d == 2) o << 0.8, 0.6;
  else o << 0.48, 0.6, 0.64;
  return o;
}

std::shared_ptr<const ChiField> borrow(const ChiField& chi) {
  return std::shared_ptr<const ChiField>(std::shared_ptr<const ChiField>{}, &chi);
}

}  // namespace

AdjointKernelReport verify_adjoint_kernel(const ChiField& chi, const EquilibriumTable& table, int n_test,
                                          std::uint64_t seed, double tolerance, int n_phi) {
  if (n_test < 1) throw DomainError("n_test must be at least 1");
  const ModelParams& p = table.params;
  const int d = p.dim;
  const Vector omega = tilted_axis(d);
  const Frame frame(omega);
  const auto ref = borrow(chi);
  const int n_phi_w = d == 2 ? 1 : 8;

  AdjointKernelReport rep;
  for (int k = 0; k + 1 < d; ++k) {
    const PsiEvaluator psi(ref, frame.transverse(k), omega);
    const Vector W = w_functional(psi, chi, table, omega, n_phi_w);
    rep.w_recovery_error = std::max(rep.w_recovery_error, (W - frame.transverse(k)).norm());
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double width = std::sqrt(p.sigma);
  std::vector<BumpFunction> tests;
  for (int k = 0; k < n_test; ++k) {
    BumpFunction b;
    b.center = table.c1 * omega;
    for (int m = 0; m < d; ++m) b.center[m] += 0.8 * width * normal(rng);
    b.radius = (0.5 + 0.5 * unif(rng)) * std::max(width, 0.3);
    tests.push_back(b);
  }

  for (int k = 0; k < n_test; ++k) {
    const Vector E = frame.transverse(k % (d - 1));
    const PsiEvaluator psi(ref, E, omega);
    const double res = weak_form_residual(psi, E, tests[k], table, omega, n_phi);
    rep.weak_residual_max = std::max(rep.weak_residual_max, std::abs(res));
  }

  // psi = 1: a(1, theta) = 0 and W[1] = 0
  const auto one = [](const Vector&) { return 1.0; };
  const Vector W1 = w_functional(one, chi, table, omega, n_phi_w);
  rep.constant_residual = W1.norm();
  const int n_controls = std::min(n_test, 5);
  for (int k = 0; k < n_controls; ++k)
    rep.constant_residual = std::max(
        rep.constant_residual, std::abs(weak_form_residual(one, W1, tests[k], table, omega, n_phi)));

  // momentum components without the chi profile
  for (int m = 0; m < d; ++m) {
    const Vector e = frame.basis().col(m);
    const auto lin = [e](const Vector& v) { return v.dot(e); };
    const Vector W = w_functional(lin, chi, table, omega, n_phi_w);
    for (int k = 0; k < n_controls; ++k)
      rep.momentum_residual = std::max(
          rep.momentum_residual, std::abs(weak_form_residual(lin, W, tests[k], table, omega, n_phi)));
  }

  rep.checks.push_back({"W[psi_E] recovers E", rep.w_recovery_error, tolerance,
                        rep.w_recovery_error < tolerance});
  rep.checks.push_back({"weak-form residual", rep.weak_residual_max, tolerance,
                        rep.weak_residual_max < tolerance});
  rep.checks.push_back({"psi = 1 is an invariant", rep.constant_residual, tolerance,
                        rep.constant_residual < tolerance});
  rep.checks.push_back({"psi = v is not an invariant", rep.momentum_residual, 10 * tolerance,
                        rep.momentum_residual > 10 * tolerance});
  return rep;
}

double gci_residual(const PsiEvaluator& psi, const GaussianMixture& f, const ChiField& chi,
                    const EquilibriumTable& table, int n_phi) {
  const ModelParams& p = table.params;
  const int d = p.dim;
  const Orientation o = orientation_of(f.first_moment());
  if (o.zero) throw ZeroOrientation("mixture has zero first moment");
  const Vector& om = o.direction;
  double total = 0.0;
  for_each_velocity(chi.element_grid(), Frame(psi.omega()), n_phi,
                    [&](const Vector& v, double, double r, double w) {
                      const double lap_phi =
                          d + p.scaled_potential_second_derivative(r) +
                          (d - 1) * p.scaled_potential_derivative(r) / r;
                      const double q = p.sigma * f.laplacian(v) + f.gradient(v).dot(grad_phi_omega(v, om, p)) +
                                       f.value(v) * lap_phi;
                      if (q == 0.0) return;
                      total += w * q * psi(v);
                    });
  return total;
}

namespace {

double support_radius(const ModelParams& p, double r_max) {
  return std::min(r_max, 3.0 + 4.0 * std::sqrt(p.sigma));
}

}  // namespace

GaussianMixture axial_mixture(const Vector& omega, const ModelParams& params, std::uint64_t seed) {
  const int d = params.dim;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Frame frame(omega);
  const double R = support_radius(params, truncation_radius(params));
  GaussianMixture f;
  const int pairs = 1 + static_cast<int>(3 * unif(rng));
  for (int k = 0; k < pairs; ++k) {
    Vector t = Vector::Zero(d);
    for (int m = 1; m < d; ++m) t += normal(rng) * frame.basis().col(m);
    t.normalize();
    const double a = 0.2 + 1.0 * unif(rng);
    const double b = 0.8 * unif(rng);
    const Vector u1 = a * omega + b * t, u2 = a * omega - b * t;
    const double s = std::min(0.3 + 0.4 * unif(rng), (R - u1.norm()) / 8.0);
    const double w = 0.5 + unif(rng);
    f.weights.insert(f.weights.end(), {w, w});
    f.centers.insert(f.centers.end(), {u1, u2});
    f.widths.insert(f.widths.end(), {s, s});
  }
  f.normalize();
  const Vector m = f.first_moment();
  const Vector pm = m - m.dot(omega) * omega;
  if (pm.norm() > 1e-12 || !(m.dot(omega) > 0.0)) {
    std::ostringstream os;
    os << "mixture transverse moment " << pm.norm() << " exceeds 1e-12";
    throw MomentConstraintViolated(os.str());
  }
  return f;
}

GaussianMixture transverse_mixture(const Vector& omega, const Vector& direction, const ModelParams& params,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double R = support_radius(params, truncation_radius(params));
  GaussianMixture f;
  const int n = 1 + static_cast<int>(2 * unif(rng));
  for (int k = 0; k < n; ++k) {
    const double a = 0.1 + 0.2 * unif(rng);
    const double b = 0.2 + 0.2 * unif(rng);
    const Vector u = a * omega + b * direction;
    f.weights.push_back(0.5 + unif(rng));
    f.centers.push_back(u);
    f.widths.push_back(std::min(0.3 + 0.3 * unif(rng), (R - u.norm()) / 8.0));
  }
  f.normalize();
  return f;
}

double GciReport::positive_max() const {
  double m = 0.0;
  for (double x : positive) m = std::max(m, std::abs(x));
  return m;
}

double GciReport::negative_min() const {
  if (negative.empty()) return 0.0;
  double m = std::abs(negative.front());
  for (double x : negative) m = std::min(m, std::abs(x));
  return m;
}

bool GciReport::passed() const {
  return positive_max() < positive_tolerance && (negative.empty() || negative_min() > negative_threshold);
}

GciReport verify_gci_equivalence(const ChiField& chi, const EquilibriumTable& table, int n_densities,
                                 int n_negative, std::uint64_t seed, int n_phi) {
  if (n_densities < 1) throw DomainError("n_densities must be at least 1");
  const ModelParams& p = table.params;
  const int d = p.dim;
  const Vector omega = tilted_axis(d);
  const Frame frame(omega);
  const auto ref = borrow(chi);
  const int nphi = d == 2 ? 1 : n_phi;
  GciReport rep;
  for (int k = 0; k < n_densities; ++k) {
    const GaussianMixture f = axial_mixture(omega, p, seed + k);
    const PsiEvaluator psi(ref, frame.transverse(k % (d - 1)), omega);
    rep.positive.push_back(gci_residual(psi, f, chi, table, nphi));
  }
  for (int k = 0; k < n_negative; ++k) {
    const Vector E = frame.transverse(k % (d - 1));
    const GaussianMixture f = transverse_mixture(omega, E, p, seed + 1000 + k);
    const PsiEvaluator psi(ref, E, omega);
    rep.negative.push_back(gci_residual(psi, f, chi, table, nphi));
  }
  return rep;
}

}  // namespace flockhydro
