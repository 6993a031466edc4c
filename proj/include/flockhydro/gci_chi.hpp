#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "flockhydro/equilibrium.hpp"
#include "flockhydro/quadrature.hpp"

namespace flockhydro {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Uniform tensor mesh on [0, pi] x [0, r_max] carrying bilinear elements.
struct ChiMesh {
  int n_theta = 0;  // cells in theta
  int n_r = 0;      // cells in r
  double r_max = 0.0;

  double d_theta() const;
  double d_r() const { return r_max / n_r; }
  double theta_vertex(int i) const { return i * d_theta(); }
  double r_vertex(int j) const { return j * d_r(); }
  int vertex_count() const { return (n_theta + 1) * (n_r + 1); }
  int vertex(int i, int j) const { return i * (n_r + 1) + j; }
  std::vector<double> theta_edges() const;
  std::vector<double> r_edges() const;
};

/// Which mesh edges carry homogeneous Dirichlet values for chi.
struct BoundaryPolicy {
  bool dirichlet_axis = true;    // theta = 0 and theta = pi
  bool dirichlet_origin = true;  // r = 0
  // r = r_max is always natural.
  std::string describe() const;
};

/// Discretized energy J(h): sigma/2 * a(h, h) - l(h) over free unknowns.
///
/// In (theta, r) the quadratic part is
///   sigma * int [ (h_theta)^2 / r^2 + (h_r)^2 + (d-2) h^2 / (r^2 sin^2) ] r^{d-1} e sin^{d-2}
/// and the load is int h r^d e sin^{d-1}. Weights carry e / exp(grid.log_scale).
struct WeakFormSystem {
  ModelParams params;
  PolarGrid grid;
  ChiMesh mesh;
  BoundaryPolicy boundary_policy;
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
  /// Contributions of the three energy terms (sum = matrix).
  SparseMatrix theta_part, r_part, zeroth_order_part;
  /// vertex index -> unknown index, -1 for Dirichlet vertices.
  std::vector<int> unknown_of_vertex;

  int unknowns() const { return static_cast<int>(rhs.size()); }
};

/// Bilinear finite elements on the mesh with n_theta x n_r cells taken from
/// the grid resolution and the grid's r_max.
WeakFormSystem assemble_weak_form(const ModelParams& params, const PolarGrid& grid,
                                  const BoundaryPolicy& policy = {});

/// Discrete solution chi(theta, r) at the mesh vertices.
class ChiField {
public:
  ChiField() = default;
  ChiField(ModelParams params, PolarGrid grid, ChiMesh mesh, std::vector<double> values);

  const ModelParams& params() const { return params_; }
  const PolarGrid& grid() const { return grid_; }
  const ChiMesh& mesh() const { return mesh_; }
  const std::vector<double>& values() const { return values_; }
  double at(int i, int j) const { return values_[mesh_.vertex(i, j)]; }

  /// Bilinear interpolation in (theta, r) with theta = acos(c); constant in r
  /// beyond r_max.
  double operator()(double c, double r) const;

  /// Composite Gauss rule (points_per_cell^2 nodes per element) matching the
  /// mesh, for integrals of chi against the equilibrium weight.
  PolarGrid element_grid(int points_per_cell = 3) const;

  /// Strong-form residual at interior vertices (conservative five-point
  /// differences), divided by r^{d-2} sin^{d-2} e and measured in
  /// L2(r^{d-1} sin^{d-2} e dtheta dr), relative to the same norm of the source.
  double strong_residual() const;

  double residual_norm = 0.0;   // strong-form residual, see strong_residual()
  double algebraic_residual = 0.0;  // ||A x - b|| / ||b||
  int iterations = 0;           // 0 for the direct path
  std::string solver;

private:
  ModelParams params_;
  PolarGrid grid_;
  ChiMesh mesh_;
  std::vector<double> values_;
};

/// Solves the assembled system: sparse LDL^T below 1e5 unknowns, Jacobi
/// preconditioned CG above. Throws NoConvergence if CG stalls.
ChiField solve_chi(const WeakFormSystem& system, double tol = 1e-10);

/// Convenience: grid, assembly and solve in one call.
ChiField compute_chi(const ModelParams& params, int n_theta, int n_r, double tol = 1e-10,
                     double truncation_tol = 1e-18);

/// Jacobi-preconditioned conjugate gradient. Returns iterations used; throws
/// NoConvergence when max_iterations is reached before ||r|| <= tol ||b||.
int conjugate_gradient(const SparseMatrix& A, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                       double tol, int max_iterations);

/// psi_W(v) = chi(v.Omega/|v|, |v|) (v.W) / |P v|, the collision invariant
/// associated with a transverse direction W.
class PsiEvaluator {
public:
  PsiEvaluator(std::shared_ptr<const ChiField> chi, Vector direction, Vector omega);

  double operator()(const Vector& v) const;
  /// Same profile with another transverse direction (linear in W).
  double with_direction(const Vector& v, const Vector& w) const;

  const Vector& direction() const { return direction_; }
  const Vector& omega() const { return omega_; }

private:
  std::shared_ptr<const ChiField> chi_;
  Vector direction_;
  Vector omega_;
};

PsiEvaluator reconstruct_psi(std::shared_ptr<const ChiField> chi, const Vector& direction,
                             const Vector& omega);

/// F(v) = sum_i psi_{E_i}(v) E_i for the transverse columns of `frame`.
Vector invariant_field(const ChiField& chi, const Frame& frame, const Vector& v);

/// Compactly supported bump (1 - |v - a|^2 / rho^2)^6, five times continuously
/// differentiable. Polynomial inside the ball, so Gauss rules integrate it well.
struct BumpFunction {
  static constexpr int kBumpPower = 6;

  Vector center;
  double radius = 1.0;

  double value(const Vector& v) const;
  Vector gradient(const Vector& v) const;
  double laplacian(const Vector& v) const;
};

/// Sum of isotropic Gaussians w_k exp(-|v - u_k|^2 / (2 s_k^2)).
struct GaussianMixture {
  std::vector<double> weights;
  std::vector<Vector> centers;
  std::vector<double> widths;

  double value(const Vector& v) const;
  Vector gradient(const Vector& v) const;
  double laplacian(const Vector& v) const;
  double mass() const;
  Vector first_moment() const;
  /// Rescale weights to unit mass.
  void normalize();
};

/// Generic integrand over velocity space, evaluated on the element grid of
/// `chi` rotated to `omega`.
double integrate_velocity(const ChiField& chi, const Vector& omega, int n_phi,
                          const std::function<double(const Vector&, double, double)>& f);

struct CheckResult {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct AdjointKernelReport {
  std::vector<CheckResult> checks;
  double w_recovery_error = 0.0;  // max_i ||W[psi_{E_i}] - E_i||
  double weak_residual_max = 0.0;  // max_k relative |a(psi, theta_k) - l(theta_k)|
  double constant_residual = 0.0;  // psi = 1
  double momentum_residual = 0.0;  // psi = v.Omega or v.E without the chi profile
  bool passed() const;
};

/// W[psi] = int M grad psi / c1, computed as int psi M grad Phi / (sigma c1).
Vector w_functional(const std::function<double(const Vector&)>& psi, const ChiField& chi,
                    const EquilibriumTable& table, const Vector& omega, int n_phi = 8);

/// Kernel form of the adjoint equation tested against a bump:
///   a(psi, theta) - W . int P v theta M,  a(psi, theta) = sigma int M grad psi . grad theta,
/// divided by int |theta| |P v| M. With W = E this is a(psi_E, theta) - l(theta).
/// Derivatives are moved onto theta by parts. Integrated on the bump's ball
/// with n_angle points per angular direction.
double weak_form_residual(const std::function<double(const Vector&)>& psi, const Vector& w,
                          const BumpFunction& test, const EquilibriumTable& table, const Vector& omega,
                          int n_angle);

AdjointKernelReport verify_adjoint_kernel(const ChiField& chi, const EquilibriumTable& table, int n_test,
                                          std::uint64_t seed = 1, double tolerance = 5e-4,
                                          int n_phi = 64);

/// int Q(f) psi dv = int psi (sigma Lap f + grad f . grad Phi + f Lap Phi) dv with
/// Phi built on Omega[f].
double gci_residual(const PsiEvaluator& psi, const GaussianMixture& f, const ChiField& chi,
                    const EquilibriumTable& table, int n_phi);

struct GciReport {
  std::vector<double> positive;  // axial mixtures, should vanish
  std::vector<double> negative;  // transverse-moment controls, should not
  double positive_tolerance = 1e-4;
  double negative_threshold = 1e-3;
  double positive_max() const;
  double negative_min() const;
  bool passed() const;
};

/// Random unit-mass mixture whose first moment lies on R_+ Omega; throws
/// MomentConstraintViolated if the transverse moment exceeds 1e-12.
GaussianMixture axial_mixture(const Vector& omega, const ModelParams& params, std::uint64_t seed);
/// Mixture with a deliberate transverse first moment.
GaussianMixture transverse_mixture(const Vector& omega, const Vector& direction, const ModelParams& params,
                                   std::uint64_t seed);

GciReport verify_gci_equivalence(const ChiField& chi, const EquilibriumTable& table, int n_densities,
                                 int n_negative = 5, std::uint64_t seed = 7, int n_phi = 32);

}  // namespace flockhydro
