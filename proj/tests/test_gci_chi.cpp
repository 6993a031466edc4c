#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>
#include <numbers>

#include "flockhydro/gci_chi.hpp"

using namespace flockhydro;

namespace {

ModelParams model(double sigma, int d, bool confined) {
  ModelParams p;
  p.sigma = sigma;
  p.dim = d;
  if (confined) p.potential = SelfPropulsion{1.0, 1.0};
  return p;
}

// Rotation by angle a about the unit axis u (Rodrigues).
Matrix rotation(const Vector& u, double a) {
  Matrix k(3, 3);
  k << 0, -u[2], u[1], u[2], 0, -u[0], -u[1], u[0], 0;
  return Matrix::Identity(3, 3) + std::sin(a) * k + (1 - std::cos(a)) * k * k;
}

}  // namespace

TEST_CASE("V = 0: chi is r sin(theta)") {
  for (int d : {2, 3}) {
    const ChiField chi = compute_chi(model(1.0, d, false), 96, 96);
    double err = 0.0;
    const ChiMesh& m = chi.mesh();
    for (int i = 0; i <= m.n_theta; ++i)
      for (int j = 0; j <= m.n_r; ++j) {
        const double r = m.r_vertex(j);
        if (r > 4.0) continue;  // beyond this the weight is below 1e-3 of its peak
        err = std::max(err, std::abs(chi.at(i, j) - r * std::sin(m.theta_vertex(i))));
      }
    CHECK(err < 1e-3);
    CHECK(chi.algebraic_residual <= 1e-10);
  }
}

TEST_CASE("Dirichlet rows and assembly structure") {
  const ModelParams p = model(0.5, 3, true);
  const PolarGrid grid = build_polar_grid(p, 16, 24);
  const WeakFormSystem sys = assemble_weak_form(p, grid);
  const int nt = sys.mesh.n_theta, nr = sys.mesh.n_r;
  CHECK(sys.unknowns() == (nt - 1) * nr);
  CHECK((SparseMatrix(sys.matrix.transpose()) - sys.matrix).norm() < 1e-12 * sys.matrix.norm());
  CHECK((sys.theta_part + sys.r_part + sys.zeroth_order_part - sys.matrix).norm() < 1e-12 * sys.matrix.norm());
  const ChiField chi = solve_chi(sys);
  for (int j = 0; j <= nr; ++j) {
    CHECK(chi.at(0, j) == 0.0);
    CHECK(chi.at(nt, j) == 0.0);
  }
  for (int i = 0; i <= nt; ++i) CHECK(chi.at(i, 0) == 0.0);
  // d = 2 has no zeroth-order term
  const ModelParams q = model(0.5, 2, true);
  CHECK(assemble_weak_form(q, build_polar_grid(q, 8, 8)).zeroth_order_part.norm() == 0.0);
  CHECK_THROWS_AS(solve_chi(sys, 1e-3), DomainError);
}

TEST_CASE("chi is positive in the interior for V_{1,1}") {
  const ChiField chi = compute_chi(model(1.0, 2, true), 48, 48);
  const ChiMesh& m = chi.mesh();
  for (int i = 1; i < m.n_theta; ++i)
    for (int j = 1; j <= m.n_r / 2; ++j) CHECK(chi.at(i, j) > 0.0);
}

TEST_CASE("strong residual decreases at second order") {
  const ModelParams p = model(1.0, 2, true);
  const double r64 = compute_chi(p, 64, 64).residual_norm;
  const double r128 = compute_chi(p, 128, 128).residual_norm;
  CHECK(std::log2(r64 / r128) > 1.8);
}

TEST_CASE("conjugate gradient") {
  const int n = 50;
  SparseMatrix a(n, n);
  std::vector<Eigen::Triplet<double>> t;
  for (int k = 0; k < n; ++k) {
    t.emplace_back(k, k, 2.0 + k);
    if (k > 0) t.emplace_back(k, k - 1, -1.0), t.emplace_back(k - 1, k, -1.0);
  }
  a.setFromTriplets(t.begin(), t.end());
  const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  const int it = conjugate_gradient(a, b, x, 1e-12, 500);
  CHECK(it > 0);
  CHECK((a * x - b).norm() <= 1e-12 * b.norm() * 1.0001);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  CHECK_THROWS_AS(conjugate_gradient(a, b, y, 1e-14, 2), NoConvergence);
}

TEST_CASE("psi reconstruction: axis, validation, linearity, symmetry") {
  const ModelParams p = model(1.0, 3, true);
  auto chi = std::make_shared<const ChiField>(compute_chi(p, 64, 64));
  Vector om(3), e1(3), e2(3);
  om << 0.0, 0.0, 1.0;
  e1 << 1.0, 0.0, 0.0;
  e2 << 0.0, 1.0, 0.0;
  const PsiEvaluator psi = reconstruct_psi(chi, e1, om);
  CHECK_THROWS_AS(psi(Vector(0.5 * om)), AxisEvaluation);
  CHECK_THROWS_AS(reconstruct_psi(chi, om, om), DomainError);
  CHECK_THROWS_AS(reconstruct_psi(chi, Vector(2 * e1), om), DomainError);

  Vector v(3);
  v << 0.3, -0.7, 0.9;
  const double a = psi.with_direction(v, e1), b = psi.with_direction(v, e2);
  const Vector w = (0.6 * e1 + 0.8 * e2);
  CHECK(psi.with_direction(v, w) == doctest::Approx(0.6 * a + 0.8 * b).epsilon(1e-14));
  // F(v) = sum psi_{E_i}(v) E_i is equivariant under rotations fixing Omega
  const Frame f(om);
  for (double ang : {0.3, 1.7, 4.0}) {
    const Matrix r = rotation(om, ang);
    const Vector lhs = invariant_field(*chi, f, r * v);
    const Vector rhs = r * invariant_field(*chi, f, v);
    CHECK((lhs - rhs).norm() < 1e-12);
  }
}

TEST_CASE("bump derivatives agree with finite differences") {
  BumpFunction b{Vector::Zero(2), 0.8};
  b.center << 0.4, -0.2;
  Vector v(2);
  v << 0.7, 0.1;
  const double h = 1e-4;
  double lap = 0.0;
  for (int k = 0; k < 2; ++k) {
    const Vector e = Vector::Unit(2, k) * h;
    CHECK(b.gradient(v)[k] == doctest::Approx((b.value(v + e) - b.value(v - e)) / (2 * h)).epsilon(1e-7));
    lap += (b.value(v + e) - 2 * b.value(v) + b.value(v - e)) / (h * h);
  }
  CHECK(b.laplacian(v) == doctest::Approx(lap).epsilon(1e-5));
  Vector out(2);
  out << 2.0, 2.0;
  CHECK(b.value(out) == 0.0);
}

TEST_CASE("Gaussian mixture moments") {
  GaussianMixture g;
  g.weights = {1.0, 0.5};
  Vector a(2), b(2);
  a << 1.0, 0.2;
  b << 0.5, -0.4;
  g.centers = {a, b};
  g.widths = {0.3, 0.5};
  g.normalize();
  CHECK(g.mass() == doctest::Approx(1.0));
  // brute-force midpoint sums on a box
  const int n = 600;
  const double lo = -5.0, h = 10.0 / n;
  double m = 0.0;
  Vector mom = Vector::Zero(2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Vector v(2);
      v << lo + (i + 0.5) * h, lo + (j + 0.5) * h;
      m += g.value(v) * h * h;
      mom += v * g.value(v) * h * h;
    }
  CHECK(m == doctest::Approx(1.0).epsilon(1e-10));
  CHECK((mom - g.first_moment()).norm() < 1e-10);
}

TEST_CASE("mixture generators respect the moment constraint") {
  const ModelParams p = model(1.0, 3, true);
  Vector om(3), e(3);
  om << 0.48, 0.6, 0.64;
  e << 0.8, -0.6, 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const GaussianMixture f = axial_mixture(om, p, seed);
    const Vector m = f.first_moment();
    CHECK((m - m.dot(om) * om).norm() < 1e-12);
    CHECK(m.dot(om) > 0.0);
    const GaussianMixture g = transverse_mixture(om, e, p, seed);
    CHECK(std::abs(g.first_moment().dot(e)) > 1e-3);
  }
}

TEST_CASE("adjoint kernel and GCI equivalence at moderate resolution") {
  const ModelParams p = model(1.0, 2, true);
  const ChiField chi = compute_chi(p, 128, 128);
  const EquilibriumTable table = make_equilibrium_table(p, build_polar_grid(p, 64, 128));
  const AdjointKernelReport rep = verify_adjoint_kernel(chi, table, 6);
  CHECK(rep.passed());
  CHECK(rep.w_recovery_error < 5e-4);
  CHECK(rep.momentum_residual > 5e-3);
  const GciReport gci = verify_gci_equivalence(chi, table, 3, 2);
  CHECK(gci.positive_max() < 1e-4);
  CHECK(gci.negative_min() > 1e-3);
}
