#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include <omp.h>

#include "flockhydro/kinetic.hpp"

using namespace flockhydro;

namespace {

ModelParams model(double sigma, int d, bool confined) {
  ModelParams p;
  p.sigma = sigma;
  p.dim = d;
  if (confined) p.potential = SelfPropulsion{1.0, 1.0};
  return p;
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
  const auto a = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  CHECK(a == Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  const auto b = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  CHECK(b == Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  const auto c = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  CHECK(c == Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("noise-free particle relaxes to a frozen orientation at rate 1/eps") {
  Matrix v(2, 1);
  v << 3.0, -2.0;
  const double eps = 0.1;
  ParticleEnsemble e = make_homogeneous(model(1.0, 2, false), eps, v, 1);
  e.noise = false;
  e.frozen_omega = Vector::Unit(2, 0);
  const double d0 = (v.col(0) - Vector::Unit(2, 0)).norm();
  for (int k = 0; k < 500; ++k) kinetic_step(e, 0.001);
  CHECK((e.velocities.col(0) - Vector::Unit(2, 0)).norm() < std::exp(-5.0) * d0);
  CHECK((e.velocities.col(0) - Vector::Unit(2, 0)).norm() > 0.9 * std::exp(-5.0) * d0);
}

TEST_CASE("stiffness guard and input validation") {
  ParticleEnsemble e = make_homogeneous(model(1.0, 2, false), 0.1, Matrix::Ones(2, 3), 1);
  CHECK_THROWS_AS(kinetic_step(e, 0.02), StiffStep);
  CHECK_NOTHROW(kinetic_step(e, 0.01));
  CHECK_THROWS_AS(make_homogeneous(model(1.0, 2, false), 0.1, Matrix(2, 0), 1), DomainError);
  CHECK_THROWS_AS(make_homogeneous(model(1.0, 2, false), 0.0, Matrix::Ones(2, 3), 1), DomainError);
  Vector bad(2);
  bad << 1.0, 1.0;
  CHECK_THROWS_AS(sample_equilibrium(model(1.0, 2, false), bad, 10, 1), DomainError);
}

TEST_CASE("same seed gives bitwise-identical ensembles regardless of thread count") {
  const ModelParams p = model(0.5, 3, true);
  auto trajectory = [&](int threads) {
    omp_set_num_threads(threads);
    ParticleEnsemble e = make_inhomogeneous(
        p, 0.1, 5000, 1.0, 8, [](double x) { return 1.0 + 0.5 * std::sin(2 * std::numbers::pi * x); },
        [](double) { return Vector(Vector::Unit(3, 0)); }, 42);
    for (int k = 0; k < 100; ++k) kinetic_step(e, 0.005);
    return e;
  };
  const ParticleEnsemble a = trajectory(1), b = trajectory(1), c = trajectory(3);
  CHECK(a.size() == 5000);
  CHECK(a.velocities == b.velocities);
  CHECK(a.positions == b.positions);
  CHECK(a.velocities == c.velocities);
  CHECK(a.positions == c.positions);
  omp_set_num_threads(omp_get_num_procs());
}

TEST_CASE("empirical moments") {
  const ModelParams p = model(1.0, 2, false);
  ParticleEnsemble e = make_homogeneous(p, 0.1, Matrix::Ones(2, 10), 1);
  e.positions.assign(10, 0.1);
  e.box_length = 1.0;
  e.n_cells = 4;
  const MomentField f = empirical_moments(e, 4, 2.0);
  CHECK(f.rho_hat[0] * 0.25 == doctest::Approx(2.0));
  CHECK(f.rho_hat[1] == 0.0);
  CHECK(f.empty[2]);
  CHECK(!f.empty[0]);
  CHECK(f.omega_hat(0, 0) == doctest::Approx(std::sqrt(0.5)));
  CHECK(f.samples_per_bin[0] == 10);
  CHECK_THROWS_AS(empirical_moments(e, 0), DomainError);

  // a uniform density of 1e6 particles is flat within binomial fluctuations
  const int n = 1000000, bins = 50;
  const ParticleEnsemble u = make_inhomogeneous(
      p, 0.1, n, 3.0, bins, [](double) { return 1.0; }, [](double) { return Vector(Vector::Unit(2, 1)); }, 9);
  const MomentField g = empirical_moments(u, bins, 3.0);
  for (int b = 0; b < bins; ++b) CHECK(std::abs(g.rho_hat[b] - 1.0) < 4.0 / std::sqrt(double(n) / bins));
}

TEST_CASE("empty alignment cells keep their previous orientation") {
  const ModelParams p = model(1.0, 2, false);
  ParticleEnsemble e = make_homogeneous(p, 0.1, Matrix::Ones(2, 20), 3);
  e.positions.assign(20, 0.05);
  e.box_length = 1.0;
  e.n_cells = 4;
  e.cell_omega = Matrix::Zero(2, 4);
  for (int c = 0; c < 4; ++c) e.cell_omega(1, c) = 1.0;
  kinetic_step(e, 0.001);
  CHECK(e.zero_moment_warnings == 3);
  CHECK(e.cell_omega(1, 2) == 1.0);
  CHECK(e.cell_omega(0, 0) == doctest::Approx(std::sqrt(0.5)));
  CHECK(e.size() == 20);
}

TEST_CASE("Gaussian case: stationary mean and covariance") {
  const ModelParams p = model(1.0, 2, false);
  const int n = 100000;
  Vector om(2);
  om << 0.6, 0.8;
  ParticleEnsemble e = make_homogeneous(p, 0.05, sample_equilibrium(p, om, n, 5), 5);
  for (int k = 0; k < 300; ++k) kinetic_step(e, 0.0005);
  const Vector mean = e.velocities.rowwise().mean();
  const Vector dir = e.cell_omega.col(0);
  CHECK((mean - dir).norm() < 3.0 / std::sqrt(double(n)));
  const Matrix centered = e.velocities.colwise() - mean;
  const Matrix cov = centered * centered.transpose() / n;
  CHECK((cov - p.sigma * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 5 * std::sqrt(2.0 / n));
}

TEST_CASE("KS statistic") {
  CHECK(ks_statistic({0.5}, [](double x) { return x; }) == doctest::Approx(0.5));
  CHECK(ks_statistic({0.25, 0.75}, [](double x) { return x; }) == doctest::Approx(0.25));
  CHECK_THROWS_AS(ks_statistic({}, [](double x) { return x; }), DomainError);
}

TEST_CASE("rejection sampler matches the quadrature marginals") {
  const ModelParams p = model(0.5, 3, true);
  const MarginalCdfs cdf = equilibrium_marginals(p);
  CHECK(cdf.speed(0.0) == 0.0);
  CHECK(cdf.speed(100.0) == 1.0);
  const Matrix v = sample_equilibrium(p, Vector::Unit(3, 0), 100000, 17);
  std::vector<double> s(v.cols()), a(v.cols());
  for (int k = 0; k < v.cols(); ++k) {
    s[k] = v.col(k).norm();
    a[k] = std::acos(v(0, k) / s[k]);
  }
  CHECK(ks_statistic(s, [&](double r) { return cdf.speed(r); }) < 0.01);
  CHECK(ks_statistic(a, [&](double t) { return cdf.angle(t); }) < 0.01);
}

TEST_CASE("equilibrium start stays stationary at every checkpoint") {
  RelaxationOptions opt;
  opt.start_at_equilibrium = true;
  opt.n_checkpoints = 4;
  opt.dt_over_epsilon = 0.02;
  const RelaxationReport r = relaxation_test(model(0.5, 2, true), 1.0, 100000, 10.0, 21, opt);
  CHECK(r.checkpoints.size() == 3);
  for (const auto& c : r.checkpoints) {
    CHECK(c[1] < 0.01);
    CHECK(c[2] < 0.01);
  }
  CHECK(r.ks_speed < 0.01);
  CHECK(r.ks_angle < 0.01);
  CHECK(r.mean_velocity_norm == doctest::Approx(r.c1).epsilon(0.02));
  CHECK_THROWS_AS(relaxation_test(model(0.5, 2, true), 1.0, 10, 5.0, 1), DomainError);
}

TEST_CASE("halving the time step moves the statistics less than the noise floor") {
  const ModelParams p = model(0.5, 2, true);
  RelaxationOptions a, b;
  a.dt_over_epsilon = 0.04;
  b.dt_over_epsilon = 0.02;
  const RelaxationReport ra = relaxation_test(p, 1.0, 20000, 10.0, 4, a);
  const RelaxationReport rb = relaxation_test(p, 1.0, 20000, 10.0, 4, b);
  const double floor = 1.36 * std::sqrt(2.0 / 20000.0);
  CHECK(std::abs(ra.ks_speed - rb.ks_speed) < floor);
  CHECK(std::abs(ra.ks_angle - rb.ks_angle) < floor);
}

TEST_CASE("hydro comparison degenerate cases") {
  const ModelParams p = model(0.5, 2, false);
  Coefficients c;
  c.c1 = 1.0;
  c.c2 = 1.0;
  c.params = p;
  HydroComparisonSetup s;
  s.box_length = 1.0;
  s.n_bins = 16;
  s.soh_refinement = 4;
  s.bootstrap = 5;
  s.rho0 = [](double x) { return 1.0 + 0.5 * std::sin(2 * std::numbers::pi * x); };
  s.omega0 = [](double) { return Vector(Vector::Unit(2, 0)); };
  s.t_end = 0.0;
  const auto rows = hydro_comparison(p, c, {0.2, 0.1}, 100000, s, 3);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].err_rho == rows[1].err_rho);
  CHECK(rows[0].err_rho < 0.02);
  CHECK(!errors_decrease(rows));

  s.rho0 = [](double) { return 1.0; };
  s.t_end = 0.2;
  for (const auto& r : hydro_comparison(p, c, {0.2, 0.1}, 100000, s, 3)) {
    CHECK(r.err_rho < 0.02);
    CHECK(r.err_omega < 0.02);
  }
}

TEST_CASE("errors_decrease needs a gap beyond the combined bands") {
  std::vector<ComparisonRow> rows{{0.05, 0.10, 0.01, 0.2, 0.01}, {0.2, 0.30, 0.01, 0.4, 0.01}};
  CHECK(errors_decrease(rows));
  rows[0].err_rho = 0.29;
  CHECK(!errors_decrease(rows));
}
