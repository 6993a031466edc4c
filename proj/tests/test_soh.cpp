#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "flockhydro/soh.hpp"

using namespace flockhydro;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Coefficients coeffs(double c1, double c2, double sigma, int d = 2) {
  Coefficients c;
  c.c1 = c1;
  c.c2 = c2;
  c.params.sigma = sigma;
  c.params.dim = d;
  return c;
}

Vector angle(double phi, int d = 2) {
  Vector w = Vector::Zero(d);
  w[0] = std::cos(phi);
  w[1] = std::sin(phi);
  return w;
}

// rho advected by c1 e1 with Omega = e1 fixed: exact solution rho0(x - c1 t).
double advection_error(int n) {
  const Coefficients c = coeffs(0.7, 0.5, 0.5);
  auto rho0 = [](double x) { return 1.0 + 0.3 * std::sin(kTwoPi * x); };
  const HydroState s = init_state(
      SpatialMesh::line(n, 1.0), [&](const Vector& x) { return rho0(x[0]); },
      [](const Vector&) { return angle(0.0); }, c);
  SolverConfig cfg;
  cfg.t_end = 0.5;
  const HydroState e = run(s, cfg).back();
  double err = 0.0;
  for (int k = 0; k < n; ++k) {
    // exact cell average
    const double a = k * 1.0 / n - c.c1 * 0.5, b = a + 1.0 / n;
    const double avg = 1.0 - 0.3 * (std::cos(kTwoPi * b) - std::cos(kTwoPi * a)) / (kTwoPi / n);
    err += std::abs(e.rho[k] - avg) / n;
  }
  return err;
}

}  // namespace

TEST_CASE("mesh constructors and indexing") {
  CHECK_THROWS_AS(SpatialMesh::line(2, 1.0), DomainError);
  CHECK_THROWS_AS(SpatialMesh::square(4, 2, 1.0, 1.0), DomainError);
  const SpatialMesh m = SpatialMesh::square(4, 5, 2.0, 1.0);
  CHECK(m.cells() == 20);
  CHECK(m.index(3, 2) == 11);
  CHECK(m.center(3, 2)[0] == doctest::Approx(1.75));
  CHECK(m.cell_volume() == doctest::Approx(0.1));
}

TEST_CASE("constant states are stationary") {
  for (FluxKind flux : {FluxKind::Upwind, FluxKind::Rusanov}) {
    const HydroState s = init_state(
        SpatialMesh::square(8, 6, 1.0, 1.0), [](const Vector&) { return 1.7; },
        [](const Vector&) { return angle(0.4, 3); }, coeffs(0.6, 0.4, 1.0, 3));
    SolverConfig cfg;
    cfg.flux = flux;
    cfg.t_end = 0.5;
    const HydroState e = run(s, cfg).back();
    for (int k = 0; k < s.mesh.cells(); ++k) {
      CHECK(std::abs(e.rho[k] - 1.7) < 1e-14);
      CHECK((e.omega.col(k) - s.omega.col(k)).norm() < 1e-14);
    }
  }
}

TEST_CASE("mass conservation and unit constraint over 1000 steps") {
  const HydroState s = init_state(
      SpatialMesh::square(24, 20, 1.0, 1.0),
      [](const Vector& x) { return 1.0 + 0.4 * std::sin(kTwoPi * x[0]) * std::cos(kTwoPi * x[1]); },
      [](const Vector& x) { return angle(1.0 * std::sin(kTwoPi * x[1])); }, coeffs(0.7, 0.5, 0.5));
  SolverConfig cfg;
  const double dt = stable_dt(s, cfg);
  HydroState cur = s;
  double defect = 0.0;
  for (int k = 0; k < 1000; ++k) {
    cur = step(cur, dt, cfg);
    defect = std::max(defect, cur.max_unit_defect());
  }
  CHECK(std::abs(cur.total_mass() - s.total_mass()) < 1e-13 * s.total_mass());
  CHECK(defect < 1e-12);
}

TEST_CASE("smooth advection converges at first order") {
  const double e1 = advection_error(100), e2 = advection_error(200), e3 = advection_error(400);
  CHECK(std::log2(e1 / e2) > 0.9);
  CHECK(std::log2(e2 / e3) > 0.9);
}

TEST_CASE("run snapshots and t_end = 0") {
  const HydroState s = init_state(
      SpatialMesh::line(16, 1.0), [](const Vector& x) { return 1.0 + 0.1 * std::sin(kTwoPi * x[0]); },
      [](const Vector&) { return angle(0.2); }, coeffs(1.0, 1.0, 1.0));
  SolverConfig cfg;
  cfg.t_end = 0.0;
  CHECK(run(s, cfg).size() == 1);
  cfg.t_end = 0.3;
  cfg.output_every = 0.1;
  const auto snaps = run(s, cfg);
  REQUIRE(snaps.size() == 4);
  CHECK(snaps[1].time == doctest::Approx(0.1));
  CHECK(snaps[3].time == doctest::Approx(0.3));
  cfg.cfl = 1.5;
  CHECK_THROWS_AS(run(s, cfg), DomainError);
}

TEST_CASE("errors: zero orientation and vacuum") {
  CHECK_THROWS_AS(init_state(
                      SpatialMesh::line(8, 1.0), [](const Vector&) { return 1.0; },
                      [](const Vector&) { return Vector(Vector::Zero(2)); }, coeffs(1, 1, 1)),
                  ZeroOrientation);
  const HydroState s = init_state(
      SpatialMesh::line(8, 1.0), [](const Vector& x) { return x[0] < 0.5 ? 1.0 : 0.0; },
      [](const Vector&) { return angle(0.0); }, coeffs(1, 1, 1));
  SolverConfig cfg;
  CHECK_THROWS_AS(step(s, 0.01, cfg), VacuumCell);
}

TEST_CASE("wave speed probe") {
  const HydroState flat = init_state(
      SpatialMesh::line(64, 1.0), [](const Vector&) { return 1.0; }, [](const Vector&) { return angle(0.0); },
      coeffs(1, 1, 1));
  const WaveSpeeds w0 = wave_speed_probe(flat);
  CHECK(w0.min == 0.0);
  CHECK(w0.max == 0.0);
  // tiny sigma: a density bump rides along c1 Omega
  const Coefficients c = coeffs(0.8, 0.5, 1e-8);
  const HydroState bump = init_state(
      SpatialMesh::line(400, 1.0),
      [](const Vector& x) { return 1.0 + 0.5 * std::exp(-std::pow((x[0] - 0.3) / 0.05, 2)); },
      [](const Vector&) { return angle(0.0); }, c);
  const WaveSpeeds w = wave_speed_probe(bump);
  CHECK(w.min == doctest::Approx(0.8).epsilon(0.05));
  CHECK(w.max == doctest::Approx(0.8).epsilon(0.05));
}
