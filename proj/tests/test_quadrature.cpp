#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "flockhydro/quadrature.hpp"

using namespace flockhydro;

TEST_CASE("Gauss-Legendre integrates polynomials up to degree 2n - 1") {
  for (int n : {1, 2, 5, 12, 40}) {
    const Rule1D g = gauss_legendre(n, 0.0, 2.0);
    double s = 0.0, w = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      s += g.weights[k] * std::pow(g.nodes[k], 2 * n - 1);
      w += g.weights[k];
    }
    CHECK(w == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(s == doctest::Approx(std::pow(2.0, 2 * n) / (2 * n)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(gauss_legendre(0, 0.0, 1.0), DomainError);
}

TEST_CASE("composite rule on uneven edges") {
  const Rule1D g = composite_gauss({0.0, 0.3, 1.0, std::numbers::pi}, 10);
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) s += g.weights[k] * std::sin(g.nodes[k]);
  CHECK(s == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(composite_gauss({1.0}, 3), DomainError);
}

TEST_CASE("Gaussian weight integrates to (2 pi sigma)^(d/2)") {
  for (int d : {2, 3})
    for (double sigma : {0.25, 1.0, 4.0}) {
      ModelParams p;
      p.sigma = sigma;
      p.dim = d;
      const PolarGrid grid = build_polar_grid(p, 64, 128);
      const double z = sphere_measure_codim(d) * integrate_weighted([](double, double) { return 1.0; }, grid, p);
      CHECK(z == doctest::Approx(std::pow(2.0 * std::numbers::pi * sigma, 0.5 * d)).epsilon(1e-10));
    }
}

TEST_CASE("truncation radius sits where the tail reaches the tolerance") {
  ModelParams p;
  p.sigma = 0.5;
  p.potential = SelfPropulsion{1.0, 1.0};
  const double tol = 1e-18;
  const double r = truncation_radius(p, tol);  // 1.2 times the crossing
  const double peak = peak_log_weight(p, 10.0);
  CHECK(p.log_weight(1.0, r / 1.2) - peak == doctest::Approx(std::log(tol)).epsilon(1e-6));
  CHECK(build_polar_grid(p, 8, 8, tol).r_max == r);
  // smaller sigma concentrates the weight
  ModelParams q = p;
  q.sigma = 0.1;
  CHECK(truncation_radius(q, tol) < r);
}

TEST_CASE("weight_e guards its arguments") {
  ModelParams p;
  CHECK(weight_e(1.0, 1.0, p) == doctest::Approx(1.0));
  CHECK_THROWS_AS(weight_e(1.5, 1.0, p), DomainError);
  CHECK_THROWS_AS(weight_e(0.0, -1.0, p), DomainError);
}

TEST_CASE("model parameter validation") {
  ModelParams p;
  p.sigma = -1.0;
  CHECK_THROWS_WITH_AS(p.validate(), "DomainError: sigma must be positive", DomainError);
  p.sigma = 1.0;
  p.dim = 4;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p.dim = 2;
  p.potential = SelfPropulsion{1.0, 0.0};
  CHECK_THROWS_AS(p.validate(), DomainError);
}

TEST_CASE("tabulated potential: natural spline reproduces lines and refuses extrapolation") {
  const TabulatedRadial t({0.0, 0.5, 1.5, 3.0}, {1.0, 0.0, -2.0, -5.0});
  CHECK(t.value(0.25) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(t.value(2.0) == doctest::Approx(-3.0).epsilon(1e-14));
  CHECK(t.derivative(1.0) == doctest::Approx(-2.0).epsilon(1e-13));
  CHECK(std::abs(t.second_derivative(2.2)) < 1e-12);
  CHECK_THROWS_AS(t.value(3.5), DomainError);
  CHECK_THROWS_AS(TabulatedRadial({0.1, 1.0, 2.0}, {0.0, 0.0, 0.0}), DomainError);
  CHECK_THROWS_AS(TabulatedRadial({0.0, 1.0, 1.0}, {0.0, 0.0, 0.0}), DomainError);
}

TEST_CASE("tabulated copy of V_{1,1} gives the closed-form weight integrals") {
  std::vector<double> r, v;
  for (int k = 0; k <= 800; ++k) {
    r.push_back(k * 0.01);
    v.push_back(std::pow(r.back(), 4) / 4 - r.back() * r.back() / 2);
  }
  ModelParams a, b;
  a.potential = SelfPropulsion{1.0, 1.0};
  b.potential = TabulatedRadial(r, v);
  const PolarGrid ga = build_polar_grid(a, 48, 96), gb = build_polar_grid(b, 48, 96);
  auto one = [](double, double) { return 1.0; };
  CHECK(integrate_weighted(one, gb, b) == doctest::Approx(integrate_weighted(one, ga, a)).epsilon(1e-6));
}

TEST_CASE("frames are orthonormal with Omega first") {
  Vector om(3);
  om << 0.48, 0.6, 0.64;
  const Frame f(om);
  CHECK((f.basis().transpose() * f.basis() - Matrix::Identity(3, 3)).norm() < 1e-14);
  CHECK((f.axis() - om).norm() < 1e-15);
  Vector bad(3);
  bad << 1.0, 1.0, 0.0;
  CHECK_THROWS_AS(Frame{bad}, DomainError);
}

TEST_CASE("for_each_velocity reproduces Lebesgue measure of the truncated ball") {
  ModelParams p;
  p.dim = 3;
  const PolarGrid g = make_polar_grid(p, gauss_legendre(16, 0.0, std::numbers::pi), gauss_legendre(8, 0.0, 2.0), 2.0);
  Vector om = Vector::Unit(3, 2);
  double vol = 0.0;
  for_each_velocity(g, Frame(om), 12, [&](const Vector&, double, double, double m) { vol += m; });
  CHECK(vol == doctest::Approx(4.0 / 3.0 * std::numbers::pi * 8.0).epsilon(1e-12));
}
