#include "flockhydro/coefficients.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

namespace flockhydro {

namespace {

Vector axis_vector(int d) {
  Vector o = Vector::Zero(d);
  o[0] = 1.0;
  return o;
}

Vector tilted(int d) {
  Vector o(d);
  if (d == 2) o << 0.6, -0.8;
  else o << -0.36, 0.48, 0.8;
  return o;
}

constexpr int kChiPointsPerCell = 4;

}  // namespace

double compute_c1(const ModelParams& params, const PolarGrid& grid) {
  params.validate();
  const int d = params.dim;
  const Vector om = axis_vector(d);
  Vector v = Vector::Zero(d);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < grid.n_theta(); ++i) {
    const double th = grid.theta.nodes[i];
    const double s = std::sin(th);
    const double sin_pow = d == 2 ? 1.0 : s;
    for (std::size_t j = 0; j < grid.n_r(); ++j) {
      const double r = grid.r.nodes[j];
      v[0] = r * std::cos(th);
      v[1] = r * s;
      const double e = std::exp(-phi_omega(v, om, params) / params.sigma - grid.log_scale);
      const double w = grid.theta.weights[i] * grid.r.weights[j] * sin_pow * std::pow(r, d - 1) * e;
      den += w;
      num += w * v[0];
    }
  }
  if (!(den > 0.0) || !std::isfinite(num)) throw IntegrandError("c1 moments are not finite and positive");
  return num / den;
}

double compute_c2(const ChiField& chi, const ModelParams& params, const PolarGrid& grid) {
  if (params.dim != chi.params().dim || std::abs(grid.r_max - chi.mesh().r_max) > 1e-12 * grid.r_max)
    throw DomainError("chi was solved on a different grid");
  const PolarGrid g = chi.element_grid(kChiPointsPerCell);
  const int d = params.dim;
  double num = 0.0, den = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < g.n_theta(); ++i) {
    const double th = g.theta.nodes[i];
    const double c = std::cos(th), s = std::sin(th);
    const double sin_pow = std::pow(s, d - 1);
    for (std::size_t j = 0; j < g.n_r(); ++j) {
      const double r = g.r.nodes[j];
      const double x = chi(c, r);
      const double e = std::exp(params.log_weight(c, r) - g.log_scale);
      const double w = g.theta.weights[i] * g.r.weights[j] * std::pow(r, d) * sin_pow * e * x;
      if (!std::isfinite(w)) throw_integrand_error(i, j, c, r);
      den += w;
      num += w * r * c;
      scale += std::abs(w * r * c);
    }
  }
  if (!(std::abs(den) >= 1e-14 * scale) || den == 0.0) {
    std::ostringstream os;
    os << "c2 denominator " << den << " is negligible against numerator scale " << scale;
    throw DegenerateDenominator(os.str());
  }
  return num / den;
}

std::pair<double, double> compute_c_tilde(const ChiField& chi, const EquilibriumTable& table, int n_phi) {
  const int d = table.params.dim;
  const Vector om = tilted(d);
  double t1 = 0.0, t2 = 0.0;
  for_each_velocity(chi.element_grid(kChiPointsPerCell), Frame(om), n_phi,
                    [&](const Vector& v, double, double, double w) {
                      const double a = v.dot(om);
                      const double p = (v - a * om).norm();
                      const double r = v.norm();
                      const double m = w * chi(a / r, r) * p / (d - 1) * equilibrium_density(v, om, table);
                      t1 += m;
                      t2 += m * a;
                    });
  return {t1, t2};
}

Coefficients compute_coefficients(const ModelParams& params, const PolarGrid& grid, const ChiField& chi) {
  Coefficients out;
  out.params = params;
  out.c1 = compute_c1(params, grid);
  out.c2 = compute_c2(chi, params, chi.grid());
  const EquilibriumTable table = make_equilibrium_table(params, grid);
  const auto [t1, t2] = compute_c_tilde(chi, table);
  out.c1_tilde = t1;
  out.c2_tilde = t2;
  out.chi_meta = {chi.mesh().n_theta, chi.mesh().n_r, chi.mesh().r_max};
  return out;
}

Coefficients compute_coefficients(const ModelParams& params, int n_quad, int n_chi, double tol) {
  const PolarGrid grid = build_polar_grid(params, n_quad, n_quad);
  const ChiField chi = compute_chi(params, n_chi, n_chi, tol);
  return compute_coefficients(params, grid, chi);
}

double potential_minimizer(const PotentialSpec& potential) {
  double r0 = 0.0;
  if (const auto* sp = std::get_if<SelfPropulsion>(&potential)) {
    if (!(sp->alpha > 0.0 && sp->beta > 0.0)) throw NoInteriorMinimum("alpha and beta must be positive");
    r0 = std::sqrt(sp->alpha / sp->beta);
  } else if (const auto* tab = std::get_if<TabulatedRadial>(&potential)) {
    const double hi = tab->last_node();
    const int n = 4000;
    int best = 0;
    double vbest = tab->value(0.0);
    for (int k = 1; k <= n; ++k) {
      const double v = tab->value(hi * k / n);
      if (v < vbest) vbest = v, best = k;
    }
    if (best == 0 || best == n) throw NoInteriorMinimum("minimum of the tabulated potential is on the boundary");
    double a = hi * (best - 1) / n, b = hi * (best + 1) / n;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 100; ++it) {
      const double x1 = b - g * (b - a), x2 = a + g * (b - a);
      if (tab->value(x1) < tab->value(x2)) b = x2;
      else a = x1;
    }
    r0 = 0.5 * (a + b);
  } else {
    throw NoInteriorMinimum("the zero potential has no interior minimizer");
  }
  if (!(potential_second_derivative(potential, r0) > 0.0))
    throw NoInteriorMinimum("V''(r0) is not positive");
  return r0;
}

double laplace_limit_c1(const PotentialSpec& potential, double sigma, int dim) {
  if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
  if (dim != 2 && dim != 3) throw DomainError("dim must be 2 or 3");
  const double r0 = potential_minimizer(potential);
  const double k = r0 / sigma;
  // exponent shifted by its maximum k so the sums stay finite for small sigma
  const Rule1D rule = gauss_legendre(400, 0.0, std::numbers::pi);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double c = std::cos(rule.nodes[i]);
    const double w = rule.weights[i] * std::exp(k * (c - 1.0)) * (dim == 3 ? std::sin(rule.nodes[i]) : 1.0);
    num += w * c;
    den += w;
  }
  return r0 * num / den;
}

std::vector<LambdaPoint> c1_lambda_curve(const PotentialSpec& potential, double sigma, int dim,
                                         const std::vector<double>& lambdas, int n_theta, int n_r) {
  std::vector<LambdaPoint> out;
  double prev = 0.0;
  for (double lambda : lambdas) {
    if (!(lambda > prev)) throw DomainError("lambdas must be positive and increasing");
    prev = lambda;
    ModelParams p;
    p.sigma = sigma;
    p.dim = dim;
    p.potential = potential;
    p.eta = lambda;
    const PolarGrid grid = build_polar_grid(p, n_theta, n_r);
    LambdaPoint pt;
    pt.lambda = lambda;
    pt.c1 = compute_c1(p, grid);
    pt.r_max = grid.r_max;
    int support = 0;
    for (double r : grid.r.nodes)
      if (p.log_weight(1.0, r) - grid.log_scale > std::log(1e-3)) ++support;
    pt.underresolved = support < 8;
    if (pt.underresolved)
      std::cerr << "warning: c1 at lambda = " << lambda << " resolves the weight with only " << support
                << " radial nodes\n";
    out.push_back(pt);
  }
  return out;
}

}  // namespace flockhydro
