#include "flockhydro/equilibrium.hpp"

#include <cmath>

namespace flockhydro {

namespace {

void require_unit(const Vector& omega, int dim) {
  if (omega.size() != dim) throw DomainError("orientation has the wrong dimension");
  if (!(std::abs(omega.norm() - 1.0) <= 1e-12)) throw DomainError("orientation must be a unit vector");
}

}  // namespace

double log_partition_function(const ModelParams& params, const PolarGrid& grid) {
  const double rel = integrate_weighted_relative([](double, double) { return 1.0; }, grid, params);
  return std::log(sphere_measure_codim(params.dim) * rel) + grid.log_scale;
}

double partition_function(const ModelParams& params, const PolarGrid& grid) {
  return std::exp(log_partition_function(params, grid));
}

EquilibriumTable make_equilibrium_table(const ModelParams& params, const PolarGrid& grid) {
  params.validate();
  if (grid.dim != params.dim) throw DomainError("grid dimension does not match the model");
  EquilibriumTable t;
  t.params = params;
  t.grid = grid;
  t.log_Z = log_partition_function(params, grid);
  t.Z = std::exp(t.log_Z);
  if (!std::isfinite(t.log_Z)) throw NonconfiningPotential("partition function is not finite");

  const double mass = integrate_weighted_relative([](double, double) { return 1.0; }, grid, params);
  const double moment = integrate_weighted_relative([](double c, double r) { return r * c; }, grid, params);
  t.c1 = moment / mass;
  if (!(t.c1 > 0.0)) throw NumericalError("IntegrandError", "directional moment c1 is not positive");
  return t;
}

double phi_omega(const Vector& v, const Vector& omega, const ModelParams& params) {
  return 0.5 * (v - omega).squaredNorm() + params.scaled_potential(v.norm());
}

Vector grad_phi_omega(const Vector& v, const Vector& omega, const ModelParams& params) {
  const double r = v.norm();
  Vector g = v - omega;
  if (r > 0.0) g += params.scaled_potential_derivative(r) / r * v;
  return g;
}

double equilibrium_density(const Vector& v, const Vector& omega, const EquilibriumTable& table) {
  require_unit(omega, table.params.dim);
  return std::exp(-phi_omega(v, omega, table.params) / table.params.sigma - table.log_Z);
}

double directional_moment_c1(const EquilibriumTable& table) { return table.c1; }

Vector first_moment(const Vector& omega, const EquilibriumTable& table, int n_phi) {
  require_unit(omega, table.params.dim);
  Vector m = Vector::Zero(table.params.dim);
  for_each_velocity(table.grid, Frame(omega), n_phi, [&](const Vector& v, double, double, double w) {
    m += w * equilibrium_density(v, omega, table) * v;
  });
  return m;
}

Matrix pressure_tensor(const Vector& omega, const EquilibriumTable& table, int n_phi) {
  require_unit(omega, table.params.dim);
  const int d = table.params.dim;
  const Matrix P = Matrix::Identity(d, d) - omega * omega.transpose();
  Matrix T = Matrix::Zero(d, d);
  Vector dv(d);
  for_each_velocity(table.grid, Frame(omega), n_phi, [&](const Vector& v, double, double, double w) {
    dv = v - omega;
    T += (w * equilibrium_density(v, omega, table)) * dv * (P * dv).transpose();
  });
  return T;
}

Orientation orientation_of(const Vector& moment) {
  Orientation out;
  const double n = moment.norm();
  if (n == 0.0 || !std::isfinite(n)) {
    // hypot-style norms underflow for subnormal entries; rescale first
    const double scale = moment.cwiseAbs().maxCoeff();
    if (scale > 0.0 && std::isfinite(scale)) {
      const Vector scaled = moment / scale;
      out.direction = scaled / scaled.norm();
      out.near_zero = true;
      return out;
    }
    out.direction = Vector::Zero(moment.size());
    out.zero = true;
    out.near_zero = true;
    return out;
  }
  out.direction = moment / n;
  out.near_zero = n < kNearZeroMoment;
  return out;
}

}  // namespace flockhydro
