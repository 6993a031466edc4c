#pragma once

#include "flockhydro/quadrature.hpp"

namespace flockhydro {

/// Normalization and first directional moment of the equilibrium family
/// M_Omega(v) = exp(-Phi_Omega(v) / sigma) / Z for one parameter set.
///
/// Both numbers are independent of Omega, which is why the table carries no
/// orientation. Densities are represented by callers as (rho, Omega, table).
struct EquilibriumTable {
  ModelParams params;
  PolarGrid grid;
  double Z = 0.0;
  double log_Z = 0.0;
  double c1 = 0.0;
};

EquilibriumTable make_equilibrium_table(const ModelParams& params, const PolarGrid& grid);

/// Z = |S^{d-2}| integral of e over the truncated strip.
double partition_function(const ModelParams& params, const PolarGrid& grid);
double log_partition_function(const ModelParams& params, const PolarGrid& grid);

/// Phi_Omega(v) = |v - Omega|^2 / 2 + eta V(|v|).
double phi_omega(const Vector& v, const Vector& omega, const ModelParams& params);
/// grad_v Phi_Omega(v) = v - Omega + eta V'(|v|) v / |v|.
Vector grad_phi_omega(const Vector& v, const Vector& omega, const ModelParams& params);

/// M_Omega(v). Throws DomainError unless |omega| = 1 within 1e-12.
double equilibrium_density(const Vector& v, const Vector& omega, const EquilibriumTable& table);

/// c1 = ratio of the r^d cos(theta) and r^{d-1} moments of e on the strip.
double directional_moment_c1(const EquilibriumTable& table);

/// Integral of v M_Omega(v) by full velocity-space quadrature around omega.
Vector first_moment(const Vector& omega, const EquilibriumTable& table, int n_phi = 8);

/// Integral of (v - Omega) (x) (I - Omega (x) Omega)(v - Omega) M_Omega(v) dv,
/// evaluated on the rotated velocity quadrature.
Matrix pressure_tensor(const Vector& omega, const EquilibriumTable& table, int n_phi = 8);

/// Result of normalizing a first moment.
struct Orientation {
  Vector direction;
  /// The moment was exactly zero and the zero vector is returned.
  bool zero = false;
  /// |moment| < 1e-14: direction is numerically meaningless.
  bool near_zero = false;
};

inline constexpr double kNearZeroMoment = 1e-14;

/// moment / |moment|, or the zero vector for a vanishing moment.
Orientation orientation_of(const Vector& moment);

}  // namespace flockhydro
