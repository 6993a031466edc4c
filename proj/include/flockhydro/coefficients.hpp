#pragma once

#include <vector>

#include "flockhydro/gci_chi.hpp"

namespace flockhydro {

/// Resolution of the chi solve behind a c2 value.
struct ChiMeta {
  int n_theta = 0;
  int n_r = 0;
  double r_max = 0.0;
};

/// Transport coefficients of the macroscopic system.
struct Coefficients {
  double c1 = 0.0;
  double c2 = 0.0;
  double c1_tilde = 0.0;
  double c2_tilde = 0.0;
  ModelParams params;
  ChiMeta chi_meta;
};

/// c1 from the (theta, r) moments of e, evaluated through Phi_Omega of the
/// axis-frame velocity (independent of EquilibriumTable::c1).
double compute_c1(const ModelParams& params, const PolarGrid& grid);

/// c2 = int r^{d+1} cos chi e sin^{d-1} / int r^d chi e sin^{d-1}. The
/// integrals run on the element grid of `chi`; `grid` must describe the same
/// truncated domain. Throws DegenerateDenominator when the denominator is below
/// 1e-14 times the absolute numerator integral.
double compute_c2(const ChiField& chi, const ModelParams& params, const PolarGrid& grid);

/// (c1_tilde, c2_tilde): int chi |P v| M / (d - 1) and its (v . Omega)-weighted
/// version, by full velocity-space quadrature around a tilted Omega.
std::pair<double, double> compute_c_tilde(const ChiField& chi, const EquilibriumTable& table, int n_phi = 8);

/// All four numbers: c1 on an n_quad x n_quad Gauss grid, chi on an
/// n_chi x n_chi mesh.
Coefficients compute_coefficients(const ModelParams& params, int n_quad = 128, int n_chi = 128,
                                  double tol = 1e-10);
/// Same, reusing a solved chi.
Coefficients compute_coefficients(const ModelParams& params, const PolarGrid& grid, const ChiField& chi);

/// Minimizer r0 of V on (0, inf). Closed form for SelfPropulsion.
/// Throws NoInteriorMinimum when the minimum sits on the boundary or V''(r0) <= 0.
double potential_minimizer(const PotentialSpec& potential);

/// r0 int cos e^{r0 cos / sigma} sin^{d-2} / int e^{r0 cos / sigma} sin^{d-2}.
double laplace_limit_c1(const PotentialSpec& potential, double sigma, int dim);

struct LambdaPoint {
  double lambda = 0.0;
  double c1 = 0.0;
  double r_max = 0.0;
  /// Fewer than 8 r-nodes where e(1, r) exceeds 1e-3 of its peak.
  bool underresolved = false;
};

/// c1 for the potential scaled by each lambda; the grid is rebuilt per lambda.
std::vector<LambdaPoint> c1_lambda_curve(const PotentialSpec& potential, double sigma, int dim,
                                         const std::vector<double>& lambdas, int n_theta = 64, int n_r = 256);

}  // namespace flockhydro
