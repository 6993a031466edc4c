#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "flockhydro/coefficients.hpp"
#include "flockhydro/philox.hpp"
#include "flockhydro/soh.hpp"

namespace flockhydro {

/// N particles of the rescaled kinetic equation. Positions live on a periodic
/// segment [0, box_length) moving with the first velocity component; they are
/// absent in homogeneous mode.
struct ParticleEnsemble {
  ModelParams params;
  double epsilon = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t steps_taken = 0;
  Matrix velocities;              // d x N
  std::vector<double> positions;  // empty in homogeneous mode
  double box_length = 1.0;
  int n_cells = 1;                // alignment cells (inhomogeneous mode)
  Matrix cell_omega;              // d x n_cells, last valid orientation per cell
  /// Orientation held fixed instead of the empirical one (tests).
  std::optional<Vector> frozen_omega;
  /// false drops the diffusion term (deterministic drift only).
  bool noise = true;
  /// Zero-moment fallbacks taken so far.
  std::uint64_t zero_moment_warnings = 0;

  int size() const { return static_cast<int>(velocities.cols()); }
  int dim() const { return static_cast<int>(velocities.rows()); }
  bool homogeneous() const { return positions.empty(); }
};

/// Homogeneous ensemble with the given velocities.
ParticleEnsemble make_homogeneous(const ModelParams& params, double epsilon, Matrix velocities,
                                  std::uint64_t seed);

/// Samples N velocities from M_Omega by rejection from the Gaussian part.
Matrix sample_equilibrium(const ModelParams& params, const Vector& omega, int n, std::uint64_t seed,
                          std::uint32_t stream = 0);

/// Sets positions from rho0 on [0, L) (rejection sampling) and velocities
/// from M_{Omega0(x)}.
ParticleEnsemble make_inhomogeneous(const ModelParams& params, double epsilon, int n, double box_length,
                                    int n_cells, const std::function<double(double)>& rho0,
                                    const std::function<Vector(double)>& omega0, std::uint64_t seed);

/// Euler-Maruyama step of dX = V dt,
/// dV = -(1/eps)[(V - Omega_hat) + eta grad V(|V|)] dt + sqrt(2 sigma / eps) dW,
/// with Omega_hat from the pre-step velocities (global or per cell).
/// Throws StiffStep if dt > 0.1 eps.
void kinetic_step(ParticleEnsemble& ensemble, double dt);

/// Empirical orientation used by the next step (d x n_cells; one column in
/// homogeneous mode).
Matrix empirical_orientation(ParticleEnsemble& ensemble);

struct MomentField {
  std::vector<double> edges;
  std::vector<double> rho_hat;
  Matrix mean_velocity;  // d x bins, unnormalized
  Matrix omega_hat;      // d x bins, normalized where the moment is nonzero
  std::vector<int> samples_per_bin;
  std::vector<bool> empty;
};

/// Histogram density (total mass = box_length times the mean of rho0 used at
/// setup, carried as N particles of equal weight) and per-bin orientation.
MomentField empirical_moments(const ParticleEnsemble& ensemble, int n_bins, double total_mass = 1.0);

/// Moments from an explicit subset (with repetition) of particle indices.
MomentField empirical_moments(const ParticleEnsemble& ensemble, int n_bins, double total_mass,
                              const std::vector<int>& indices);

/// One-sample Kolmogorov-Smirnov statistic of `samples` against a CDF.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

/// Marginal CDFs of M_Omega by quadrature: speed |v| and angle acos(v.Omega/|v|).
struct MarginalCdfs {
  std::vector<double> r_knots, r_cdf;
  std::vector<double> theta_knots, theta_cdf;
  double speed(double r) const;
  double angle(double theta) const;
};
MarginalCdfs equilibrium_marginals(const ModelParams& params, int cells = 2000);

struct RelaxationReport {
  double ks_speed = 0.0;
  double ks_angle = 0.0;
  double mean_velocity_norm = 0.0;  // |mean v|, compare with c1
  double c1 = 0.0;
  Vector final_orientation;
  /// (time, ks_speed, ks_angle) at intermediate checkpoints.
  std::vector<std::array<double, 3>> checkpoints;
};

struct RelaxationOptions {
  double dt_over_epsilon = 0.01;
  /// Start from M_Omega instead of the default off-equilibrium Gaussian.
  bool start_at_equilibrium = false;
  int n_checkpoints = 0;
};

/// Homogeneous run to t_end; KS distances of the speed and angle marginals to
/// those of M_{Omega_hat}.
RelaxationReport relaxation_test(const ModelParams& params, double epsilon, int n, double t_end,
                                 std::uint64_t seed, const RelaxationOptions& options = {});

struct ComparisonRow {
  double epsilon = 0.0;
  double err_rho = 0.0;
  double err_rho_sd = 0.0;
  double err_omega = 0.0;
  double err_omega_sd = 0.0;
};

struct HydroComparisonSetup {
  double box_length = 1.0;
  int n_bins = 64;
  double t_end = 1.0;
  std::function<double(double)> rho0;
  std::function<Vector(double)> omega0;
  double dt_over_epsilon = 0.02;
  int soh_refinement = 16;
  int bootstrap = 20;
};

/// For each epsilon: particle run with per-cell alignment against the soh
/// solution from the same initial moments. Errors: L1 of rho and
/// rho-independent L1 of the angle between orientations, with bootstrap
/// standard deviations.
std::vector<ComparisonRow> hydro_comparison(const ModelParams& params, const Coefficients& coeffs,
                                            const std::vector<double>& epsilons, int n,
                                            const HydroComparisonSetup& setup, std::uint64_t seed);

/// Errors of a finished particle run against a soh state on the bin mesh.
ComparisonRow compare_to_hydro(const ParticleEnsemble& ensemble, const HydroState& reference, double total_mass,
                               int bootstrap, std::uint64_t seed);

/// True when both error columns decrease from each epsilon to the next smaller
/// one by more than the combined bootstrap standard deviation.
bool errors_decrease(const std::vector<ComparisonRow>& rows);

}  // namespace flockhydro
