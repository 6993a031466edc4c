#pragma once

#include <functional>
#include <vector>

#include "flockhydro/coefficients.hpp"

namespace flockhydro {

/// Uniform periodic mesh in one or two space dimensions.
struct SpatialMesh {
  int space_dim = 1;
  int nx = 0;
  int ny = 1;
  double lx = 1.0;
  double ly = 1.0;

  static SpatialMesh line(int nx, double lx);
  static SpatialMesh square(int nx, int ny, double lx, double ly);

  double dx() const { return lx / nx; }
  double dy() const { return ly / ny; }
  int cells() const { return nx * ny; }
  double cell_volume() const { return space_dim == 1 ? dx() : dx() * dy(); }
  int index(int i, int j = 0) const { return j * nx + i; }
  /// Cell center; size space_dim.
  Vector center(int i, int j = 0) const;
};

enum class FluxKind { Upwind, Rusanov };

struct SolverConfig {
  double cfl = 0.5;
  double t_end = 1.0;
  FluxKind flux = FluxKind::Upwind;
  /// Only projection after every step is implemented.
  bool project_each_step = true;
  /// Snapshot spacing; 0 keeps only the initial and final states.
  double output_every = 0.0;

  void validate() const;
};

/// Cell averages of rho and unit orientation vectors (one column per cell).
struct HydroState {
  SpatialMesh mesh;
  std::vector<double> rho;
  Matrix omega;  // d x cells
  double time = 0.0;
  Coefficients coeffs;

  int velocity_dim() const { return static_cast<int>(omega.rows()); }
  double total_mass() const;
  double max_unit_defect() const;
};

/// Midpoint sampling of the fields; omega is normalized per cell.
/// Throws ZeroOrientation where |omega_field| < 1e-14.
HydroState init_state(const SpatialMesh& mesh, const std::function<double(const Vector&)>& rho_field,
                      const std::function<Vector(const Vector&)>& omega_field, const Coefficients& coeffs);

/// cfl * min(dx, dy) / (max(|c1|, |c2|) + sqrt(sigma)).
double stable_dt(const HydroState& state, const SolverConfig& config);

/// One forward Euler step: conservative flux for rho, upwind transport plus
/// projected pressure source for omega, then renormalization.
/// Throws VacuumCell if rho drops below 1e-30 in any cell.
HydroState step(const HydroState& state, double dt, const SolverConfig& config);

/// Steps to t_end; snapshots at t = 0, every output_every and at t_end.
std::vector<HydroState> run(const HydroState& state, const SolverConfig& config);

struct WaveSpeeds {
  double min = 0.0;
  double max = 0.0;
};

/// Front speeds of a localized rho perturbation on a 1D state: edges of the
/// region where |rho - median| exceeds half its maximum, tracked over a run of
/// length min(config.t_end, L / (4 s_max)) and fitted by least squares.
WaveSpeeds wave_speed_probe(const HydroState& state, const SolverConfig& config = {});

}  // namespace flockhydro
