#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "flockhydro/checkpoint.hpp"
#include "flockhydro/config.hpp"
#include "flockhydro/kinetic.hpp"

namespace flockhydro {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitConfig = 2;

/// Initial fields selected by `profile` (x and y in physical units).
double profile_rho(const RunConfig& config, double x, double y = 0.0);
Vector profile_omega(const RunConfig& config, double x, double y = 0.0);

HydroState initial_hydro_state(const RunConfig& config, const Coefficients& coeffs);

/// chi values as a (n_theta + 1) x (n_r + 1) array with the model and mesh in
/// the header.
Checkpoint chi_checkpoint(const ChiField& chi, double truncation_tol, std::uint64_t digest);
/// Rebuilds the field; the grid is recomputed and must reproduce the stored r_max.
ChiField chi_from_checkpoint(const Checkpoint& checkpoint);

/// Identity checks of the equilibrium, chi and coefficient modules.
std::vector<CheckResult> verify_suite(const RunConfig& config);
std::string format_report(const std::vector<CheckResult>& rows);

/// Runs the command and maps errors to exit codes: 0 success, 1 numerical
/// failure (or a failed verify check), 2 configuration or input error.
int dispatch(const RunConfig& config, std::ostream& out, std::ostream& err);

/// `flockhydro <command> [--config path] [--key value ...]`.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace flockhydro
