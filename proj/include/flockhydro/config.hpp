#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flockhydro/potential.hpp"

namespace flockhydro {

/// Everything a CLI run needs. Field names match the config keys; the section
/// of each key is given in the comment.
struct RunConfig {
  // top level
  std::string command;  // coeffs, chi, hydro, kinetic, verify, compare
  std::string output_dir = "out";
  std::uint64_t seed = 1;

  // [model]
  ModelParams model;
  std::string potential_file;  // r,V table for potential = tabulated

  // [grid]
  int n_quad = 128;
  int n_chi = 128;
  double chi_tol = 1e-10;
  double truncation_tol = 1e-18;
  std::vector<double> lambdas;  // optional c1/c2 sweep for coeffs

  // [run]
  double t_end = 1.0;
  double output_every = 0.0;
  double cfl = 0.5;
  std::string flux = "upwind";

  // [space]
  int nx = 256;
  int ny = 0;  // 0 selects a 1D mesh
  double lx = 2.0;
  double ly = 2.0;
  std::string profile = "wave";  // wave, constant, bump
  double rho_mean = 1.0;
  double rho_amp = 0.5;
  double phi_amp = 0.8;

  // [particles]
  int particles = 10000;
  double epsilon = 0.1;
  double dt_over_epsilon = 0.01;
  int n_bins = 64;
  bool homogeneous = false;
  std::vector<double> epsilons{0.2, 0.1, 0.05};
  int bootstrap = 20;
  int soh_refinement = 16;

  // [verify]
  int n_test = 20;
  int n_densities = 20;
  int n_negative = 5;
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines with optional `[section]` headers; '#' starts a
/// comment. Keys may appear at top level or in their own section. Overrides
/// use bare or `section.key` names and win over the text. Throws ConfigError
/// naming the key on unknown keys, malformed values or failed validation.
RunConfig parse_config_text(const std::string& text, const Overrides& overrides = {},
                            const std::string& base_dir = ".");
RunConfig parse_config(const std::string& path, const Overrides& overrides = {});

/// Checks every field against the preconditions of the modules it feeds.
void validate_config(const RunConfig& config);

/// One `section.key = value` line per field except output_dir, sorted, doubles
/// with 17 digits.
std::string canonical_text(const RunConfig& config);
std::uint64_t config_digest(const RunConfig& config);

/// 17 significant digits ("%.17g"), used in every CSV.
std::string format_double(double x);

}  // namespace flockhydro
