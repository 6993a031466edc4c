#pragma once

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "flockhydro/errors.hpp"
#include "flockhydro/potential.hpp"

namespace flockhydro {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One-dimensional quadrature rule.
struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on (a, b); exact for polynomials of degree 2n - 1.
Rule1D gauss_legendre(int n, double a, double b);

/// Gauss-Legendre rule with `points_per_cell` nodes on every cell of `edges`.
Rule1D composite_gauss(const std::vector<double>& edges, int points_per_cell);

/// Tensor quadrature on the half strip (theta, r) in (0, pi) x (0, r_max).
///
/// All velocity integrals of functions of (v . Omega / |v|, |v|) reduce to this
/// strip with the jacobian r^{d-1} sin^{d-2}(theta). `log_scale` is the largest
/// value of log e(c, r) on the strip; ratio computations work with weights
/// divided by exp(log_scale) so that strongly concentrated equilibria do not
/// overflow.
struct PolarGrid {
  int dim = 2;
  double r_max = 0.0;
  double log_scale = 0.0;
  Rule1D theta;
  Rule1D r;

  std::size_t n_theta() const { return theta.size(); }
  std::size_t n_r() const { return r.size(); }

  /// Lebesgue jacobian r^{d-1} sin^{d-2}(theta), without the |S^{d-2}| factor.
  double jacobian(std::size_t i_theta, std::size_t j_r) const {
    const double rr = r.nodes[j_r];
    const double s = std::sin(theta.nodes[i_theta]);
    return dim == 2 ? rr : rr * rr * s;
  }
};

/// Grid whose radial cutoff is 1.2 times the smallest radius beyond the peak
/// of e(1, r) past which e stays below truncation_tol times its maximum.
PolarGrid build_polar_grid(const ModelParams& params, int n_theta, int n_r,
                           double truncation_tol = 1e-18);

/// Radial cutoff used by build_polar_grid (exposed for grids built from other rules).
double truncation_radius(const ModelParams& params, double truncation_tol = 1e-18);

/// Largest log e(c, r) over c in [-1, 1] and r in [0, r_max].
double peak_log_weight(const ModelParams& params, double r_max);

/// Grid from arbitrary 1D rules on (0, pi) and (0, r_max).
PolarGrid make_polar_grid(const ModelParams& params, Rule1D theta, Rule1D r, double r_max);

/// e(c, r) = exp(r c / sigma - (r^2 + 1) / (2 sigma) - eta V(r) / sigma).
double weight_e(double c, double r, const ModelParams& params);

[[noreturn]] void throw_integrand_error(std::size_t i_theta, std::size_t j_r, double c, double r);

/// sum_ij w_i w_j f(cos theta_i, r_j) e(cos theta_i, r_j) r_j^{d-1} sin^{d-2} theta_i,
/// divided by exp(grid.log_scale).
template <class F>
double integrate_weighted_relative(F&& f, const PolarGrid& grid, const ModelParams& params) {
  double total = 0.0;
  for (std::size_t i = 0; i < grid.n_theta(); ++i) {
    const double c = std::cos(grid.theta.nodes[i]);
    double row = 0.0;
    for (std::size_t j = 0; j < grid.n_r(); ++j) {
      const double rr = grid.r.nodes[j];
      const double value = f(c, rr);
      if (!std::isfinite(value)) throw_integrand_error(i, j, c, rr);
      const double w = std::exp(params.log_weight(c, rr) - grid.log_scale);
      row += grid.r.weights[j] * grid.jacobian(i, j) * w * value;
    }
    total += grid.theta.weights[i] * row;
  }
  return total;
}

/// Weighted integral over the truncated (theta, r) strip (absolute scale).
template <class F>
double integrate_weighted(F&& f, const PolarGrid& grid, const ModelParams& params) {
  return integrate_weighted_relative(std::forward<F>(f), grid, params) * std::exp(grid.log_scale);
}

/// Orthonormal frame whose first column is Omega; the remaining d - 1 columns
/// span the orthogonal complement.
class Frame {
public:
  explicit Frame(const Vector& omega);
  /// Frame from an explicit basis; columns must be orthonormal and the first
  /// one is the axis.
  static Frame from_columns(const Matrix& columns);

  int dim() const { return static_cast<int>(basis_.cols()); }
  const Matrix& basis() const { return basis_; }
  Vector axis() const { return basis_.col(0); }
  Vector transverse(int k) const { return basis_.col(k + 1); }

private:
  Frame() = default;
  Matrix basis_;
};

/// Visits full velocity-space quadrature nodes built from a polar grid:
/// v = r (cos theta Omega + sin theta u(phi)) with u on the unit sphere of the
/// transverse plane. For d = 2, u = +-E_1; for d = 3, phi uses n_phi
/// equispaced points. `fn(v, c, r, measure)` receives the Lebesgue measure of
/// the node (no equilibrium weight).
template <class Fn>
void for_each_velocity(const PolarGrid& grid, const Frame& frame, int n_phi, Fn&& fn) {
  const int d = grid.dim;
  const Matrix& B = frame.basis();
  Vector v(d);
  std::vector<double> cphi, sphi;
  double phi_weight = 1.0;
  if (d == 2) {
    cphi = {1.0, -1.0};
    sphi = {0.0, 0.0};
  } else {
    phi_weight = 2.0 * std::numbers::pi / n_phi;
    for (int k = 0; k < n_phi; ++k) {
      const double phi = 2.0 * std::numbers::pi * (k + 0.5) / n_phi;
      cphi.push_back(std::cos(phi));
      sphi.push_back(std::sin(phi));
    }
  }
  for (std::size_t i = 0; i < grid.n_theta(); ++i) {
    const double th = grid.theta.nodes[i];
    const double c = std::cos(th), s = std::sin(th);
    for (std::size_t j = 0; j < grid.n_r(); ++j) {
      const double rr = grid.r.nodes[j];
      const double measure = grid.theta.weights[i] * grid.r.weights[j] * grid.jacobian(i, j) * phi_weight;
      for (std::size_t k = 0; k < cphi.size(); ++k) {
        v = rr * c * B.col(0) + rr * s * cphi[k] * B.col(1);
        if (d == 3) v += rr * s * sphi[k] * B.col(2);
        fn(v, c, rr, measure);
      }
    }
  }
}

}  // namespace flockhydro
