#include "flockhydro/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace flockhydro {

namespace {

constexpr double kRadiusCap = 1e3;

}  // namespace

Rule1D gauss_legendre(int n, double a, double b) {
  if (n < 1) throw DomainError("Gauss-Legendre rule needs at least one node");
  Rule1D rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton on P_n starting from the Tricomi estimate of the i-th root.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = (n == 1) ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // ascending order
    rule.nodes[i] = mid - half * x;
    rule.nodes[n - 1 - i] = mid + half * x;
    rule.weights[i] = rule.weights[n - 1 - i] = half * w;
  }
  return rule;
}

Rule1D composite_gauss(const std::vector<double>& edges, int points_per_cell) {
  if (edges.size() < 2) throw DomainError("composite rule needs at least one cell");
  Rule1D out;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const Rule1D cell = gauss_legendre(points_per_cell, edges[k], edges[k + 1]);
    out.nodes.insert(out.nodes.end(), cell.nodes.begin(), cell.nodes.end());
    out.weights.insert(out.weights.end(), cell.weights.begin(), cell.weights.end());
  }
  return out;
}

double truncation_radius(const ModelParams& params, double truncation_tol) {
  params.validate();
  if (!(truncation_tol > 0.0 && truncation_tol < 1.0))
    throw DomainError("truncation_tol must lie in (0, 1)");

  // e(c, r) is increasing in c for r > 0, so max_c e(c, r) = e(1, r).
  const double limit = std::min(kRadiusCap, potential_domain_limit(params.potential));
  const double threshold_drop = std::log(truncation_tol);
  const double step = 1e-3;
  auto L = [&](double r) { return params.log_weight(1.0, r); };

  double peak = L(0.0);
  double last_above = 0.0;  // last scanned radius with L > peak + log(tol)
  bool found = false;
  for (double r = step;; r += step) {
    if (r > limit) break;
    const double value = L(r);
    if (!std::isfinite(value)) break;
    if (value > peak) peak = value;
    if (value > peak + threshold_drop) last_above = r;
    // Deep enough below the threshold that a later rise would be unphysical
    // for a confining potential.
    if (value < peak + threshold_drop - 60.0 && r > last_above + 1.0) {
      found = true;
      break;
    }
  }
  if (!found) {
    if (std::isfinite(potential_domain_limit(params.potential)) && limit < kRadiusCap)
      throw DomainError("tabulated potential does not cover the truncated velocity domain");
    throw NonconfiningPotential("weight e(1, r) does not fall below the truncation level for r <= 1e3");
  }

  // Bisection for the crossing in [last_above, last_above + step].
  const double target = peak + threshold_drop;
  double lo = last_above, hi = last_above + step;
  for (int it = 0; it < 80; ++it) {
    const double m = 0.5 * (lo + hi);
    if (L(m) > target) lo = m;
    else hi = m;
  }
  const double r_max = 1.2 * hi;
  if (r_max > potential_domain_limit(params.potential))
    throw DomainError("tabulated potential does not cover the truncated velocity domain");
  return r_max;
}

double peak_log_weight(const ModelParams& params, double r_max) {
  auto L = [&](double r) { return params.log_weight(1.0, r); };
  const int n = 20000;
  double best = L(0.0), arg = 0.0;
  for (int k = 1; k <= n; ++k) {
    const double r = r_max * k / n;
    const double v = L(r);
    if (v > best) best = v, arg = r;
  }
  // golden-section polish around the best sample
  double a = std::max(0.0, arg - r_max / n), b = std::min(r_max, arg + r_max / n);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 60; ++it) {
    const double x1 = b - g * (b - a), x2 = a + g * (b - a);
    if (L(x1) > L(x2)) b = x2;
    else a = x1;
  }
  return std::max(best, L(0.5 * (a + b)));
}

PolarGrid make_polar_grid(const ModelParams& params, Rule1D theta, Rule1D r, double r_max) {
  params.validate();
  PolarGrid grid;
  grid.dim = params.dim;
  grid.r_max = r_max;
  grid.theta = std::move(theta);
  grid.r = std::move(r);
  grid.log_scale = peak_log_weight(params, r_max);
  return grid;
}

PolarGrid build_polar_grid(const ModelParams& params, int n_theta, int n_r, double truncation_tol) {
  if (n_theta < 4 || n_r < 4) throw DomainError("n_theta and n_r must be at least 4");
  const double r_max = truncation_radius(params, truncation_tol);
  return make_polar_grid(params, gauss_legendre(n_theta, 0.0, std::numbers::pi),
                         gauss_legendre(n_r, 0.0, r_max), r_max);
}

double weight_e(double c, double r, const ModelParams& params) {
  if (!(c >= -1.0 && c <= 1.0)) throw DomainError("weight_e: c must lie in [-1, 1]");
  if (!(r >= 0.0)) throw DomainError("weight_e: r must be nonnegative");
  return std::exp(params.log_weight(c, r));
}

void throw_integrand_error(std::size_t i_theta, std::size_t j_r, double c, double r) {
  std::ostringstream os;
  os << "non-finite integrand at node (theta index " << i_theta << ", r index " << j_r
     << "), c = " << c << ", r = " << r;
  throw IntegrandError(os.str());
}

Frame::Frame(const Vector& omega) {
  const int d = static_cast<int>(omega.size());
  const double norm = omega.norm();
  if (d < 2 || !(std::abs(norm - 1.0) < 1e-12)) throw DomainError("frame axis must be a unit vector");
  basis_ = Matrix::Zero(d, d);
  basis_.col(0) = omega;
  // Gram-Schmidt on the coordinate axes, least aligned first.
  std::vector<int> order(d);
  for (int i = 0; i < d; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return std::abs(omega[a]) < std::abs(omega[b]); });
  int filled = 1;
  for (int idx : order) {
    if (filled == d) break;
    Vector e = Vector::Unit(d, idx);
    for (int k = 0; k < filled; ++k) e -= e.dot(basis_.col(k)) * basis_.col(k);
    const double n = e.norm();
    if (n < 1e-8) continue;
    basis_.col(filled++) = e / n;
  }
}

Frame Frame::from_columns(const Matrix& columns) {
  const Matrix gram = columns.transpose() * columns;
  if (columns.rows() != columns.cols() || !(gram - Matrix::Identity(gram.rows(), gram.cols())).isZero(1e-12))
    throw DomainError("frame columns must be orthonormal");
  Frame f;
  f.basis_ = columns;
  return f;
}

}  // namespace flockhydro
