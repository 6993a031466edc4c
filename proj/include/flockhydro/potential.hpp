#pragma once

#include <string>
#include <variant>
#include <vector>

namespace flockhydro {

struct ZeroPotential {};

/// V(r) = beta r^4 / 4 - alpha r^2 / 2 (self-propulsion balanced by friction).
struct SelfPropulsion {
  double alpha = 1.0;
  double beta = 1.0;
};

/// Radial potential given by samples, interpolated with a natural cubic spline.
/// Nodes must start at r = 0 and increase strictly; evaluation past the last
/// node throws DomainError.
class TabulatedRadial {
public:
  TabulatedRadial(std::vector<double> nodes, std::vector<double> values);

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& values() const { return values_; }
  double last_node() const { return nodes_.back(); }

  double value(double r) const;
  double derivative(double r) const;
  double second_derivative(double r) const;

private:
  std::size_t segment(double r) const;

  std::vector<double> nodes_;
  std::vector<double> values_;
  std::vector<double> moments_;  // spline second derivatives at the nodes
};

using PotentialSpec = std::variant<ZeroPotential, SelfPropulsion, TabulatedRadial>;

double potential_value(const PotentialSpec& v, double r);
double potential_derivative(const PotentialSpec& v, double r);
double potential_second_derivative(const PotentialSpec& v, double r);

/// Largest radius at which the potential can be evaluated (infinity for the
/// closed-form variants).
double potential_domain_limit(const PotentialSpec& v);

std::string describe(const PotentialSpec& v);

/// Noise intensity, velocity dimension, confining potential and its strength.
struct ModelParams {
  double sigma = 1.0;
  int dim = 2;
  PotentialSpec potential = ZeroPotential{};
  double eta = 1.0;

  /// Throws DomainError on sigma <= 0, eta <= 0, dim outside {2, 3} or an
  /// invalid SelfPropulsion coefficient.
  void validate() const;

  /// Exponent of e(c, r): (r c - (r^2 + 1) / 2 - eta V(r)) / sigma.
  double log_weight(double c, double r) const;

  /// eta V(r) and its first two derivatives.
  double scaled_potential(double r) const { return eta * potential_value(potential, r); }
  double scaled_potential_derivative(double r) const {
    return eta * potential_derivative(potential, r);
  }
  double scaled_potential_second_derivative(double r) const {
    return eta * potential_second_derivative(potential, r);
  }

  /// Copy with the potential multiplied by `factor` (the e_lambda family).
  ModelParams with_potential_scaled(double factor) const {
    ModelParams p = *this;
    p.eta *= factor;
    return p;
  }
};

/// |S^{d-2}|: 2 for d = 2, 2 pi for d = 3.
double sphere_measure_codim(int dim);

}  // namespace flockhydro
