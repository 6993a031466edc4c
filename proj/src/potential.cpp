#include "flockhydro/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "flockhydro/errors.hpp"

namespace flockhydro {

TabulatedRadial::TabulatedRadial(std::vector<double> nodes, std::vector<double> values)
    : nodes_(std::move(nodes)), values_(std::move(values)) {
  const std::size_t n = nodes_.size();
  if (n < 3 || values_.size() != n)
    throw DomainError("tabulated potential needs at least 3 nodes and one value per node");
  if (nodes_.front() != 0.0)
    throw DomainError("tabulated potential must start at r = 0");
  for (std::size_t i = 1; i < n; ++i)
    if (!(nodes_[i] > nodes_[i - 1]))
      throw DomainError("tabulated potential nodes must increase strictly");
  for (double v : values_)
    if (!std::isfinite(v)) throw DomainError("tabulated potential values must be finite");

  // Natural spline: tridiagonal system for the interior second derivatives.
  moments_.assign(n, 0.0);
  std::vector<double> diag(n, 0.0), rhs(n, 0.0), upper(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double hl = nodes_[i] - nodes_[i - 1];
    const double hr = nodes_[i + 1] - nodes_[i];
    diag[i] = 2.0 * (hl + hr);
    upper[i] = hr;
    rhs[i] = 6.0 * ((values_[i + 1] - values_[i]) / hr - (values_[i] - values_[i - 1]) / hl);
  }
  // Thomas algorithm on rows 1..n-2 (sub-diagonal entry of row i is h_{i-1}).
  for (std::size_t i = 2; i + 1 < n; ++i) {
    const double lower = nodes_[i] - nodes_[i - 1];
    const double m = lower / diag[i - 1];
    diag[i] -= m * upper[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  for (std::size_t i = n - 2; i >= 1; --i) {
    const double next = (i + 2 < n) ? moments_[i + 1] : 0.0;
    moments_[i] = (rhs[i] - upper[i] * next) / diag[i];
    if (i == 1) break;
  }
}

std::size_t TabulatedRadial::segment(double r) const {
  if (!(r >= 0.0) || r > nodes_.back()) {
    std::ostringstream os;
    os << "tabulated potential evaluated at r = " << r << " outside [0, " << nodes_.back() << "]";
    throw DomainError(os.str());
  }
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), r);
  std::size_t i = static_cast<std::size_t>(it - nodes_.begin());
  if (i == 0) i = 1;
  if (i >= nodes_.size()) i = nodes_.size() - 1;
  return i - 1;
}

double TabulatedRadial::value(double r) const {
  const std::size_t i = segment(r);
  const double h = nodes_[i + 1] - nodes_[i];
  const double a = (nodes_[i + 1] - r) / h;
  const double b = (r - nodes_[i]) / h;
  return a * values_[i] + b * values_[i + 1] +
         ((a * a * a - a) * moments_[i] + (b * b * b - b) * moments_[i + 1]) * h * h / 6.0;
}

double TabulatedRadial::derivative(double r) const {
  const std::size_t i = segment(r);
  const double h = nodes_[i + 1] - nodes_[i];
  const double a = (nodes_[i + 1] - r) / h;
  const double b = (r - nodes_[i]) / h;
  return (values_[i + 1] - values_[i]) / h -
         (3.0 * a * a - 1.0) * h * moments_[i] / 6.0 + (3.0 * b * b - 1.0) * h * moments_[i + 1] / 6.0;
}

double TabulatedRadial::second_derivative(double r) const {
  const std::size_t i = segment(r);
  const double h = nodes_[i + 1] - nodes_[i];
  const double a = (nodes_[i + 1] - r) / h;
  const double b = (r - nodes_[i]) / h;
  return a * moments_[i] + b * moments_[i + 1];
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

double potential_value(const PotentialSpec& v, double r) {
  return std::visit(overloaded{
                        [](const ZeroPotential&) { return 0.0; },
                        [r](const SelfPropulsion& p) {
                          const double r2 = r * r;
                          return p.beta * r2 * r2 / 4.0 - p.alpha * r2 / 2.0;
                        },
                        [r](const TabulatedRadial& t) { return t.value(r); },
                    },
                    v);
}

double potential_derivative(const PotentialSpec& v, double r) {
  return std::visit(overloaded{
                        [](const ZeroPotential&) { return 0.0; },
                        [r](const SelfPropulsion& p) { return p.beta * r * r * r - p.alpha * r; },
                        [r](const TabulatedRadial& t) { return t.derivative(r); },
                    },
                    v);
}

double potential_second_derivative(const PotentialSpec& v, double r) {
  return std::visit(overloaded{
                        [](const ZeroPotential&) { return 0.0; },
                        [r](const SelfPropulsion& p) { return 3.0 * p.beta * r * r - p.alpha; },
                        [r](const TabulatedRadial& t) { return t.second_derivative(r); },
                    },
                    v);
}

double potential_domain_limit(const PotentialSpec& v) {
  if (const auto* t = std::get_if<TabulatedRadial>(&v)) return t->last_node();
  return std::numeric_limits<double>::infinity();
}

std::string describe(const PotentialSpec& v) {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const ZeroPotential&) { os << "zero"; },
                 [&](const SelfPropulsion& p) {
                   os << "self_propulsion(alpha=" << p.alpha << ", beta=" << p.beta << ")";
                 },
                 [&](const TabulatedRadial& t) { os << "tabulated(" << t.nodes().size() << " nodes)"; },
             },
             v);
  return os.str();
}

void ModelParams::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("sigma must be positive");
  if (dim != 2 && dim != 3) throw DomainError("dim must be 2 or 3");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw DomainError("eta must be positive");
  if (const auto* p = std::get_if<SelfPropulsion>(&potential)) {
    if (!(p->alpha > 0.0)) throw DomainError("alpha must be positive");
    if (!(p->beta > 0.0)) throw DomainError("beta must be positive");
  }
}

double ModelParams::log_weight(double c, double r) const {
  return (r * c - 0.5 * (r * r + 1.0) - scaled_potential(r)) / sigma;
}

double sphere_measure_codim(int dim) {
  return dim == 2 ? 2.0 : 2.0 * std::numbers::pi;
}

}  // namespace flockhydro
