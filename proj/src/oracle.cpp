#include "socicnn/oracle.hpp"

#include <cmath>
#include <random>

#include "socicnn/error.hpp"

namespace socicnn::oracle {

namespace {

double checked(double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::NonFiniteInput, "oracle evaluation is not finite");
  return value;
}

void require_step(double step) {
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidConfig, "finite-difference step must be positive");
}

}  // namespace

Vector fd_gradient(const ScalarField& f, const Vector& x, double step) {
  require_step(step);
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + step;
    const double plus = checked(f(probe));
    probe(i) = x(i) - step;
    const double minus = checked(f(probe));
    probe(i) = x(i);
    g(i) = (plus - minus) / (2.0 * step);
  }
  return g;
}

double fd_directional(const ScalarField& f, const Vector& x, const Vector& d, double step) {
  require_step(step);
  const Vector moved = x + step * d;
  return (checked(f(moved)) - checked(f(x))) / step;
}

Matrix fd_hessian(const VectorField& grad, const Vector& x, double step) {
  require_step(step);
  const auto n = x.size();
  Matrix h(n, n);
  Vector probe = x;
  for (Eigen::Index j = 0; j < n; ++j) {
    probe(j) = x(j) + step;
    const Vector plus = grad(probe);
    probe(j) = x(j) - step;
    const Vector minus = grad(probe);
    probe(j) = x(j);
    if (!plus.allFinite() || !minus.allFinite())
      throw Error(ErrorCode::NonFiniteInput, "oracle gradient is not finite");
    h.col(j) = (plus - minus) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

ConvexityProbeResult convexity_probe(const ScalarField& f, Eigen::Index dim,
                                     std::size_t n_triples, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ConvexityProbeResult result;
  Vector x(dim), y(dim);
  for (std::size_t k = 0; k < n_triples; ++k) {
    for (Eigen::Index i = 0; i < dim; ++i) x(i) = normal(rng);
    for (Eigen::Index i = 0; i < dim; ++i) y(i) = normal(rng);
    const double t = unit(rng);
    const double fx = checked(f(x));
    const double fy = checked(f(y));
    const double fm = checked(f(t * x + (1.0 - t) * y));
    const double gap = t * fx + (1.0 - t) * fy - fm;
    // Convexity says gap >= 0; a violation is fm exceeding the chord.
    const double violation = std::max(0.0, -gap);
    if (violation > result.max_violation) {
      result.max_violation = violation;
      result.worst_x = x;
      result.worst_y = y;
      result.worst_t = t;
    }
    result.max_relative_violation =
        std::max(result.max_relative_violation, violation / (1.0 + std::abs(fx) + std::abs(fy)));
  }
  return result;
}

}  // namespace socicnn::oracle
