#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

// Finite-difference and sampling oracles. Nothing here knows about the network structure;
// callers aim them at whatever scalar or vector field they want to check.

namespace socicnn::oracle {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ScalarField = std::function<double(const Vector&)>;
using VectorField = std::function<Vector(const Vector&)>;

inline constexpr double kGradientStep = 1e-6;
inline constexpr double kHessianStep = 1e-5;
inline constexpr double kDirectionalStep = 1e-7;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h.
Vector fd_gradient(const ScalarField& f, const Vector& x, double step = kGradientStep);

/// One-sided (f(x + h d) - f(x)) / h.
double fd_directional(const ScalarField& f, const Vector& x, const Vector& d,
                      double step = kDirectionalStep);

/// Central differences of a gradient field, symmetrized.
Matrix fd_hessian(const VectorField& grad, const Vector& x, double step = kHessianStep);

struct ConvexityProbeResult {
  double max_violation = 0.0;           // max of f(t x + (1-t) y) - [t f(x) + (1-t) f(y)], clamped at 0
  double max_relative_violation = 0.0;  // same, divided by 1 + |f(x)| + |f(y)|
  Vector worst_x;
  Vector worst_y;
  double worst_t = 0.0;
};

/// Samples x, y ~ N(0, scale^2 I) in R^dim and t ~ U[0, 1].
ConvexityProbeResult convexity_probe(const ScalarField& f, Eigen::Index dim,
                                     std::size_t n_triples, std::uint64_t seed,
                                     double scale = 1.0);

}  // namespace socicnn::oracle
