#pragma once

#include <cstdint>
#include <vector>

#include "socicnn/dual.hpp"
#include "socicnn/model.hpp"

namespace socicnn {

/// Gradient at a nondegenerate input, read out from the canonical branch.
/// Throws DegenerateInput when x sits on a ReLU kink or a vanishing conic residual.
Vector gradient(const SocIcnnParams& params, const Vector& x, double tol = kDefaultDegeneracyTol);

/// Canonical subgradient; valid at every input, equal to the gradient when nondegenerate.
Vector canonical_subgradient(const SocIcnnParams& params, const ForwardTrace& trace,
                             double tol = kDefaultDegeneracyTol);

/// Readouts of n sampled optimal branches followed by the readouts of the extreme branches.
std::vector<Vector> subdifferential_sample(const SocIcnnParams& params, const Vector& x,
                                           double tol, std::size_t n, std::uint64_t seed,
                                           std::size_t sphere_samples = 16);

struct DirectionalDerivativeResult {
  Vector direction;        // unit vector
  double dual_max = 0.0;   // max of readout(xi).d over optimal branches
  double primal = 0.0;     // one-sided forward recursion
  double canonical_value = 0.0;
};

/// One-sided derivative f'(x; d) by propagating the perturbation through the network with
/// the one-sided ReLU derivative (max(da, 0) on kinks) and lambda ||A d|| on vanishing cones.
double primal_directional_derivative(const SocIcnnParams& params, const ForwardTrace& trace,
                                     const Vector& d, double tol = kDefaultDegeneracyTol);

/// Directional derivative of f at x along d. The evaluation uses d/||d||; all three returned
/// values are scaled back by ||d|| so they are positively homogeneous in d.
/// `branch_budget` is the number of extra sphere points per vanishing conic module.
DirectionalDerivativeResult directional_derivative(const SocIcnnParams& params, const Vector& x,
                                                   const Vector& d,
                                                   double tol = kDefaultDegeneracyTol,
                                                   std::size_t branch_budget = 0,
                                                   std::uint64_t seed = 0);

inline constexpr double kCanonicalGapThreshold = 1e-9;

/// Fraction of random unit directions on which the canonical readout falls strictly
/// (by more than kCanonicalGapThreshold) below the directional maximum.
double canonical_gap_fraction(const SocIcnnParams& params, const Vector& x0,
                              std::size_t directions, double tol = kDefaultDegeneracyTol,
                              std::uint64_t seed = 0);

/// f(y) - f(x) - g.(y - x).
double support_margin(const SocIcnnParams& params, const Vector& x, double fx, const Vector& g,
                      const Vector& y);

}  // namespace socicnn
