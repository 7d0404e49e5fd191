#pragma once

#include <cstdint>
#include <vector>

#include "socicnn/model.hpp"

namespace socicnn {

/// Which local smooth piece an input lies on: ReLU activity bits and nonvanishing cones.
struct BranchSignature {
  std::vector<std::vector<bool>> relu_active;
  std::vector<bool> cone_nonzero;

  friend bool operator==(const BranchSignature&, const BranchSignature&) = default;
};

BranchSignature branch_signature(const ForwardTrace& trace, double tol = kDefaultDegeneracyTol);

struct CurvatureModel {
  Vector anchor;
  Vector gradient;
  Matrix hessian;
  BranchSignature signature;
  double min_eigenvalue = 0.0;
};

/// sum_h alpha_h B_h^T B_h + sum_g lambda_g A_g^T (I - u u^T / |u|^2) A_g / |u|, skipping
/// conic modules whose residual norm is <= tol. The ReLU backbone contributes nothing.
Matrix soc_hessian(const SocIcnnParams& params, const ForwardTrace& trace,
                   double tol = kDefaultDegeneracyTol);

/// Smallest eigenvalue of (H + H^T)/2.
double min_eigenvalue(const Matrix& h);

/// Local gradient/Hessian model at a nondegenerate anchor. Throws DegenerateInput otherwise.
CurvatureModel hessian(const SocIcnnParams& params, const Vector& x,
                       double tol = kDefaultDegeneracyTol);

/// Slope and intercept of the ReLU part with every activation mask frozen at the anchor:
/// f_relu(x) = slope . x + intercept near the anchor (v and b0 included).
struct LocalAffine {
  Vector slope;
  double intercept = 0.0;
};

LocalAffine local_affine_constants(const SocIcnnParams& params, const Vector& anchor,
                                   double tol = kDefaultDegeneracyTol);

/// Gradient assembled from the frozen affine branch plus the smooth module terms,
/// computed by forward composition rather than the backward multiplier recursion.
Vector local_branch_gradient(const SocIcnnParams& params, const Vector& x,
                             double tol = kDefaultDegeneracyTol);

/// Smallest |a_{l,i}| and smallest ||u_g|| at the traced input (infinity when absent).
struct BranchMargins {
  double relu = 0.0;
  double cone = 0.0;
};

BranchMargins branch_margins(const ForwardTrace& trace);

struct QuadraticModelFit {
  double radius = 0.0;
  std::size_t trials = 0;
  std::size_t retained = 0;
  double retained_rate = 0.0;
  double mean_abs_residual = 0.0;
};

/// Samples perturbations of norm `radius` around the anchor and averages
/// |f(x+p) - f(x) - g.p - p^T H p / 2| over those that stay on the anchor's branch.
QuadraticModelFit quadratic_model_residual(const SocIcnnParams& params, const Vector& anchor,
                                           double radius, std::size_t trials, double tol,
                                           std::uint64_t seed);

}  // namespace socicnn
