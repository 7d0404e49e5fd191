#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "socicnn/error.hpp"

namespace socicnn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Preactivation/residual magnitude at or below which an input is treated as sitting on a kink.
inline constexpr double kDefaultDegeneracyTol = 1e-9;

/// One hidden layer: a = W x + U z_prev + b. The first layer's U has zero columns.
struct Layer {
  Matrix W;
  Matrix U;
  Vector b;
};

/// (alpha/2) * ||B x + e||^2
struct QuadModule {
  double alpha = 1.0;
  Matrix B;
  Vector e;
};

/// lambda * ||A x + d||
struct ConeModule {
  double lambda = 1.0;
  Matrix A;
  Vector d;
};

/// Parameters of a second-order-cone input convex network.
///
///   f(x) = c . z_L(x) + v . x + b0 + sum_h (alpha_h/2)||B_h x + e_h||^2 + sum_g lambda_g ||A_g x + d_g||
///
/// with z_l = max(W_l x + U_l z_{l-1} + b_l, 0). Convexity in x requires U_l >= 0 for l >= 2,
/// c >= 0, alpha_h > 0 and lambda_g >= 0.
struct SocIcnnParams {
  Eigen::Index input_dim = 0;
  std::vector<Layer> layers;
  Vector c;
  Vector v;
  double b0 = 0.0;
  std::vector<QuadModule> quad;
  std::vector<ConeModule> cone;
  std::uint64_t seed = 0;

  std::size_t depth() const { return layers.size(); }
  Eigen::Index width(std::size_t layer) const { return layers[layer].b.size(); }
  std::size_t relu_units() const;
};

/// Shape of a randomly generated network.
struct Architecture {
  Eigen::Index input_dim = 0;
  std::vector<Eigen::Index> widths;
  std::vector<Eigen::Index> quad_dims;
  std::vector<Eigen::Index> cone_dims;

  static Architecture uniform(Eigen::Index input_dim, Eigen::Index width, std::size_t depth,
                              std::size_t quad_count, Eigen::Index quad_dim,
                              std::size_t cone_count, Eigen::Index cone_dim);
};

/// Structural record of one forward evaluation.
struct ForwardTrace {
  Vector x;
  std::vector<Vector> pre;       // a_l(x)
  std::vector<Vector> act;       // z_l(x)
  std::vector<Vector> quad_res;  // q_h(x) = B_h x + e_h
  std::vector<Vector> cone_res;  // u_g(x) = A_g x + d_g
  double relu_value = 0.0;       // c . z_L + v . x + b0
  double value = 0.0;
};

struct ReluCoord {
  std::size_t layer = 0;
  Eigen::Index unit = 0;
  friend bool operator==(const ReluCoord&, const ReluCoord&) = default;
};

struct DegeneracyReport {
  std::vector<ReluCoord> relu_zero;
  std::vector<std::size_t> cone_zero;
  double tol = kDefaultDegeneracyTol;

  bool nondegenerate() const { return relu_zero.empty() && cone_zero.empty(); }
};

struct Validation {
  std::optional<ErrorCode> error;
  std::string message;

  bool ok() const { return !error.has_value(); }
  explicit operator bool() const { return ok(); }
};

/// Checks shapes and the convexity sign constraints. Reports the first violation found.
Validation validate(const SocIcnnParams& params);

/// Throws Error with the first violated invariant.
void require_valid(const SocIcnnParams& params);

/// Deterministic random network. Gaussian weights scaled by 1/sqrt(fan-in); U and c are
/// absolute values of Gaussians; alpha and lambda are uniform in [0.5, 1.5].
SocIcnnParams build_random(std::uint64_t seed, const Architecture& arch);

/// Where the constructed kink sits in build_degenerate_2d.
struct DegenerateSpec {
  std::size_t relu_layer = 0;
  Eigen::Index relu_unit = 0;
  std::size_t cone_module = 0;
  std::uint64_t seed = 0;
};

struct DegenerateInstance {
  SocIcnnParams params;
  Vector x0;
};

/// Two-input network with exactly one zero ReLU preactivation and one zero conic residual at x0.
/// Every other preactivation and residual norm at x0 is at least 0.1 in magnitude.
DegenerateInstance build_degenerate_2d(const DegenerateSpec& spec = {});

/// W x + U z, accumulated before the bias is added. Shared by forward and the exact-zero
/// construction so that adding b = -(W x + U z) reproduces 0 bit-for-bit.
Vector linear_part(const Layer& layer, const Vector& x, const Vector& z_prev);

ForwardTrace forward(const SocIcnnParams& params, const Vector& x);

/// Convenience: forward(params, x).value.
double evaluate(const SocIcnnParams& params, const Vector& x);

DegeneracyReport degeneracy_report(const ForwardTrace& trace, double tol = kDefaultDegeneracyTol);

}  // namespace socicnn
