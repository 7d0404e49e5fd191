#pragma once

#include <string_view>
#include <vector>

#include "socicnn/model.hpp"

namespace socicnn {

/// Settings for minimizing F_y(x) = f(x) + (beta/2)||x - y||^2.
struct InferenceConfig {
  double beta = 10.0;
  double damping = 1e-8;        // epsilon added to the Newton system
  double armijo = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 60;
  int gd_max_iterations = 2000;
  int newton_max_iterations = 200;
  double grad_tol = 1e-4;
  double progress_tol = 1e-12;  // relative objective decrease that counts as stalled
  double tol = kDefaultDegeneracyTol;
  // White-box steps treat ReLU pre-activations and cone residuals within this distance of
  // their kink as set-valued and descend along the min-norm subgradient. 0 disables.
  double kink_radius = 0.1;
  std::size_t max_kink_coords = 8;

  /// Throws InvalidConfig.
  void validate() const;
};

enum class Method { WhiteboxGd, WhiteboxNewton, FdGd, FdNewton };

std::string_view method_name(Method method);

struct IterationRecord {
  double objective = 0.0;
  double grad_norm = 0.0;
  Vector x;
};

struct InferenceReport {
  Method method = Method::WhiteboxGd;
  Vector x;
  double objective = 0.0;
  double gap_to_best = 0.0;  // filled by assign_gaps
  double grad_norm = 0.0;
  int iterations = 0;
  int backtracks = 0;
  int degenerate_iterates = 0;
  bool line_search_failed = false;
  double time_ms = 0.0;
  double derivative_time_ms = 0.0;
  std::vector<IterationRecord> trace;
};

struct ObjectiveValue {
  double value = 0.0;
  Vector gradient;
};

/// F_y and its canonical (sub)gradient readout + beta (x - y).
ObjectiveValue objective(const SocIcnnParams& params, const Vector& y, double beta, const Vector& x,
                         double tol = kDefaultDegeneracyTol);

/// Gradient descent with Armijo backtracking from eta = 1, starting at x = y.
InferenceReport whitebox_gd(const SocIcnnParams& params, const Vector& y,
                            const InferenceConfig& config);

/// Damped Newton with the closed-form local Hessian plus (beta + damping) I.
/// At a degenerate iterate the vanishing conic terms are dropped from the Hessian.
InferenceReport whitebox_newton(const SocIcnnParams& params, const Vector& y,
                                const InferenceConfig& config);

/// Same update rules with finite-difference derivatives of F_y.
InferenceReport baseline_fd_gd(const SocIcnnParams& params, const Vector& y,
                               const InferenceConfig& config);
InferenceReport baseline_fd_newton(const SocIcnnParams& params, const Vector& y,
                                   const InferenceConfig& config);

InferenceReport run_inference(Method method, const SocIcnnParams& params, const Vector& y,
                              const InferenceConfig& config);

/// Sets gap_to_best = objective - min objective across the given runs of one query.
void assign_gaps(std::vector<InferenceReport>& runs);

struct ReadoutDiagnostics {
  double gradient_error = 0.0;  // dual readout vs frozen-branch gradient, L2
  double hessian_error = 0.0;   // closed form vs FD of the gradient, Frobenius
  double min_relu_margin = 0.0;
  double min_cone_norm = 0.0;
};

/// Throws DegenerateInput when x is degenerate.
ReadoutDiagnostics readout_diagnostics(const SocIcnnParams& params, const Vector& x,
                                       double tol = kDefaultDegeneracyTol);

}  // namespace socicnn
