#include "socicnn/curvature.hpp"

#include <cmath>
#include <limits>

#include "socicnn/dual.hpp"
#include "socicnn/random.hpp"

namespace socicnn {

BranchSignature branch_signature(const ForwardTrace& trace, double tol) {
  BranchSignature s;
  for (const auto& a : trace.pre) {
    std::vector<bool> bits(static_cast<std::size_t>(a.size()));
    for (Eigen::Index i = 0; i < a.size(); ++i) bits[static_cast<std::size_t>(i)] = a(i) > tol;
    s.relu_active.push_back(std::move(bits));
  }
  for (const auto& u : trace.cone_res) s.cone_nonzero.push_back(u.norm() > tol);
  return s;
}

Matrix soc_hessian(const SocIcnnParams& params, const ForwardTrace& trace, double tol) {
  const auto n = params.input_dim;
  Matrix h = Matrix::Zero(n, n);
  for (const auto& m : params.quad) h.noalias() += m.alpha * (m.B.transpose() * m.B);
  for (std::size_t g = 0; g < params.cone.size(); ++g) {
    const auto& m = params.cone[g];
    const Vector& u = trace.cone_res[g];
    const double norm = u.norm();
    if (!(norm > tol)) continue;
    const Vector unit = u / norm;
    const Matrix projector =
        Matrix::Identity(u.size(), u.size()) - unit * unit.transpose();
    h.noalias() += (m.lambda / norm) * (m.A.transpose() * projector * m.A);
  }
  return h;
}

double min_eigenvalue(const Matrix& h) {
  const Matrix sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

namespace {

ForwardTrace nondegenerate_trace(const SocIcnnParams& params, const Vector& x, double tol) {
  auto trace = forward(params, x);
  if (!degeneracy_report(trace, tol).nondegenerate())
    throw Error(ErrorCode::DegenerateInput, "local curvature requested at a degenerate input");
  return trace;
}

}  // namespace

CurvatureModel hessian(const SocIcnnParams& params, const Vector& x, double tol) {
  const auto trace = nondegenerate_trace(params, x, tol);
  CurvatureModel model;
  model.anchor = x;
  model.gradient = readout(params, canonical(params, trace, tol));
  const Matrix h = soc_hessian(params, trace, tol);
  model.hessian = 0.5 * (h + h.transpose());
  model.signature = branch_signature(trace, tol);
  model.min_eigenvalue = min_eigenvalue(model.hessian);
  return model;
}

LocalAffine local_affine_constants(const SocIcnnParams& params, const Vector& anchor, double tol) {
  const auto trace = nondegenerate_trace(params, anchor, tol);
  const auto n = params.input_dim;
  // z_l = J_l x + k_l on the frozen branch.
  Matrix jac(0, n);
  Vector offset(0);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Matrix next_jac = layer.W;
    Vector next_offset = layer.b;
    if (layer.U.cols() > 0) {
      next_jac.noalias() += layer.U * jac;
      next_offset.noalias() += layer.U * offset;
    }
    const auto& a = trace.pre[l];
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (!(a(i) > tol)) {
        next_jac.row(i).setZero();
        next_offset(i) = 0.0;
      }
    }
    jac = std::move(next_jac);
    offset = std::move(next_offset);
  }
  LocalAffine out;
  out.slope = params.v + jac.transpose() * params.c;
  out.intercept = params.b0 + params.c.dot(offset);
  return out;
}

Vector local_branch_gradient(const SocIcnnParams& params, const Vector& x, double tol) {
  const auto trace = nondegenerate_trace(params, x, tol);
  Vector g = local_affine_constants(params, x, tol).slope;
  for (std::size_t h = 0; h < params.quad.size(); ++h) {
    const auto& m = params.quad[h];
    g.noalias() += m.alpha * (m.B.transpose() * trace.quad_res[h]);
  }
  for (std::size_t k = 0; k < params.cone.size(); ++k) {
    const auto& m = params.cone[k];
    const Vector& u = trace.cone_res[k];
    g.noalias() += (m.lambda / u.norm()) * (m.A.transpose() * u);
  }
  return g;
}

BranchMargins branch_margins(const ForwardTrace& trace) {
  BranchMargins m{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (const auto& a : trace.pre)
    if (a.size() > 0) m.relu = std::min(m.relu, a.cwiseAbs().minCoeff());
  for (const auto& u : trace.cone_res) m.cone = std::min(m.cone, u.norm());
  return m;
}

QuadraticModelFit quadratic_model_residual(const SocIcnnParams& params, const Vector& anchor,
                                           double radius, std::size_t trials, double tol,
                                           std::uint64_t seed) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidConfig, "radius must be positive");
  const CurvatureModel model = hessian(params, anchor, tol);
  const double f0 = evaluate(params, anchor);

  QuadraticModelFit fit;
  fit.radius = radius;
  fit.trials = trials;
  double total = 0.0;
  for (std::size_t k = 0; k < trials; ++k) {
    auto rng = derived_rng(seed, k);
    const Vector step = radius * unit_direction(rng, params.input_dim);
    const auto trace = forward(params, anchor + step);
    if (!degeneracy_report(trace, tol).nondegenerate()) continue;
    if (!(branch_signature(trace, tol) == model.signature)) continue;
    const double change = trace.value - f0;
    total += std::abs(change - model.gradient.dot(step) - 0.5 * step.dot(model.hessian * step));
    ++fit.retained;
  }
  if (trials > 0) fit.retained_rate = static_cast<double>(fit.retained) / static_cast<double>(trials);
  if (fit.retained > 0) fit.mean_abs_residual = total / static_cast<double>(fit.retained);
  return fit;
}

}  // namespace socicnn
