#include "socicnn/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "socicnn/random.hpp"

namespace socicnn {

Vector canonical_subgradient(const SocIcnnParams& params, const ForwardTrace& trace, double tol) {
  return readout(params, canonical(params, trace, tol));
}

Vector gradient(const SocIcnnParams& params, const Vector& x, double tol) {
  const auto trace = forward(params, x);
  if (!degeneracy_report(trace, tol).nondegenerate())
    throw Error(ErrorCode::DegenerateInput, "gradient requested at a degenerate input");
  return canonical_subgradient(params, trace, tol);
}

std::vector<Vector> subdifferential_sample(const SocIcnnParams& params, const Vector& x,
                                           double tol, std::size_t n, std::uint64_t seed,
                                           std::size_t sphere_samples) {
  const auto trace = forward(params, x);
  std::vector<Vector> out;
  for (const auto& b : sample_optimal_branches(params, trace, tol, n, seed))
    out.push_back(readout(params, b));
  for (const auto& b : extreme_branches(params, trace, tol, sphere_samples, seed))
    out.push_back(readout(params, b));
  return out;
}

double primal_directional_derivative(const SocIcnnParams& params, const ForwardTrace& trace,
                                     const Vector& d, double tol) {
  Vector dz_prev(0);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Vector da = layer.W * d;
    if (layer.U.cols() > 0) da.noalias() += layer.U * dz_prev;
    const auto& a = trace.pre[l];
    for (Eigen::Index i = 0; i < da.size(); ++i) {
      if (a(i) < -tol)
        da(i) = 0.0;
      else if (a(i) <= tol)
        da(i) = std::max(da(i), 0.0);
    }
    dz_prev = std::move(da);
  }
  double value = params.c.dot(dz_prev) + params.v.dot(d);
  for (std::size_t h = 0; h < params.quad.size(); ++h) {
    const auto& m = params.quad[h];
    value += m.alpha * trace.quad_res[h].dot(m.B * d);
  }
  for (std::size_t g = 0; g < params.cone.size(); ++g) {
    const auto& m = params.cone[g];
    const Vector ad = m.A * d;
    const double norm = trace.cone_res[g].norm();
    value += norm > tol ? m.lambda * trace.cone_res[g].dot(ad) / norm : m.lambda * ad.norm();
  }
  return value;
}

DirectionalDerivativeResult directional_derivative(const SocIcnnParams& params, const Vector& x,
                                                   const Vector& d, double tol,
                                                   std::size_t branch_budget,
                                                   std::uint64_t seed) {
  const double scale = d.norm();
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw Error(ErrorCode::NonFiniteInput, "direction must be finite and nonzero");
  const Vector unit = d / scale;
  const auto trace = forward(params, x);

  DirectionalDerivativeResult result;
  result.direction = unit;
  const Vector query[] = {unit};
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& b : extreme_branches(params, trace, tol, branch_budget, seed, query))
    best = std::max(best, readout(params, b).dot(unit));
  result.dual_max = scale * best;
  result.primal = scale * primal_directional_derivative(params, trace, unit, tol);
  result.canonical_value = scale * canonical_subgradient(params, trace, tol).dot(unit);
  return result;
}

double canonical_gap_fraction(const SocIcnnParams& params, const Vector& x0,
                              std::size_t directions, double tol, std::uint64_t seed) {
  if (directions == 0) return 0.0;
  std::size_t gapped = 0;
  for (std::size_t k = 0; k < directions; ++k) {
    auto rng = derived_rng(seed, k);
    const Vector d = unit_direction(rng, params.input_dim);
    const auto r = directional_derivative(params, x0, d, tol);
    if (r.dual_max - r.canonical_value > kCanonicalGapThreshold) ++gapped;
  }
  return static_cast<double>(gapped) / static_cast<double>(directions);
}

double support_margin(const SocIcnnParams& params, const Vector& x, double fx, const Vector& g,
                      const Vector& y) {
  return evaluate(params, y) - fx - g.dot(y - x);
}

}  // namespace socicnn
