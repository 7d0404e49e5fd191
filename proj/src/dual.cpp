#include "socicnn/dual.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "socicnn/random.hpp"

namespace socicnn {

double DualBranch::squared_norm() const {
  double s = 0.0;
  for (const auto& v : nu) s += v.squaredNorm();
  for (const auto& v : p) s += v.squaredNorm();
  for (const auto& v : r) s += v.squaredNorm();
  return s;
}

double DualBranch::norm() const { return std::sqrt(squared_norm()); }

DualBranch zero_branch(const SocIcnnParams& params) {
  DualBranch b;
  for (const auto& layer : params.layers) b.nu.push_back(Vector::Zero(layer.b.size()));
  for (const auto& m : params.quad) b.p.push_back(Vector::Zero(m.e.size()));
  for (const auto& m : params.cone) b.r.push_back(Vector::Zero(m.d.size()));
  return b;
}

namespace {

void check_shapes(const SocIcnnParams& params, const DualBranch& branch) {
  bool ok = branch.nu.size() == params.layers.size() && branch.p.size() == params.quad.size() &&
            branch.r.size() == params.cone.size();
  for (std::size_t l = 0; ok && l < branch.nu.size(); ++l)
    ok = branch.nu[l].size() == params.layers[l].b.size();
  for (std::size_t h = 0; ok && h < branch.p.size(); ++h)
    ok = branch.p[h].size() == params.quad[h].e.size();
  for (std::size_t g = 0; ok && g < branch.r.size(); ++g)
    ok = branch.r[g].size() == params.cone[g].d.size();
  if (!ok) throw Error(ErrorCode::DimensionMismatch, "dual branch shape does not match network");
}

Vector canonical_cone_multiplier(const ConeModule& m, const Vector& u, double tol) {
  const double norm = u.norm();
  if (norm > tol) return m.lambda * u / norm;
  return Vector::Zero(u.size());
}

}  // namespace

Vector relu_upper_bound(const SocIcnnParams& params, const std::vector<Vector>& nu,
                        std::size_t layer) {
  if (layer + 1 == params.layers.size()) return params.c;
  return params.layers[layer + 1].U.transpose() * nu[layer + 1];
}

double feasibility_violation(const SocIcnnParams& params, const DualBranch& branch) {
  check_shapes(params, branch);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < branch.nu.size(); ++l) {
    const Vector ub = relu_upper_bound(params, branch.nu, l);
    worst = std::max(worst, (-branch.nu[l]).maxCoeff());
    worst = std::max(worst, (branch.nu[l] - ub).maxCoeff());
  }
  for (std::size_t g = 0; g < branch.r.size(); ++g)
    worst = std::max(worst, branch.r[g].norm() - params.cone[g].lambda);
  return worst;
}

double psi(const SocIcnnParams& params, const Vector& x, const DualBranch& branch, double slack) {
  if (feasibility_violation(params, branch) > slack)
    throw Error(ErrorCode::InfeasibleBranch, "branch violates the dual box/ball constraints");
  double value = params.v.dot(x) + params.b0;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Vector affine = layer.W * x;
    affine += layer.b;
    value += branch.nu[l].dot(affine);
  }
  for (std::size_t h = 0; h < params.quad.size(); ++h) {
    const auto& m = params.quad[h];
    Vector q = m.B * x;
    q += m.e;
    value += branch.p[h].dot(q) - branch.p[h].squaredNorm() / (2.0 * m.alpha);
  }
  for (std::size_t g = 0; g < params.cone.size(); ++g) {
    const auto& m = params.cone[g];
    Vector u = m.A * x;
    u += m.d;
    value += branch.r[g].dot(u);
  }
  return value;
}

Vector readout(const SocIcnnParams& params, const DualBranch& branch) {
  check_shapes(params, branch);
  Vector g = params.v;
  for (std::size_t l = 0; l < params.layers.size(); ++l)
    g.noalias() += params.layers[l].W.transpose() * branch.nu[l];
  for (std::size_t h = 0; h < params.quad.size(); ++h)
    g.noalias() += params.quad[h].B.transpose() * branch.p[h];
  for (std::size_t g_idx = 0; g_idx < params.cone.size(); ++g_idx)
    g.noalias() += params.cone[g_idx].A.transpose() * branch.r[g_idx];
  return g;
}

DualBranch canonical(const SocIcnnParams& params, const ForwardTrace& trace, double tol) {
  const std::size_t depth = params.layers.size();
  DualBranch b;
  b.origin = BranchOrigin::Canonical;
  b.nu.resize(depth);
  for (std::size_t l = depth; l-- > 0;) {
    Vector nu = relu_upper_bound(params, b.nu, l);
    const auto& a = trace.pre[l];
    for (Eigen::Index i = 0; i < nu.size(); ++i)
      if (!(a(i) > tol)) nu(i) = 0.0;
    b.nu[l] = std::move(nu);
  }
  for (std::size_t h = 0; h < params.quad.size(); ++h)
    b.p.push_back(params.quad[h].alpha * trace.quad_res[h]);
  for (std::size_t g = 0; g < params.cone.size(); ++g)
    b.r.push_back(canonical_cone_multiplier(params.cone[g], trace.cone_res[g], tol));
  return b;
}

std::vector<ReluCoord> ReluBranchBox::free_coords() const {
  std::vector<ReluCoord> out;
  for (std::size_t l = 0; l < status.size(); ++l)
    for (std::size_t i = 0; i < status[l].size(); ++i)
      if (status[l][i] == ReluStatus::Free) out.push_back({l, static_cast<Eigen::Index>(i)});
  return out;
}

ReluBranchBox branch_box(const SocIcnnParams& params, const ForwardTrace& trace, double tol) {
  ReluBranchBox box;
  box.status.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& a = trace.pre[l];
    auto& row = box.status[l];
    row.resize(static_cast<std::size_t>(a.size()));
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (a(i) > tol)
        row[static_cast<std::size_t>(i)] = ReluStatus::ForcedUpper;
      else if (a(i) < -tol)
        row[static_cast<std::size_t>(i)] = ReluStatus::ForcedZero;
      else
        row[static_cast<std::size_t>(i)] = ReluStatus::Free;
    }
  }
  return box;
}

namespace {

/// Fills nu top-down; `free_value(l, i, ub)` picks the value of each free coordinate.
template <typename FreeValue>
std::vector<Vector> relu_multipliers(const SocIcnnParams& params, const ReluBranchBox& box,
                                     FreeValue&& free_value) {
  const std::size_t depth = params.layers.size();
  std::vector<Vector> nu(depth);
  for (std::size_t l = depth; l-- > 0;) {
    Vector ub = relu_upper_bound(params, nu, l);
    for (Eigen::Index i = 0; i < ub.size(); ++i) {
      switch (box.status[l][static_cast<std::size_t>(i)]) {
        case ReluStatus::ForcedZero: ub(i) = 0.0; break;
        case ReluStatus::ForcedUpper: break;
        case ReluStatus::Free: ub(i) = free_value(l, i, ub(i)); break;
      }
    }
    nu[l] = std::move(ub);
  }
  return nu;
}

std::vector<std::size_t> vanishing_modules(const ForwardTrace& trace, double tol) {
  std::vector<std::size_t> out;
  for (std::size_t g = 0; g < trace.cone_res.size(); ++g)
    if (trace.cone_res[g].norm() <= tol) out.push_back(g);
  return out;
}

/// Roughly evenly spread unit vectors in R^k.
std::vector<Vector> sphere_points(Eigen::Index k, std::size_t count, std::mt19937_64& rng) {
  std::vector<Vector> out;
  out.reserve(count);
  if (k == 1) {
    for (std::size_t j = 0; j < count; ++j) out.push_back(Vector::Constant(1, j % 2 == 0 ? 1.0 : -1.0));
  } else if (k == 2) {
    std::uniform_real_distribution<double> offset_dist(0.0, 1.0);
    const double offset = offset_dist(rng);
    for (std::size_t j = 0; j < count; ++j) {
      const double angle = 2.0 * std::numbers::pi * (static_cast<double>(j) + offset) /
                           static_cast<double>(count);
      Vector w(2);
      w << std::cos(angle), std::sin(angle);
      out.push_back(std::move(w));
    }
  } else {
    for (std::size_t j = 0; j < count; ++j) out.push_back(unit_direction(rng, k));
  }
  return out;
}

std::vector<Vector> principal_axes(const Matrix& A) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(A * A.transpose());
  std::vector<Vector> out;
  for (Eigen::Index j = eig.eigenvectors().cols(); j-- > 0;) {
    const Vector axis = eig.eigenvectors().col(j).normalized();
    out.push_back(axis);
    out.push_back(-axis);
  }
  return out;
}

}  // namespace

std::vector<DualBranch> sample_optimal_branches(const SocIcnnParams& params,
                                                const ForwardTrace& trace, double tol,
                                                std::size_t n, std::uint64_t seed) {
  const ReluBranchBox box = branch_box(params, trace, tol);
  const DualBranch base = canonical(params, trace, tol);
  const auto zero_modules = vanishing_modules(trace, tol);

  std::vector<DualBranch> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto rng = derived_rng(seed, k);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    DualBranch b = base;
    b.origin = BranchOrigin::Sampled;
    b.nu = relu_multipliers(params, box,
                            [&](std::size_t, Eigen::Index, double ub) { return unit(rng) * ub; });
    for (auto g : zero_modules)
      b.r[g] = uniform_ball(rng, params.cone[g].d.size(), params.cone[g].lambda);
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<DualBranch> extreme_branches(const SocIcnnParams& params, const ForwardTrace& trace,
                                         double tol, std::size_t sphere_samples,
                                         std::uint64_t seed,
                                         std::span<const Vector> query_directions) {
  const ReluBranchBox box = branch_box(params, trace, tol);
  const auto free = box.free_coords();
  if (free.size() > kMaxFreeCoords)
    throw Error(ErrorCode::TooManyDegeneracies,
                std::to_string(free.size()) + " free ReLU coordinates exceed the enumeration limit");
  const DualBranch base = canonical(params, trace, tol);
  const auto zero_modules = vanishing_modules(trace, tol);
  if (free.empty() && zero_modules.empty()) return {base};

  std::vector<std::vector<Vector>> directions(zero_modules.size());
  std::size_t lockstep = 1;
  for (std::size_t z = 0; z < zero_modules.size(); ++z) {
    const auto& m = params.cone[zero_modules[z]];
    auto& dirs = directions[z];
    for (const auto& d : query_directions) {
      const Vector ad = m.A * d;
      const double norm = ad.norm();
      if (norm > 0.0) dirs.push_back(ad / norm);
    }
    auto rng = derived_rng(seed, zero_modules[z]);
    for (auto& w : sphere_points(m.d.size(), sphere_samples, rng)) dirs.push_back(std::move(w));
    for (auto& w : principal_axes(m.A)) dirs.push_back(std::move(w));
    lockstep = std::max(lockstep, dirs.size());
  }

  // Position of each free coordinate in the endpoint bitmask.
  std::vector<std::vector<int>> bit_of(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l)
    bit_of[l].assign(static_cast<std::size_t>(params.layers[l].b.size()), -1);
  for (std::size_t f = 0; f < free.size(); ++f)
    bit_of[free[f].layer][static_cast<std::size_t>(free[f].unit)] = static_cast<int>(f);

  const std::size_t assignments = std::size_t{1} << free.size();
  std::vector<DualBranch> out;
  out.reserve(assignments * lockstep);
  for (std::size_t mask = 0; mask < assignments; ++mask) {
    auto nu = relu_multipliers(params, box, [&](std::size_t l, Eigen::Index i, double ub) {
      const int bit = bit_of[l][static_cast<std::size_t>(i)];
      return ((mask >> bit) & 1U) ? ub : 0.0;
    });
    for (std::size_t j = 0; j < lockstep; ++j) {
      DualBranch b = base;
      b.origin = BranchOrigin::Extreme;
      b.nu = nu;
      for (std::size_t z = 0; z < zero_modules.size(); ++z) {
        const auto g = zero_modules[z];
        const auto& dirs = directions[z];
        b.r[g] = params.cone[g].lambda * dirs[j % dirs.size()];
      }
      out.push_back(std::move(b));
    }
  }
  return out;
}

}  // namespace socicnn
