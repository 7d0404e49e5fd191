#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "socicnn/model.hpp"

namespace socicnn {

enum class BranchOrigin { Canonical, Sampled, Extreme };

/// Multiplier triple (nu, p, r) for the ReLU, quadratic and conic blocks.
struct DualBranch {
  std::vector<Vector> nu;  // one per layer
  std::vector<Vector> p;   // one per quadratic module
  std::vector<Vector> r;   // one per conic module
  BranchOrigin origin = BranchOrigin::Canonical;

  double squared_norm() const;
  double norm() const;
};

/// All-zero branch with shapes matching params.
DualBranch zero_branch(const SocIcnnParams& params);

/// Largest violation of 0 <= nu_L <= c, 0 <= nu_l <= U_{l+1}^T nu_{l+1}, ||r_g|| <= lambda_g.
/// Non-positive means feasible.
double feasibility_violation(const SocIcnnParams& params, const DualBranch& branch);

/// Dual template value at x. Throws InfeasibleBranch when the violation exceeds `slack`.
///
///   v.x + b0 + sum_l nu_l.(W_l x + b_l) + sum_h [p_h.q_h(x) - ||p_h||^2/(2 alpha_h)] + sum_g r_g.u_g(x)
double psi(const SocIcnnParams& params, const Vector& x, const DualBranch& branch,
           double slack = 1e-12);

/// Slope of the affine minorant x -> psi(x; branch):
/// v + sum_l W_l^T nu_l + sum_h B_h^T p_h + sum_g A_g^T r_g.
Vector readout(const SocIcnnParams& params, const DualBranch& branch);

/// Canonical (minimum-norm) optimal branch at the traced input.
DualBranch canonical(const SocIcnnParams& params, const ForwardTrace& trace,
                     double tol = kDefaultDegeneracyTol);

enum class ReluStatus { ForcedZero, ForcedUpper, Free };

/// Per-coordinate classification of the optimal ReLU multipliers at one input.
struct ReluBranchBox {
  std::vector<std::vector<ReluStatus>> status;

  std::vector<ReluCoord> free_coords() const;
  std::size_t free_count() const { return free_coords().size(); }
};

ReluBranchBox branch_box(const SocIcnnParams& params, const ForwardTrace& trace,
                         double tol = kDefaultDegeneracyTol);

/// Upper bound on nu_l given the layer above: c for the last layer, U_{l+1}^T nu_{l+1} otherwise.
Vector relu_upper_bound(const SocIcnnParams& params, const std::vector<Vector>& nu,
                        std::size_t layer);

/// Draws n optimal branches. Free ReLU coordinates are uniform on [0, ub] (top-down);
/// conic modules with a vanishing residual draw r_g uniformly from the lambda_g-ball.
std::vector<DualBranch> sample_optimal_branches(const SocIcnnParams& params,
                                                const ForwardTrace& trace, double tol,
                                                std::size_t n, std::uint64_t seed);

inline constexpr std::size_t kMaxFreeCoords = 16;

/// Extreme points of the optimal-dual set: every {0, ub} assignment of the free ReLU
/// coordinates, crossed with boundary points lambda_g * w of each vanishing conic ball.
///
/// The boundary directions w of module g are, in order: A_g d / ||A_g d|| for each d in
/// `query_directions` (skipped when A_g d = 0), `sphere_samples` quasi-uniform unit vectors,
/// and the +/- principal axes of A_g A_g^T. All vanishing modules walk their lists in lockstep.
/// Throws TooManyDegeneracies when more than kMaxFreeCoords ReLU coordinates are free.
std::vector<DualBranch> extreme_branches(const SocIcnnParams& params, const ForwardTrace& trace,
                                         double tol, std::size_t sphere_samples,
                                         std::uint64_t seed,
                                         std::span<const Vector> query_directions = {});

}  // namespace socicnn
