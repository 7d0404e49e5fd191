#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "socicnn/dual.hpp"
#include "socicnn/oracle.hpp"
#include "socicnn/random.hpp"

using namespace socicnn;

namespace {

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

bool same_branch(const DualBranch& a, const DualBranch& b) {
  for (std::size_t l = 0; l < a.nu.size(); ++l)
    if (a.nu[l] != b.nu[l]) return false;
  for (std::size_t h = 0; h < a.p.size(); ++h)
    if (a.p[h] != b.p[h]) return false;
  for (std::size_t g = 0; g < a.r.size(); ++g)
    if (a.r[g] != b.r[g]) return false;
  return true;
}

}  // namespace

TEST_CASE("psi and readout of the zero branch") {
  auto p = fixtures::empty_net(3, 2);
  p.v << 1.0, -2.0, 0.5;
  p.b0 = 0.25;
  const Vector x = Vector::LinSpaced(3, -1.0, 2.0);
  const auto zero = zero_branch(p);
  CHECK(psi(p, x, zero) == doctest::Approx(p.v.dot(x) + p.b0).epsilon(1e-15));
  CHECK(readout(p, zero) == p.v);
}

TEST_CASE("readout of the quadratic block") {
  auto p = fixtures::empty_net(2);
  Matrix B(2, 2);
  B << 1.0, 2.0, -0.5, 3.0;
  Vector e(2);
  e << 0.1, -0.2;
  p.quad.push_back({1.5, B, e});
  p.v << 0.3, 0.4;
  const Vector x = Vector::Constant(2, 0.7);
  auto branch = zero_branch(p);
  branch.p[0] = 1.5 * (B * x + e);
  const Vector expected = p.v + 1.5 * B.transpose() * (B * x + e);
  CHECK((readout(p, branch) - expected).norm() <= 1e-14);
  CHECK(rel_gap(psi(p, x, branch), evaluate(p, x)) <= 1e-15);
}

TEST_CASE("infeasible branches are rejected by psi") {
  const auto p = build_random(0, fixtures::small_arch());
  const Vector x = Vector::Zero(4);
  auto branch = canonical(p, forward(p, x));
  branch.r[0] = Vector::Constant(branch.r[0].size(), 10.0);
  CHECK(feasibility_violation(p, branch) > 0.0);
  CHECK_THROWS_AS(psi(p, x, branch), Error);

  auto negative = canonical(p, forward(p, x));
  negative.nu[0](0) = -1.0;
  CHECK(feasibility_violation(p, negative) >= 1.0);
}

TEST_CASE("canonical selector on single-layer masks") {
  Matrix W(3, 2);
  W << 1.0, 0.0, 0.0, 1.0, 1.0, 1.0;
  Vector c(3);
  c << 0.5, 1.0, 2.0;
  SUBCASE("all active") {
    const auto p = fixtures::single_layer(W, Vector::Ones(3), c);
    const auto b = canonical(p, forward(p, Vector::Zero(2)));
    CHECK(b.nu[0] == c);
    CHECK((readout(p, b) - W.transpose() * c).norm() <= 1e-15);
  }
  SUBCASE("all inactive") {
    const auto p = fixtures::single_layer(W, -Vector::Ones(3), c);
    const auto b = canonical(p, forward(p, Vector::Zero(2)));
    CHECK(b.nu[0] == Vector::Zero(3));
    CHECK(readout(p, b) == p.v);
  }
}

TEST_CASE("canonical readout matches finite differences at nondegenerate points") {
  const auto p = build_random(0, fixtures::small_arch());
  auto rng = derived_rng(0, 3);
  for (int k = 0; k < 30; ++k) {
    const Vector x = gaussian_vector(rng, 4);
    const auto t = forward(p, x);
    REQUIRE(degeneracy_report(t).nondegenerate());
    const Vector fd = oracle::fd_gradient([&p](const Vector& z) { return evaluate(p, z); }, x);
    CHECK((readout(p, canonical(p, t)) - fd).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("canonical branch at the constructed degeneracy") {
  const auto inst = build_degenerate_2d();
  const auto t = forward(inst.params, inst.x0);
  const auto b = canonical(inst.params, t);
  CHECK(b.nu[0](0) == 0.0);
  CHECK(b.r[0] == Vector::Zero(b.r[0].size()));
  CHECK(feasibility_violation(inst.params, b) <= 1e-12);
  CHECK(rel_gap(psi(inst.params, inst.x0, b), t.value) <= 1e-12);
}

TEST_CASE("branch_box classification") {
  const auto inst = build_degenerate_2d();
  const auto& p = inst.params;

  SUBCASE("nondegenerate input has no free coordinates") {
    Vector x = inst.x0;
    x.array() += 0.5;
    CHECK(branch_box(p, forward(p, x)).free_count() == 0);
  }
  SUBCASE("constructed kink is the only free coordinate") {
    const auto box = branch_box(p, forward(p, inst.x0));
    const auto free = box.free_coords();
    REQUIRE(free.size() == 1);
    CHECK(free[0] == ReluCoord{0, 0});
  }
  SUBCASE("forced-upper coordinates sit at their upper bound under the canonical selector") {
    const auto t = forward(p, inst.x0);
    const auto box = branch_box(p, t);
    const auto b = canonical(p, t);
    for (std::size_t l = 0; l < p.depth(); ++l) {
      const Vector ub = relu_upper_bound(p, b.nu, l);
      for (Eigen::Index i = 0; i < ub.size(); ++i) {
        if (box.status[l][static_cast<std::size_t>(i)] == ReluStatus::ForcedUpper) CHECK(b.nu[l](i) == ub(i));
        if (box.status[l][static_cast<std::size_t>(i)] == ReluStatus::ForcedZero) CHECK(b.nu[l](i) == 0.0);
      }
    }
  }
}

TEST_CASE("sampled branches at a nondegenerate input equal the canonical branch") {
  const auto p = build_random(1, fixtures::small_arch());
  const auto t = forward(p, Vector::LinSpaced(4, -0.3, 0.6));
  const auto base = canonical(p, t);
  for (const auto& b : sample_optimal_branches(p, t, kDefaultDegeneracyTol, 20, 0)) CHECK(same_branch(b, base));
  const auto ext = extreme_branches(p, t, kDefaultDegeneracyTol, 8, 0);
  REQUIRE(ext.size() == 1);
  CHECK(same_branch(ext[0], base));
}

TEST_CASE("sampled branches at the constructed degeneracy") {
  const auto inst = build_degenerate_2d();
  const auto& p = inst.params;
  const auto t = forward(p, inst.x0);
  const auto base = canonical(p, t);
  const auto samples = sample_optimal_branches(p, t, kDefaultDegeneracyTol, 5000, 0);
  REQUIRE(samples.size() == 5000);

  double worst_gap = 0.0, worst_violation = -1.0, smallest_excess = 1e300;
  for (const auto& b : samples) {
    worst_violation = std::max(worst_violation, feasibility_violation(p, b));
    worst_gap = std::max(worst_gap, rel_gap(psi(p, inst.x0, b), t.value));
    smallest_excess = std::min(smallest_excess, b.norm() - base.norm());
  }
  CHECK(worst_violation <= 1e-12);
  CHECK(worst_gap <= 1e-10);
  CHECK(smallest_excess > 0.0);

  // Samples are spread over the free interval and the ball, not collapsed to a point.
  double nu_min = 1e300, nu_max = -1e300, r_max = 0.0;
  for (const auto& b : samples) {
    nu_min = std::min(nu_min, b.nu[0](0));
    nu_max = std::max(nu_max, b.nu[0](0));
    r_max = std::max(r_max, b.r[0].norm());
  }
  const double ub = relu_upper_bound(p, base.nu, 0)(0);
  CHECK(nu_min < 0.01 * ub);
  CHECK(nu_max > 0.99 * ub);
  CHECK(r_max <= p.cone[0].lambda * (1.0 + 1e-15));
  CHECK(r_max > 0.95 * p.cone[0].lambda);
}

TEST_CASE("sampling is reproducible") {
  const auto inst = build_degenerate_2d();
  const auto t = forward(inst.params, inst.x0);
  const auto a = sample_optimal_branches(inst.params, t, kDefaultDegeneracyTol, 10, 42);
  const auto b = sample_optimal_branches(inst.params, t, kDefaultDegeneracyTol, 10, 42);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(same_branch(a[k], b[k]));
}

TEST_CASE("extreme branches at the constructed degeneracy") {
  const auto inst = build_degenerate_2d();
  const auto& p = inst.params;
  const auto t = forward(p, inst.x0);
  const auto ext = extreme_branches(p, t, kDefaultDegeneracyTol, 256, 0);
  const std::size_t k = static_cast<std::size_t>(p.cone[0].d.size());
  CHECK(ext.size() == 2 * (256 + 2 * k));
  for (const auto& b : ext) {
    CHECK(b.origin == BranchOrigin::Extreme);
    CHECK(feasibility_violation(p, b) <= 1e-12);
    CHECK(rel_gap(psi(p, inst.x0, b), t.value) <= 1e-10);
    CHECK(std::abs(b.r[0].norm() - p.cone[0].lambda) <= 1e-12);
    CHECK(b.norm() >= canonical(p, t).norm());
  }
}

TEST_CASE("extreme branches include the query maximizer direction first") {
  const auto inst = build_degenerate_2d();
  const auto& p = inst.params;
  Vector d(2);
  d << 0.6, -0.8;
  const std::vector<Vector> queries{d};
  const auto ext = extreme_branches(p, forward(p, inst.x0), kDefaultDegeneracyTol, 0, 0, queries);
  const Vector ad = p.cone[0].A * d;
  CHECK((ext.front().r[0] - p.cone[0].lambda * ad / ad.norm()).norm() <= 1e-15);
}

TEST_CASE("too many free coordinates are refused") {
  const auto p = fixtures::single_layer(Matrix::Zero(17, 2), Vector::Zero(17), Vector::Ones(17));
  const auto t = forward(p, Vector::Zero(2));
  CHECK(branch_box(p, t).free_count() == 17);
  CHECK_THROWS_WITH_AS(extreme_branches(p, t, kDefaultDegeneracyTol, 0, 0), doctest::Contains("17"), Error);

  const auto ok = fixtures::single_layer(Matrix::Zero(4, 2), Vector::Zero(4), Vector::Ones(4));
  CHECK(extreme_branches(ok, forward(ok, Vector::Zero(2)), kDefaultDegeneracyTol, 0, 0).size() == 16);
}

TEST_CASE("support property of optimal branches") {
  const auto inst = build_degenerate_2d();
  const auto& p = inst.params;
  const auto t = forward(p, inst.x0);
  auto branches = sample_optimal_branches(p, t, kDefaultDegeneracyTol, 50, 1);
  for (auto& b : extreme_branches(p, t, kDefaultDegeneracyTol, 16, 1)) branches.push_back(std::move(b));
  auto rng = derived_rng(1, 99);
  for (const auto& b : branches) {
    for (int k = 0; k < 100; ++k) {
      const Vector probe = inst.x0 + gaussian_vector(rng, 2);
      CHECK(evaluate(p, probe) - psi(p, probe, b) >= -1e-10);
    }
  }
}

TEST_CASE("weak duality for branches optimal elsewhere") {
  const auto p = build_random(5, fixtures::small_arch());
  auto rng = derived_rng(5, 0);
  for (int k = 0; k < 50; ++k) {
    const auto b = canonical(p, forward(p, gaussian_vector(rng, 4)));
    const Vector probe = gaussian_vector(rng, 4);
    CHECK(psi(p, probe, b) <= evaluate(p, probe) + 1e-10);
  }
}

TEST_CASE("blockwise mixing of optimal branches stays optimal") {
  const auto inst = build_degenerate_2d();
  const auto& p = inst.params;
  const auto t = forward(p, inst.x0);
  const auto a = sample_optimal_branches(p, t, kDefaultDegeneracyTol, 100, 3);
  const auto b = sample_optimal_branches(p, t, kDefaultDegeneracyTol, 100, 4);
  for (std::size_t k = 0; k < a.size(); ++k) {
    DualBranch mixed = a[k];
    mixed.r = b[b.size() - 1 - k].r;
    CHECK(feasibility_violation(p, mixed) <= 1e-12);
    CHECK(rel_gap(psi(p, inst.x0, mixed), t.value) <= 1e-10);
  }
}
