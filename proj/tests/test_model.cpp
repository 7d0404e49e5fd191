#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "socicnn/dual.hpp"
#include "socicnn/model.hpp"
#include "socicnn/oracle.hpp"
#include "socicnn/random.hpp"

using namespace socicnn;

namespace {

SocIcnnParams two_layer_net() {
  auto p = build_random(4, Architecture::uniform(3, 3, 2, 1, 2, 1, 2));
  p.c << 1.0, 0.0, 2.0;
  return p;
}

std::optional<ErrorCode> error_of(const SocIcnnParams& p) { return validate(p).error; }

}  // namespace

TEST_CASE("validate accepts nonnegative c with zeros") {
  CHECK(validate(two_layer_net()).ok());
}

TEST_CASE("validate reports the violated invariant") {
  SUBCASE("negative U entry") {
    auto p = two_layer_net();
    p.layers[1].U(0, 0) = -0.1;
    CHECK(error_of(p) == ErrorCode::Negativity);
  }
  SUBCASE("negative c entry") {
    auto p = two_layer_net();
    p.c(1) = -1e-3;
    CHECK(error_of(p) == ErrorCode::Negativity);
  }
  SUBCASE("zero alpha") {
    auto p = two_layer_net();
    p.quad[0].alpha = 0.0;
    CHECK(error_of(p) == ErrorCode::NonpositiveAlpha);
  }
  SUBCASE("negative lambda") {
    auto p = two_layer_net();
    p.cone[0].lambda = -0.5;
    CHECK(error_of(p) == ErrorCode::NegativeLambda);
  }
  SUBCASE("shape mismatch") {
    auto p = two_layer_net();
    p.layers[1].W = Matrix::Zero(3, 4);
    CHECK(error_of(p) == ErrorCode::DimensionMismatch);
  }
  SUBCASE("first layer with nonempty U") {
    auto p = two_layer_net();
    p.layers[0].U = Matrix::Zero(3, 2);
    CHECK(error_of(p) == ErrorCode::DimensionMismatch);
  }
  SUBCASE("require_valid throws") {
    auto p = two_layer_net();
    p.quad[0].alpha = -1.0;
    CHECK_THROWS_AS(require_valid(p), Error);
  }
}

TEST_CASE("build_random") {
  const auto arch = Architecture::uniform(20, 64, 4, 2, 20, 2, 20);
  const auto a = build_random(0, arch);
  const auto b = build_random(0, arch);

  CHECK(validate(a).ok());
  CHECK(a.depth() == 4);
  CHECK(a.width(3) == 64);
  CHECK(a.quad.size() == 2);
  CHECK(a.cone.size() == 2);
  CHECK(a.layers[0].U.cols() == 0);
  CHECK(a.layers[1].U.rows() == 64);
  CHECK(a.layers[1].U.cols() == 64);

  for (std::size_t l = 0; l < a.depth(); ++l) {
    CHECK(a.layers[l].W == b.layers[l].W);
    CHECK(a.layers[l].U == b.layers[l].U);
    CHECK(a.layers[l].b == b.layers[l].b);
  }
  CHECK(a.c == b.c);
  CHECK(a.v == b.v);
  for (std::size_t h = 0; h < a.quad.size(); ++h) {
    CHECK(a.quad[h].alpha == b.quad[h].alpha);
    CHECK(a.quad[h].B == b.quad[h].B);
  }
  for (const auto& m : a.cone) {
    CHECK(m.lambda >= 0.5);
    CHECK(m.lambda <= 1.5);
  }
  for (const auto& m : a.quad) {
    CHECK(m.alpha >= 0.5);
    CHECK(m.alpha <= 1.5);
  }

  const auto other = build_random(1, arch);
  CHECK(other.layers[0].W != a.layers[0].W);

  const auto exp2 = build_random(0, Architecture::uniform(10, 32, 3, 2, 10, 2, 10));
  CHECK(exp2.input_dim == 10);
  CHECK(exp2.depth() == 3);
  CHECK(exp2.quad[1].B.rows() == 10);
}

TEST_CASE("build_random rejects empty descriptors") {
  CHECK_THROWS_AS(build_random(0, Architecture::uniform(0, 4, 2, 1, 2, 1, 2)), Error);
  CHECK_THROWS_AS(build_random(0, Architecture::uniform(3, 0, 2, 1, 2, 1, 2)), Error);
  CHECK_THROWS_AS(build_random(0, Architecture::uniform(3, 4, 0, 1, 2, 1, 2)), Error);
  CHECK_THROWS_AS(build_random(0, Architecture::uniform(3, 4, 2, 1, 0, 1, 2)), Error);
}

TEST_CASE("forward closed forms") {
  SUBCASE("constant network") {
    auto p = fixtures::empty_net(3);
    p.b0 = 3.5;
    auto rng = derived_rng(0, 0);
    for (int k = 0; k < 5; ++k) CHECK(evaluate(p, gaussian_vector(rng, 3)) == 3.5);
  }
  SUBCASE("squared norm") {
    CHECK(evaluate(fixtures::quadratic_only(2), Vector::Ones(2)) == doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("activations are exact ReLUs of the preactivations") {
    const auto p = build_random(2, fixtures::small_arch());
    const auto t = forward(p, Vector::LinSpaced(4, -1.0, 1.0));
    for (std::size_t l = 0; l < t.pre.size(); ++l) CHECK(t.act[l] == t.pre[l].cwiseMax(0.0));
  }
  SUBCASE("non-finite input") {
    Vector x = Vector::Zero(4);
    x(2) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(forward(build_random(0, fixtures::small_arch()), x), Error);
  }
  SUBCASE("wrong input dimension") {
    CHECK_THROWS_AS(forward(build_random(0, fixtures::small_arch()), Vector::Zero(3)), Error);
  }
}

TEST_CASE("forward value decomposes into backbone, quadratic and conic terms") {
  const auto p = build_random(7, fixtures::small_arch());
  auto rng = derived_rng(7, 1);
  for (int k = 0; k < 50; ++k) {
    const auto t = forward(p, gaussian_vector(rng, 4));
    const double backbone = p.c.dot(t.act.back()) + p.v.dot(t.x) + p.b0;
    double modules = 0.0;
    for (std::size_t h = 0; h < p.quad.size(); ++h) modules += 0.5 * p.quad[h].alpha * t.quad_res[h].squaredNorm();
    for (std::size_t g = 0; g < p.cone.size(); ++g) modules += p.cone[g].lambda * t.cone_res[g].norm();
    CHECK(std::abs(t.relu_value - backbone) <= 1e-12 * (1.0 + std::abs(backbone)));
    CHECK(std::abs((t.value - backbone) - modules) <= 1e-12 * (1.0 + std::abs(t.value)));
  }
}

TEST_CASE("forward is deterministic") {
  const auto p = build_random(3, fixtures::small_arch());
  const Vector x = Vector::LinSpaced(4, -0.7, 0.9);
  const auto a = forward(p, x);
  const auto b = forward(p, x);
  CHECK(a.value == b.value);
  for (std::size_t l = 0; l < a.pre.size(); ++l) CHECK(a.pre[l] == b.pre[l]);
}

TEST_CASE("random networks are convex") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto p = build_random(seed, fixtures::small_arch());
    const auto r = oracle::convexity_probe([&p](const Vector& x) { return evaluate(p, x); }, 4, 1000, seed);
    CHECK(r.max_relative_violation <= 1e-10);
  }
}

TEST_CASE("a negative U entry can break convexity") {
  // z1 = relu(x), z2 = relu(1 - 2 z1): slope 0 for x < 0, then -2, a concave kink at 0.
  SocIcnnParams p;
  p.input_dim = 1;
  p.layers.push_back({Matrix::Ones(1, 1), Matrix::Zero(1, 0), Vector::Zero(1)});
  p.layers.push_back({Matrix::Zero(1, 1), Matrix::Constant(1, 1, -2.0), Vector::Ones(1)});
  p.c = Vector::Ones(1);
  p.v = Vector::Zero(1);
  CHECK(error_of(p) == ErrorCode::Negativity);
  const auto r = oracle::convexity_probe([&p](const Vector& x) { return evaluate(p, x); }, 1, 500, 0);
  CHECK(r.max_violation > 0.0);
}

TEST_CASE("build_degenerate_2d") {
  const auto inst = build_degenerate_2d();
  const auto& p = inst.params;
  CHECK(validate(p).ok());
  CHECK(p.input_dim == 2);

  const auto t = forward(p, inst.x0);
  SUBCASE("exactly one zero preactivation and one vanishing residual") {
    const auto exact = degeneracy_report(t, 0.0);
    REQUIRE(exact.relu_zero.size() == 1);
    REQUIRE(exact.cone_zero.size() == 1);
    CHECK(exact.relu_zero[0] == ReluCoord{0, 0});
    CHECK(exact.cone_zero[0] == 0);
    CHECK(t.pre[0](0) == 0.0);
    CHECK(t.cone_res[0] == Vector::Zero(t.cone_res[0].size()));

    const auto loose = degeneracy_report(t, 1e-9);
    CHECK(loose.relu_zero.size() == 1);
    CHECK(loose.cone_zero.size() == 1);
  }
  SUBCASE("everything else is at least 0.1 from its kink") {
    for (std::size_t l = 0; l < t.pre.size(); ++l)
      for (Eigen::Index i = 0; i < t.pre[l].size(); ++i)
        if (!(l == 0 && i == 0)) CHECK(std::abs(t.pre[l](i)) >= 0.1);
    for (std::size_t g = 1; g < t.cone_res.size(); ++g) CHECK(t.cone_res[g].norm() >= 0.1);
  }
  SUBCASE("nearby point is nondegenerate") {
    Vector shifted = inst.x0;
    shifted.array() += 0.5;
    CHECK(degeneracy_report(forward(p, shifted), 1e-9).nondegenerate());
  }
  SUBCASE("other placements") {
    const auto other = build_degenerate_2d({1, 2, 1, 5});
    const auto r = degeneracy_report(forward(other.params, other.x0), 0.0);
    REQUIRE(r.relu_zero.size() == 1);
    CHECK(r.relu_zero[0] == ReluCoord{1, 2});
    REQUIRE(r.cone_zero.size() == 1);
    CHECK(r.cone_zero[0] == 1);
  }
}

TEST_CASE("degeneracy_report tolerance") {
  const auto p = build_random(0, fixtures::small_arch());
  const auto t = forward(p, Vector::LinSpaced(4, 0.2, -0.4));
  CHECK(degeneracy_report(t, 1e-9).nondegenerate());
  const auto all = degeneracy_report(t, 1e300);
  CHECK(all.relu_zero.size() == p.relu_units());
  CHECK(all.cone_zero.size() == p.cone.size());
}

TEST_CASE("Gaussian inputs are nondegenerate under the default initialization") {
  const auto p = build_random(0, Architecture::uniform(20, 64, 4, 2, 20, 2, 20));
  auto rng = derived_rng(0, 11);
  for (int k = 0; k < 250; ++k) CHECK(degeneracy_report(forward(p, gaussian_vector(rng, 20))).nondegenerate());
}

TEST_CASE("canonical dual value reproduces the forward value") {
  const auto p = build_random(0, fixtures::small_arch());
  auto rng = derived_rng(0, 2);
  for (int k = 0; k < 100; ++k) {
    const auto t = forward(p, gaussian_vector(rng, 4));
    CHECK(std::abs(psi(p, t.x, canonical(p, t)) - t.value) <= 1e-12 * std::max(1.0, std::abs(t.value)));
  }
}
