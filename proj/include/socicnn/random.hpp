#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace socicnn {

/// Independent stream for item `index` of a seeded batch.
inline std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

inline Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = scale * normal(rng);
  return out;
}

/// Uniform on the unit sphere in R^n.
inline Eigen::VectorXd unit_direction(std::mt19937_64& rng, Eigen::Index n) {
  for (;;) {
    Eigen::VectorXd g = gaussian_vector(rng, n);
    const double norm = g.norm();
    if (norm > 0.0) return g / norm;
  }
}

/// Uniform in the closed ball of the given radius in R^n.
inline Eigen::VectorXd uniform_ball(std::mt19937_64& rng, Eigen::Index n, double radius) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Eigen::VectorXd dir = unit_direction(rng, n);
  return radius * std::pow(uniform(rng), 1.0 / static_cast<double>(n)) * dir;
}

}  // namespace socicnn

namespace socicnn {

/// Stream `index` of the sub-batch named by `tag`, independent across tags.
inline std::mt19937_64 tagged_rng(std::uint64_t seed, std::uint32_t tag, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag,
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace socicnn
