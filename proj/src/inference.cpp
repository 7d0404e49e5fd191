#include "socicnn/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <memory>

#include "socicnn/curvature.hpp"
#include "socicnn/dual.hpp"
#include "socicnn/oracle.hpp"

namespace socicnn {

void InferenceConfig::validate() const {
  auto bad = [](const char* what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (!(beta > 0.0)) bad("beta must be positive");
  if (!(damping > 0.0)) bad("damping must be positive");
  if (!(armijo > 0.0 && armijo < 1.0)) bad("armijo constant must lie in (0, 1)");
  if (!(shrink > 0.0 && shrink < 1.0)) bad("shrink factor must lie in (0, 1)");
  if (max_backtracks < 0) bad("max_backtracks must be nonnegative");
  if (gd_max_iterations < 0 || newton_max_iterations < 0) bad("iteration limits must be nonnegative");
  if (!(grad_tol >= 0.0) || !(progress_tol >= 0.0) || !(tol >= 0.0) ||
      !(kink_radius >= 0.0))
    bad("tolerances must be nonnegative");
  if (max_kink_coords > kMaxFreeCoords) bad("max_kink_coords is too large");
}

std::string_view method_name(Method method) {
  switch (method) {
    case Method::WhiteboxGd: return "whitebox-gd";
    case Method::WhiteboxNewton: return "whitebox-newton";
    case Method::FdGd: return "fd-gd";
    case Method::FdNewton: return "fd-newton";
  }
  return "unknown";
}

ObjectiveValue objective(const SocIcnnParams& params, const Vector& y, double beta, const Vector& x,
                         double tol) {
  const auto trace = forward(params, x);
  ObjectiveValue out;
  const Vector shift = x - y;
  out.value = trace.value + 0.5 * beta * shift.squaredNorm();
  out.gradient = readout(params, canonical(params, trace, tol));
  out.gradient.noalias() += beta * shift;
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

/// One affine minorant of F around x: F(x + d) >= F(x) + offset + slope.d - O(|d|^2) curvature.
struct Piece {
  double offset = 0.0;  // <= 0; zero for pieces active at x
  Vector slope;
};

/// Derivative information for one method; `hessian` is empty for first-order methods.
/// `bundle`, when set, lists the pieces of F whose kink lies within the configured radius of x
/// (the active piece first); steps then follow the piecewise model instead of one gradient.
struct DerivativeSource {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
  std::function<std::vector<Piece>(const Vector&)> bundle;
  std::function<void(const Vector&)> remember;  // adds a rejected trial point to the bundle
  bool exact_hessian = false;
  std::function<bool(const Vector&)> degenerate;
};

/// Aggregate of a bundle under metric M: the maximizer over the simplex of
/// sum_k w_k offset_k - 1/2 |sum_k w_k slope_k|^2_{M^-1}, solved by pairwise Frank-Wolfe.
/// The step -M^-1 slope minimizes max_k (offset_k + slope_k.d) + 1/2 d'Md.
struct Aggregate {
  double offset = 0.0;
  Vector slope;
};

Aggregate aggregate(const std::vector<Piece>& pieces, const Eigen::LLT<Matrix>* metric) {
  const auto n = static_cast<Eigen::Index>(pieces.size());
  if (n == 1) return {pieces.front().offset, pieces.front().slope};
  std::vector<Vector> scaled;
  scaled.reserve(pieces.size());
  for (const auto& piece : pieces)
    scaled.push_back(metric ? Vector(metric->matrixL().solve(piece.slope)) : piece.slope);
  Matrix gram(n, n);
  Vector offsets(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    offsets(i) = pieces[i].offset;
    for (Eigen::Index j = 0; j <= i; ++j) gram(i, j) = gram(j, i) = scaled[i].dot(scaled[j]);
  }
  Vector w = Vector::Zero(n);
  w(0) = 1.0;
  Vector grad = gram.col(0) - offsets;  // gradient of 1/2 w'Gw - offsets.w
  for (int it = 0; it < 5000; ++it) {
    Eigen::Index toward = 0;
    grad.minCoeff(&toward);
    Eigen::Index away = -1;
    for (Eigen::Index k = 0; k < n; ++k)
      if (w(k) > 0.0 && (away < 0 || grad(k) > grad(away))) away = k;
    const double gap = grad(away) - grad(toward);
    if (gap <= 1e-14 * std::max(1.0, w.dot(gram * w))) break;
    const double curvature = gram(toward, toward) - 2.0 * gram(toward, away) + gram(away, away);
    const double gamma = curvature > 0.0 ? std::min(w(away), gap / curvature) : w(away);
    if (!(gamma > 0.0)) break;
    w(toward) += gamma;
    w(away) -= gamma;
    grad += gamma * (gram.col(toward) - gram.col(away));
  }
  Aggregate out{0.0, Vector::Zero(pieces.front().slope.size())};
  for (Eigen::Index k = 0; k < n; ++k) {
    if (w(k) == 0.0) continue;
    out.offset += w(k) * pieces[k].offset;
    out.slope += w(k) * pieces[k].slope;
  }
  return out;
}

InferenceReport descend(Method method, const DerivativeSource& src, const Vector& start,
                        int max_iterations, const InferenceConfig& config) {
  const auto t0 = Clock::now();
  InferenceReport report;
  report.method = method;

  Vector x = start;
  double fx = src.value(x);
  std::vector<Piece> pieces;
  // Euclidean aggregate at x; for a plain source this is just the gradient.
  auto first_order = [&](const Vector& at) -> Aggregate {
    const auto s = Clock::now();
    Aggregate out;
    if (src.bundle) {
      pieces = src.bundle(at);
      out = aggregate(pieces, nullptr);
    } else {
      out.slope = src.gradient(at);
    }
    report.derivative_time_ms += elapsed_ms(s);
    return out;
  };
  // Stationary once the aggregate slope is small and its pieces are (nearly) active at x.
  auto converged = [&](const Aggregate& a) {
    return a.slope.norm() <= config.grad_tol && -a.offset <= config.grad_tol * config.grad_tol;
  };

  Aggregate agg = first_order(x);
  report.trace.push_back({fx, agg.slope.norm(), x});
  constexpr int kMaxNullSteps = 5;
  constexpr double kKinkStep = 1.0 / 256.0;
  int null_steps = 0;

  for (int k = 0; k < max_iterations; ++k) {
    if (converged(agg)) break;

    Aggregate step_agg = agg;
    Vector direction = -agg.slope;
    if (src.hessian) {
      if (src.degenerate && src.degenerate(x)) ++report.degenerate_iterates;
      const auto s = Clock::now();
      Matrix system = src.hessian(x);
      system.diagonal().array() += config.damping;
      Eigen::LLT<Matrix> llt(system);
      if (llt.info() == Eigen::Success) {
        if (src.bundle) step_agg = aggregate(pieces, &llt);
        direction = llt.solve(-step_agg.slope);
      } else if (src.exact_hessian) {
        throw Error(ErrorCode::SolveFailure, "Newton system is not positive definite");
      }
      report.derivative_time_ms += elapsed_ms(s);
    }
    // Predicted decrease of the piecewise-linear part of the model along the full step.
    double slope = step_agg.offset + step_agg.slope.dot(direction);
    if (!(slope < 0.0)) {
      step_agg = agg;
      direction = -agg.slope;
      slope = agg.offset - agg.slope.squaredNorm();
    }

    double step = 1.0;
    bool accepted = false;
    Vector candidate;
    double f_candidate = fx;
    for (int bt = 0; bt <= config.max_backtracks; ++bt) {
      candidate = x + step * direction;
      f_candidate = src.value(candidate);
      if (f_candidate <= fx + config.armijo * step * slope) {
        accepted = true;
        break;
      }
      if (bt == config.max_backtracks) break;
      step *= config.shrink;
      ++report.backtracks;
    }
    if (!accepted) {
      // Null step: the model missed a kink along the direction; learn the trial points and retry.
      if (src.remember && null_steps < kMaxNullSteps) {
        ++null_steps;
        src.remember(x + direction);
        src.remember(candidate);
        agg = first_order(x);
        ++report.iterations;
        report.trace.push_back({fx, agg.slope.norm(), x});
        continue;
      }
      report.line_search_failed = true;
      break;
    }

    const double progress = fx - f_candidate;
    // A collapsed step length hints at a kink just past the accepted point.
    if (src.remember && step < kKinkStep) src.remember(x + (step / config.shrink) * direction);
    x = std::move(candidate);
    fx = f_candidate;
    agg = first_order(x);
    ++report.iterations;
    report.trace.push_back({fx, agg.slope.norm(), x});
    if (progress <= config.progress_tol * std::max(1.0, std::abs(fx))) {
      if (!src.remember || null_steps >= kMaxNullSteps) break;
      ++null_steps;
      src.remember(x + (1.0 - step) * direction);
      agg = first_order(x);
    } else {
      null_steps = 0;
    }
  }

  report.x = x;
  report.objective = fx;
  report.grad_norm = agg.slope.norm();
  report.time_ms = elapsed_ms(t0);
  return report;
}

std::function<double(const Vector&)> objective_value(const SocIcnnParams& params, const Vector& y,
                                                     double beta) {
  return [&params, y, beta](const Vector& x) {
    return evaluate(params, x) + 0.5 * beta * (x - y).squaredNorm();
  };
}

DerivativeSource whitebox_source(const SocIcnnParams& params, const Vector& y,
                                 const InferenceConfig& config, bool second_order) {
  DerivativeSource src;
  src.value = objective_value(params, y, config.beta);
  src.gradient = [&params, y, beta = config.beta, tol = config.tol](const Vector& x) {
    return objective(params, y, beta, x, tol).gradient;
  };
  if (second_order) {
    src.exact_hessian = true;
    src.hessian = [&params, beta = config.beta, tol = config.tol](const Vector& x) {
      Matrix h = soc_hessian(params, forward(params, x), tol);
      h.diagonal().array() += beta;
      return h;
    };
    src.degenerate = [&params, tol = config.tol](const Vector& x) {
      return !degeneracy_report(forward(params, x), tol).nondegenerate();
    };
  }
  if (config.kink_radius > 0.0) {
    src.bundle = [&params, y, config](const Vector& x) {
      const auto trace = forward(params, x);
      double radius = config.kink_radius;
      while (radius > config.tol && branch_box(params, trace, radius).free_count() > config.max_kink_coords)
        radius = std::max(config.tol, 0.1 * radius);
      const Vector shift = config.beta * (x - y);
      std::vector<Piece> pieces{{0.0, readout(params, canonical(params, trace, config.tol)) + shift}};
      if (radius <= config.tol || degeneracy_report(trace, radius).nondegenerate()) return pieces;
      for (const auto& branch : extreme_branches(params, trace, radius, 0, 0))
        pieces.push_back({std::min(0.0, psi(params, x, branch) - trace.value),
                          readout(params, branch) + shift});
      return pieces;
    };
  }
  return src;
}

DerivativeSource fd_source(const SocIcnnParams& params, const Vector& y,
                           const InferenceConfig& config, bool second_order) {
  DerivativeSource src;
  src.value = objective_value(params, y, config.beta);
  auto value = src.value;
  src.gradient = [value](const Vector& x) { return oracle::fd_gradient(value, x); };
  if (second_order) {
    auto gradient = src.gradient;
    src.hessian = [gradient](const Vector& x) { return oracle::fd_hessian(gradient, x); };
  }
  if (config.kink_radius > 0.0) {
    // Without access to the dual pieces, reuse linearizations at recent iterates within the radius.
    // The memory only enters the step after a null step has signalled a kink, so smooth problems
    // take plain gradient steps.
    struct Sample {
      Vector z;
      double fz;
      Vector g;
    };
    auto memory = std::make_shared<std::deque<Sample>>();
    auto active = std::make_shared<bool>(false);
    const std::size_t capacity = 4 * static_cast<std::size_t>(params.input_dim);
    auto record = [value, memory, capacity](const Vector& z) {
      if (!memory->empty() && memory->front().z == z) return;
      memory->push_front({z, value(z), oracle::fd_gradient(value, z)});
      if (memory->size() > capacity) memory->pop_back();
    };
    src.remember = [record, active](const Vector& z) {
      *active = true;
      record(z);
    };
    src.bundle = [memory, active, record, radius = config.kink_radius](const Vector& x) {
      record(x);
      std::vector<Piece> pieces{{0.0, memory->front().g}};
      if (!*active) return pieces;
      const double fx = memory->front().fz;
      for (const auto& s : *memory)
        if (s.z != x && (s.z - x).norm() <= radius)
          pieces.push_back({std::min(0.0, s.fz + s.g.dot(x - s.z) - fx), s.g});
      return pieces;
    };
  }
  return src;
}

void check_query(const SocIcnnParams& params, const Vector& y, const InferenceConfig& config) {
  config.validate();
  if (y.size() != params.input_dim) throw Error(ErrorCode::DimensionMismatch, "query has wrong dimension");
}

}  // namespace

InferenceReport whitebox_gd(const SocIcnnParams& params, const Vector& y,
                            const InferenceConfig& config) {
  check_query(params, y, config);
  return descend(Method::WhiteboxGd, whitebox_source(params, y, config, false), y,
                 config.gd_max_iterations, config);
}

InferenceReport whitebox_newton(const SocIcnnParams& params, const Vector& y,
                                const InferenceConfig& config) {
  check_query(params, y, config);
  return descend(Method::WhiteboxNewton, whitebox_source(params, y, config, true), y,
                 config.newton_max_iterations, config);
}

InferenceReport baseline_fd_gd(const SocIcnnParams& params, const Vector& y,
                               const InferenceConfig& config) {
  check_query(params, y, config);
  return descend(Method::FdGd, fd_source(params, y, config, false), y, config.gd_max_iterations,
                 config);
}

InferenceReport baseline_fd_newton(const SocIcnnParams& params, const Vector& y,
                                   const InferenceConfig& config) {
  check_query(params, y, config);
  return descend(Method::FdNewton, fd_source(params, y, config, true), y,
                 config.newton_max_iterations, config);
}

InferenceReport run_inference(Method method, const SocIcnnParams& params, const Vector& y,
                              const InferenceConfig& config) {
  switch (method) {
    case Method::WhiteboxGd: return whitebox_gd(params, y, config);
    case Method::WhiteboxNewton: return whitebox_newton(params, y, config);
    case Method::FdGd: return baseline_fd_gd(params, y, config);
    case Method::FdNewton: return baseline_fd_newton(params, y, config);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown method");
}

void assign_gaps(std::vector<InferenceReport>& runs) {
  if (runs.empty()) return;
  double best = runs.front().objective;
  for (const auto& r : runs) best = std::min(best, r.objective);
  for (auto& r : runs) r.gap_to_best = r.objective - best;
}

ReadoutDiagnostics readout_diagnostics(const SocIcnnParams& params, const Vector& x, double tol) {
  const auto trace = forward(params, x);
  if (!degeneracy_report(trace, tol).nondegenerate())
    throw Error(ErrorCode::DegenerateInput, "diagnostics need a nondegenerate solution");
  ReadoutDiagnostics out;
  const Vector dual = readout(params, canonical(params, trace, tol));
  out.gradient_error = (dual - local_branch_gradient(params, x, tol)).norm();
  const Matrix formula = soc_hessian(params, trace, tol);
  const Matrix fd = oracle::fd_hessian(
      [&params, tol](const Vector& at) { return readout(params, canonical(params, forward(params, at), tol)); },
      x);
  out.hessian_error = (formula - fd).norm();
  const auto margins = branch_margins(trace);
  out.min_relu_margin = margins.relu;
  out.min_cone_norm = margins.cone;
  return out;
}

}  // namespace socicnn
