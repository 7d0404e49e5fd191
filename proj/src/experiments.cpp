#include "socicnn/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "socicnn/curvature.hpp"
#include "socicnn/dual.hpp"
#include "socicnn/geometry.hpp"
#include "socicnn/oracle.hpp"
#include "socicnn/random.hpp"

namespace socicnn::experiments {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Stream tags; keep distinct so inputs, probes and directions never share draws.
constexpr std::uint32_t kInputStream = 1;
constexpr std::uint32_t kDirectionStream = 2;
constexpr std::uint32_t kProbeStream = 3;
constexpr std::uint32_t kQueryStream = 4;

Vector gaussian_input(std::uint64_t seed, std::uint32_t tag, std::uint64_t index,
                      Eigen::Index dim, double scale = 1.0) {
  auto rng = tagged_rng(seed, tag, index);
  return gaussian_vector(rng, dim, scale);
}

struct GradientAccumulator {
  double l2 = 0.0, rel = 0.0, cosine = 0.0;
  double min_cosine = std::numeric_limits<double>::infinity();
  std::size_t n = 0;

  void add(const Vector& candidate, const Vector& reference) {
    const double err = (candidate - reference).norm();
    l2 += err;
    rel += err / reference.norm();
    const double cos = candidate.dot(reference) / (candidate.norm() * reference.norm());
    cosine += cos;
    min_cosine = std::min(min_cosine, cos);
    ++n;
  }

  GradientComparison finish() const {
    if (n == 0) return {};
    const double k = static_cast<double>(n);
    return {l2 / k, rel / k, cosine / k, min_cosine};
  }
};

}  // namespace

Exp1Result run_exp1(const Exp1Config& config) {
  const auto params = build_random(config.seed, config.arch);
  const auto f = [&params](const Vector& x) { return evaluate(params, x); };

  Exp1Result result;
  result.trials = config.samples;
  GradientAccumulator exact, fd;
  for (std::size_t k = 0; k < config.samples; ++k) {
    const Vector x = gaussian_input(config.seed, kInputStream, k, params.input_dim);
    const auto t0 = Clock::now();
    const auto trace = forward(params, x);
    if (!degeneracy_report(trace, config.tol).nondegenerate()) continue;
    const Vector g = readout(params, canonical(params, trace, config.tol));
    result.runtime_ms += elapsed_ms(t0);
    ++result.retained;
    exact.add(g, local_branch_gradient(params, x, config.tol));
    fd.add(g, oracle::fd_gradient(f, x, config.fd_step));
  }
  if (result.trials > 0)
    result.retained_rate = static_cast<double>(result.retained) / static_cast<double>(result.trials);
  result.exact = exact.finish();
  result.fd = fd.finish();

  auto& t = result.table;
  t.name = "exp1_exact_readout";
  t.columns = {"reference", "trials", "retained_rate", "grad_l2_err",
               "grad_rel_err", "cosine_sim", "runtime_ms"};
  t.timing_columns = {"runtime_ms"};
  if (result.trials > 0) {
    const auto trials = static_cast<std::int64_t>(result.trials);
    t.add_row({std::string("local-branch"), trials, result.retained_rate, result.exact.mean_l2_err,
               result.exact.mean_rel_err, result.exact.mean_cosine, result.runtime_ms});
    t.add_row({std::string("finite-difference"), trials, result.retained_rate, result.fd.mean_l2_err,
               result.fd.mean_rel_err, result.fd.mean_cosine, result.runtime_ms});
  }
  return result;
}

Exp2Result run_exp2(const Exp2Config& config) {
  const auto start = Clock::now();
  const auto params = build_random(config.seed, config.arch);
  const auto grad_field = [&params, tol = config.tol](const Vector& x) {
    return readout(params, canonical(params, forward(params, x), tol));
  };

  Exp2Result result;
  double best_margin = -1.0;
  double grad_l2 = 0, grad_rel = 0, hess = 0, hess_rel = 0, eig_formula = 0, eig_fd = 0;
  result.worst_min_eig_formula = std::numeric_limits<double>::infinity();
  while (result.trials < config.samples && result.draws < config.max_draws) {
    const Vector x = gaussian_input(config.seed, kInputStream, result.draws++, params.input_dim);
    const auto trace = forward(params, x);
    if (!degeneracy_report(trace, config.tol).nondegenerate()) continue;
    const auto margins = branch_margins(trace);
    const double margin = std::min(margins.relu, margins.cone);
    if (margin < config.min_branch_margin) continue;

    const auto model = hessian(params, x, config.tol);
    const Vector local = local_branch_gradient(params, x, config.tol);
    const double gerr = (model.gradient - local).norm();
    grad_l2 += gerr;
    grad_rel += gerr / local.norm();

    const Matrix raw = soc_hessian(params, trace, config.tol);
    result.max_asymmetry = std::max(result.max_asymmetry, (raw - raw.transpose()).cwiseAbs().maxCoeff());
    const Matrix fd = oracle::fd_hessian(grad_field, x, config.fd_step);
    const double herr = (model.hessian - fd).norm();
    hess += herr;
    hess_rel += herr / fd.norm();
    result.max_hess_fro_err = std::max(result.max_hess_fro_err, herr);
    eig_formula += model.min_eigenvalue;
    eig_fd += min_eigenvalue(fd);
    result.worst_min_eig_formula = std::min(result.worst_min_eig_formula, model.min_eigenvalue);

    if (margins.relu > best_margin) {
      best_margin = margins.relu;
      result.anchor = x;
    }
    ++result.trials;
  }
  if (result.trials > 0) {
    const double k = static_cast<double>(result.trials);
    result.grad_l2_err = grad_l2 / k;
    result.grad_rel_err = grad_rel / k;
    result.hess_fro_err = hess / k;
    result.hess_rel_err = hess_rel / k;
    result.mean_min_eig_formula = eig_formula / k;
    result.mean_min_eig_fd = eig_fd / k;
    for (double radius : config.radii) {
      const auto fit = quadratic_model_residual(params, result.anchor, radius, config.perturbations,
                                                config.tol, config.seed);
      result.radius_fits.push_back({radius, fit.retained_rate, fit.mean_abs_residual});
    }
  } else {
    result.worst_min_eig_formula = 0.0;
  }
  result.runtime_ms = elapsed_ms(start);

  auto& a = result.formula_table;
  a.name = "exp2_local_formula";
  a.columns = {"trials", "grad_l2_err", "grad_rel_err", "hess_fro_err",
               "hess_rel_err", "min_eig_formula", "min_eig_fd"};
  if (result.trials > 0)
    a.add_row({static_cast<std::int64_t>(result.trials), result.grad_l2_err, result.grad_rel_err,
               result.hess_fro_err, result.hess_rel_err, result.mean_min_eig_formula,
               result.mean_min_eig_fd});

  auto& b = result.quadratic_table;
  b.name = "exp2_local_quadratic";
  b.columns = {"radius", "retained_rate", "quad_approx_err"};
  for (const auto& fit : result.radius_fits) b.add_row({fit.radius, fit.retained_rate, fit.mean_residual});
  return result;
}

Exp3Result run_exp3(const Exp3Config& config) {
  const auto start = Clock::now();
  const auto inst = build_degenerate_2d(config.degeneracy);
  const auto& params = inst.params;
  const Vector& x0 = inst.x0;
  const auto trace = forward(params, x0);
  const double f0 = trace.value;
  const auto report = degeneracy_report(trace, config.tol);
  const auto f = [&params](const Vector& x) { return evaluate(params, x); };

  Exp3Result result;
  result.directions = config.directions;
  result.relu_degeneracies = report.relu_zero.size();
  result.cone_degeneracies = report.cone_zero.size();

  const auto branches = sample_optimal_branches(params, trace, config.tol, config.branches, config.seed);
  const DualBranch canon = canonical(params, trace, config.tol);
  const Vector g_canon = readout(params, canon);
  const double canon_norm = canon.norm();
  std::vector<Vector> readouts;
  readouts.reserve(branches.size());
  result.min_norm_excess = std::numeric_limits<double>::infinity();
  for (const auto& b : branches) {
    readouts.push_back(readout(params, b));
    result.max_optimality_gap =
        std::max(result.max_optimality_gap, std::abs(psi(params, x0, b) - f0) / (1.0 + std::abs(f0)));
    const double excess = b.norm() - canon_norm;
    result.min_norm_excess = std::min(result.min_norm_excess, excess);
    if (!(excess > 0.0)) ++result.min_norm_ties;
  }
  if (branches.empty()) result.min_norm_excess = 0.0;

  double fd_sum = 0.0, exact_sum = 0.0;
  std::size_t gapped = 0;
  result.raw_max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < config.directions; ++k) {
    auto rng = tagged_rng(config.seed, kDirectionStream, k);
    const Vector d = unit_direction(rng, params.input_dim);
    const auto dd = directional_derivative(params, x0, d, config.tol, config.sphere_samples, config.seed);
    const double fd = oracle::fd_directional(f, x0, d, config.fd_step);
    const double fd_err = std::abs(fd - dd.dual_max);
    const double exact_err = std::abs(dd.primal - dd.dual_max);
    fd_sum += fd_err;
    exact_sum += exact_err;
    result.fd_max_err = std::max(result.fd_max_err, fd_err);
    result.exact_max_err = std::max(result.exact_max_err, exact_err);
    if (dd.dual_max - dd.canonical_value > kCanonicalGapThreshold) ++gapped;
    for (const auto& g : readouts)
      result.raw_max_violation = std::max(result.raw_max_violation, g.dot(d) - dd.dual_max);
  }
  if (config.directions > 0) {
    const double n = static_cast<double>(config.directions);
    result.fd_mean_err = fd_sum / n;
    result.exact_mean_err = exact_sum / n;
    result.canonical_gap_frac = static_cast<double>(gapped) / n;
  }
  if (readouts.empty() || config.directions == 0) result.raw_max_violation = 0.0;
  result.max_violation = std::max(0.0, result.raw_max_violation);

  result.min_support_margin = std::numeric_limits<double>::infinity();
  result.min_sampled_support_margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < config.probes; ++k) {
    const Vector y = x0 + gaussian_input(config.seed, kProbeStream, k, params.input_dim, config.probe_scale);
    const double fy = evaluate(params, y);
    const Vector step = y - x0;
    result.min_support_margin = std::min(result.min_support_margin, fy - f0 - g_canon.dot(step));
    for (const auto& g : readouts)
      result.min_sampled_support_margin = std::min(result.min_sampled_support_margin, fy - f0 - g.dot(step));
  }
  if (config.probes == 0) result.min_support_margin = result.min_sampled_support_margin = 0.0;
  if (readouts.empty()) result.min_sampled_support_margin = result.min_support_margin;
  result.runtime_ms = elapsed_ms(start);

  auto& t = result.table;
  t.name = "exp3_degenerate_geometry";
  t.columns = {"directions", "fd_mean_err", "fd_max_err", "exact_mean_err", "exact_max_err",
               "canonical_gap_frac", "max_violation", "min_support_margin", "min_norm_excess"};
  t.add_row({static_cast<std::int64_t>(config.directions), result.fd_mean_err, result.fd_max_err,
             result.exact_mean_err, result.exact_max_err, result.canonical_gap_frac,
             result.max_violation, result.min_support_margin, result.min_norm_excess});
  return result;
}

const MethodSummary& summary_for(const Exp4Result& result, Method method) {
  for (const auto& s : result.summaries)
    if (s.method == method) return s;
  throw Error(ErrorCode::InvalidConfig, "method not run");
}

Exp4Result run_exp4(const Exp4Config& config) {
  const auto start = Clock::now();
  config.inference.validate();
  const auto params = build_random(config.seed, config.arch);
  constexpr Method kMethods[] = {Method::WhiteboxGd, Method::WhiteboxNewton, Method::FdGd,
                                 Method::FdNewton};

  Exp4Result result;
  for (auto m : kMethods) result.summaries.push_back({.method = m});

  auto& q = result.query_table;
  q.name = "exp4_queries";
  q.columns = {"method", "query_id", "gap", "grad_norm", "iters", "backtracks", "time_ms"};
  q.timing_columns = {"time_ms"};

  double rel_grad = 0.0, rel_hess = 0.0;
  for (std::size_t k = 0; k < config.queries; ++k) {
    const Vector y = gaussian_input(config.seed, kQueryStream, k, params.input_dim, config.query_scale);
    std::vector<InferenceReport> runs;
    for (auto m : kMethods) runs.push_back(run_inference(m, params, y, config.inference));
    assign_gaps(runs);
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& r = runs[i];
      auto& s = result.summaries[i];
      s.gap_to_best += r.gap_to_best;
      s.grad_norm += r.grad_norm;
      s.iterations += r.iterations;
      s.time_ms += r.time_ms;
      s.derivative_time_ms += r.derivative_time_ms;
      s.backtracks += r.backtracks;
      s.line_search_failures += r.line_search_failed ? 1 : 0;
      s.degenerate_iterates += static_cast<std::size_t>(r.degenerate_iterates);
      q.add_row({std::string(method_name(r.method)), static_cast<std::int64_t>(k), r.gap_to_best,
                 r.grad_norm, static_cast<std::int64_t>(r.iterations),
                 static_cast<std::int64_t>(r.backtracks), r.time_ms});
    }
    result.max_gd_objective_diff =
        std::max(result.max_gd_objective_diff, std::abs(runs[0].objective - runs[2].objective));
    result.max_newton_objective_diff =
        std::max(result.max_newton_objective_diff, std::abs(runs[1].objective - runs[3].objective));
    result.max_newton_gd_rel_diff =
        std::max(result.max_newton_gd_rel_diff,
                 std::abs(runs[1].objective - runs[0].objective) / (1.0 + std::abs(runs[0].objective)));

    // Newton solutions typically sit on a kink, where the FD Hessian straddles two pieces; use the
    // last Newton iterate that is clear of every kink by kDiagnosticMargin.
    const IterationRecord* point = nullptr;
    for (auto it = runs[1].trace.rbegin(); it != runs[1].trace.rend() && !point; ++it) {
      const auto margins = branch_margins(forward(params, it->x));
      if (std::min(margins.relu, margins.cone) >= kDiagnosticMargin) point = &*it;
    }
    if (point) {
      const Vector& solution = point->x;
      if (point == &runs[1].trace.back()) ++result.diagnosed_at_solution;
      const auto diag = readout_diagnostics(params, solution, config.inference.tol);
      auto& m = result.mean_diagnostics;
      m.gradient_error += diag.gradient_error;
      m.hessian_error += diag.hessian_error;
      m.min_relu_margin += diag.min_relu_margin;
      m.min_cone_norm += diag.min_cone_norm;
      const auto trace = forward(params, solution);
      rel_grad += diag.gradient_error / readout(params, canonical(params, trace, config.inference.tol)).norm();
      rel_hess += diag.hessian_error / soc_hessian(params, trace, config.inference.tol).norm();
      ++result.diagnosed;
    }
    result.runs.push_back(std::move(runs));
  }

  if (config.queries > 0) {
    const double n = static_cast<double>(config.queries);
    for (auto& s : result.summaries) {
      s.gap_to_best /= n;
      s.grad_norm /= n;
      s.iterations /= n;
      s.time_ms /= n;
      s.derivative_time_ms /= n;
      s.backtracks /= n;
    }
  }
  if (result.diagnosed > 0) {
    const double n = static_cast<double>(result.diagnosed);
    auto& m = result.mean_diagnostics;
    m.gradient_error /= n;
    m.hessian_error /= n;
    m.min_relu_margin /= n;
    m.min_cone_norm /= n;
    result.mean_relative_gradient_error = rel_grad / n;
    result.mean_relative_hessian_error = rel_hess / n;
  }
  result.runtime_ms = elapsed_ms(start);

  auto& a = result.method_table;
  a.name = "exp4_inference";
  a.columns = {"method", "gap_to_best", "grad_norm", "iters", "time_ms", "backtracks"};
  a.timing_columns = {"time_ms"};
  if (config.queries > 0)
    for (const auto& s : result.summaries)
      a.add_row({std::string(method_name(s.method)), s.gap_to_best, s.grad_norm, s.iterations,
                 s.time_ms, s.backtracks});

  auto& b = result.diagnostics_table;
  b.name = "exp4_readout_diagnostics";
  b.columns = {"diagnostic", "value"};
  if (result.diagnosed > 0) {
    const auto& m = result.mean_diagnostics;
    b.add_row({std::string("gradient_readout_error"), m.gradient_error});
    b.add_row({std::string("relative_gradient_readout_error"), result.mean_relative_gradient_error});
    b.add_row({std::string("hessian_readout_error"), m.hessian_error});
    b.add_row({std::string("relative_hessian_readout_error"), result.mean_relative_hessian_error});
    b.add_row({std::string("mean_min_relu_margin"), m.min_relu_margin});
    b.add_row({std::string("mean_min_conic_residual_norm"), m.min_cone_norm});
    b.add_row({std::string("diagnosed_points"), static_cast<std::int64_t>(result.diagnosed)});
    b.add_row({std::string("diagnosed_at_solution"), static_cast<std::int64_t>(result.diagnosed_at_solution)});
  }
  return result;
}

// ---- config parsing ----

namespace {

using nlohmann::json;

template <typename T>
void read(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

void reject_unknown(const json& doc, std::initializer_list<const char*> known) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
  }
}

Architecture arch_from_json(const json& doc, Architecture arch) {
  reject_unknown(doc, {"d0", "widths", "quad_dims", "cone_dims"});
  read(doc, "d0", arch.input_dim);
  read(doc, "widths", arch.widths);
  read(doc, "quad_dims", arch.quad_dims);
  read(doc, "cone_dims", arch.cone_dims);
  return arch;
}

template <typename Fn>
auto guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
}

}  // namespace

Exp1Config exp1_config_from_json(const json& doc, Exp1Config c) {
  return guarded([&] {
    reject_unknown(doc, {"seed", "samples", "arch", "tol", "fd_step"});
    read(doc, "seed", c.seed);
    read(doc, "samples", c.samples);
    if (doc.contains("arch")) c.arch = arch_from_json(doc.at("arch"), c.arch);
    read(doc, "tol", c.tol);
    read(doc, "fd_step", c.fd_step);
    return c;
  });
}

Exp2Config exp2_config_from_json(const json& doc, Exp2Config c) {
  return guarded([&] {
    reject_unknown(doc, {"seed", "samples", "arch", "tol", "fd_step", "max_draws",
                         "min_branch_margin", "perturbations", "radii"});
    read(doc, "seed", c.seed);
    read(doc, "samples", c.samples);
    if (doc.contains("arch")) c.arch = arch_from_json(doc.at("arch"), c.arch);
    read(doc, "tol", c.tol);
    read(doc, "fd_step", c.fd_step);
    read(doc, "max_draws", c.max_draws);
    read(doc, "min_branch_margin", c.min_branch_margin);
    read(doc, "perturbations", c.perturbations);
    read(doc, "radii", c.radii);
    return c;
  });
}

Exp3Config exp3_config_from_json(const json& doc, Exp3Config c) {
  return guarded([&] {
    reject_unknown(doc, {"seed", "directions", "branches", "probes", "probe_scale", "fd_step",
                         "sphere_samples", "tol", "degeneracy"});
    read(doc, "seed", c.seed);
    read(doc, "directions", c.directions);
    read(doc, "branches", c.branches);
    read(doc, "probes", c.probes);
    read(doc, "probe_scale", c.probe_scale);
    read(doc, "fd_step", c.fd_step);
    read(doc, "sphere_samples", c.sphere_samples);
    read(doc, "tol", c.tol);
    if (doc.contains("degeneracy")) {
      const auto& d = doc.at("degeneracy");
      reject_unknown(d, {"relu_layer", "relu_unit", "cone_module", "seed"});
      read(d, "relu_layer", c.degeneracy.relu_layer);
      read(d, "relu_unit", c.degeneracy.relu_unit);
      read(d, "cone_module", c.degeneracy.cone_module);
      read(d, "seed", c.degeneracy.seed);
    }
    return c;
  });
}

Exp4Config exp4_config_from_json(const json& doc, Exp4Config c) {
  return guarded([&] {
    reject_unknown(doc, {"seed", "arch", "queries", "query_scale", "inference"});
    read(doc, "seed", c.seed);
    if (doc.contains("arch")) c.arch = arch_from_json(doc.at("arch"), c.arch);
    read(doc, "queries", c.queries);
    read(doc, "query_scale", c.query_scale);
    if (doc.contains("inference")) {
      const auto& d = doc.at("inference");
      auto& inf = c.inference;
      reject_unknown(d, {"beta", "damping", "armijo", "shrink", "max_backtracks", "gd_max_iterations",
                         "newton_max_iterations", "grad_tol", "progress_tol", "tol", "kink_radius", "max_kink_coords"});
      read(d, "beta", inf.beta);
      read(d, "damping", inf.damping);
      read(d, "armijo", inf.armijo);
      read(d, "shrink", inf.shrink);
      read(d, "max_backtracks", inf.max_backtracks);
      read(d, "gd_max_iterations", inf.gd_max_iterations);
      read(d, "newton_max_iterations", inf.newton_max_iterations);
      read(d, "grad_tol", inf.grad_tol);
      read(d, "progress_tol", inf.progress_tol);
      read(d, "tol", inf.tol);
      read(d, "kink_radius", inf.kink_radius);
      read(d, "max_kink_coords", inf.max_kink_coords);
    }
    c.inference.validate();
    return c;
  });
}

}  // namespace socicnn::experiments
