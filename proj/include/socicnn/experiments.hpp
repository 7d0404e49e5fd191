#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "socicnn/inference.hpp"
#include "socicnn/model.hpp"
#include "socicnn/table.hpp"

// Reproducible experiment drivers. Each run_expN is deterministic given its config except for
// the columns a Table marks as timing columns.

namespace socicnn::experiments {

/// Readout vs frozen-branch gradient (and vs central differences) on Gaussian inputs.
struct Exp1Config {
  std::uint64_t seed = 0;
  std::size_t samples = 250;
  Architecture arch = Architecture::uniform(20, 64, 4, 2, 20, 2, 20);
  double tol = kDefaultDegeneracyTol;
  double fd_step = 1e-6;
};

struct GradientComparison {
  double mean_l2_err = 0.0;
  double mean_rel_err = 0.0;
  double mean_cosine = 0.0;
  double min_cosine = 0.0;
};

struct Exp1Result {
  std::size_t trials = 0;
  std::size_t retained = 0;
  double retained_rate = 0.0;
  GradientComparison exact;  // vs frozen-branch gradient
  GradientComparison fd;     // vs central differences
  double runtime_ms = 0.0;
  Table table;
};

Exp1Result run_exp1(const Exp1Config& config);

/// Closed-form Hessian vs FD of the gradient, and the local quadratic model.
struct Exp2Config {
  std::uint64_t seed = 0;
  Architecture arch = Architecture::uniform(10, 32, 3, 2, 10, 2, 10);
  std::size_t samples = 100;
  std::size_t max_draws = 100000;
  double min_branch_margin = 1e-3;  // points closer than this to a kink are redrawn
  std::size_t perturbations = 500;
  std::vector<double> radii{1e-4, 3e-4, 1e-3};
  double tol = kDefaultDegeneracyTol;
  double fd_step = 1e-5;
};

struct RadiusFit {
  double radius = 0.0;
  double retained_rate = 0.0;
  double mean_residual = 0.0;
};

struct Exp2Result {
  std::size_t trials = 0;
  std::size_t draws = 0;
  double grad_l2_err = 0.0;
  double grad_rel_err = 0.0;
  double hess_fro_err = 0.0;
  double hess_rel_err = 0.0;
  double max_hess_fro_err = 0.0;
  double mean_min_eig_formula = 0.0;
  double mean_min_eig_fd = 0.0;
  double worst_min_eig_formula = 0.0;
  double max_asymmetry = 0.0;
  Vector anchor;
  std::vector<RadiusFit> radius_fits;
  double runtime_ms = 0.0;
  Table formula_table;
  Table quadratic_table;
};

Exp2Result run_exp2(const Exp2Config& config);

/// Set-valued first-order geometry at the constructed degenerate point.
struct Exp3Config {
  std::uint64_t seed = 0;
  DegenerateSpec degeneracy{};
  std::size_t directions = 1000;
  std::size_t branches = 5000;
  std::size_t probes = 5000;
  double probe_scale = 1.0;
  double fd_step = 1e-7;
  std::size_t sphere_samples = 64;
  double tol = kDefaultDegeneracyTol;
};

struct Exp3Result {
  std::size_t directions = 0;
  double fd_mean_err = 0.0;
  double fd_max_err = 0.0;
  double exact_mean_err = 0.0;
  double exact_max_err = 0.0;
  double canonical_gap_frac = 0.0;
  double max_violation = 0.0;       // clamped at 0
  double raw_max_violation = 0.0;   // unclamped max of readout(xi).d - dual_max
  double min_support_margin = 0.0;  // canonical subgradient
  double min_sampled_support_margin = 0.0;
  double max_optimality_gap = 0.0;  // max |psi(x0; xi) - f(x0)| / (1 + |f(x0)|) over sampled branches
  double min_norm_excess = 0.0;     // min over sampled branches of ||xi|| - ||canonical||
  std::size_t min_norm_ties = 0;    // sampled branches not strictly longer than canonical
  std::size_t relu_degeneracies = 0;
  std::size_t cone_degeneracies = 0;
  double runtime_ms = 0.0;
  Table table;
};

Exp3Result run_exp3(const Exp3Config& config);

/// White-box vs finite-difference inference on random queries.
inline constexpr double kDiagnosticMargin = 1e-4;

struct Exp4Config {
  std::uint64_t seed = 0;
  Architecture arch = Architecture::uniform(10, 32, 3, 1, 8, 2, 8);
  std::size_t queries = 30;
  double query_scale = 1.0;
  InferenceConfig inference{};
};

struct MethodSummary {
  Method method = Method::WhiteboxGd;
  double gap_to_best = 0.0;
  double grad_norm = 0.0;
  double iterations = 0.0;
  double time_ms = 0.0;
  double derivative_time_ms = 0.0;
  double backtracks = 0.0;
  std::size_t line_search_failures = 0;
  std::size_t degenerate_iterates = 0;
};

struct Exp4Result {
  std::vector<MethodSummary> summaries;  // order: whitebox-gd, whitebox-newton, fd-gd, fd-newton
  std::vector<std::vector<InferenceReport>> runs;  // [query][method]
  double max_gd_objective_diff = 0.0;      // |whitebox-gd - fd-gd| over queries
  double max_newton_objective_diff = 0.0;  // |whitebox-newton - fd-newton|
  double max_newton_gd_rel_diff = 0.0;     // |newton - gd| / (1 + |gd|), whitebox
  ReadoutDiagnostics mean_diagnostics{};
  double mean_relative_gradient_error = 0.0;
  double mean_relative_hessian_error = 0.0;
  std::size_t diagnosed = 0;              // queries with a Newton iterate clear of every kink
  std::size_t diagnosed_at_solution = 0;  // ... where that iterate is the final one
  double runtime_ms = 0.0;
  Table method_table;
  Table diagnostics_table;
  Table query_table;
};

Exp4Result run_exp4(const Exp4Config& config);

const MethodSummary& summary_for(const Exp4Result& result, Method method);

/// Config parsing from JSON documents; unknown keys are rejected with InvalidConfig.
Exp1Config exp1_config_from_json(const nlohmann::json& doc, Exp1Config base = {});
Exp2Config exp2_config_from_json(const nlohmann::json& doc, Exp2Config base = {});
Exp3Config exp3_config_from_json(const nlohmann::json& doc, Exp3Config base = {});
Exp4Config exp4_config_from_json(const nlohmann::json& doc, Exp4Config base = {});

}  // namespace socicnn::experiments
