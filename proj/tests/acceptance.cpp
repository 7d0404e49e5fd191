// Runs every acceptance criterion once and prints one PASS/FAIL line each.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "socicnn/dual.hpp"
#include "socicnn/experiments.hpp"
#include "socicnn/geometry.hpp"
#include "socicnn/oracle.hpp"
#include "socicnn/random.hpp"

using namespace socicnn;
namespace ex = socicnn::experiments;

namespace {

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  std::printf("%s %2d %-28s %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

struct PropertyResult {
  double convexity = 0.0;
  double support = 0.0;  // most negative f(y) - psi(y; xi), relative
  std::size_t branches = 0;
  double mixing = 0.0;
  double canonical = 0.0;
};

// Lower bound f(y) >= psi(y; xi) for every branch at `probes` points around x.
void support_check(const SocIcnnParams& p, const Vector& x, const std::vector<DualBranch>& branches,
                   std::size_t probes, std::uint64_t seed, PropertyResult& out) {
  auto rng = derived_rng(seed, 0);
  std::vector<std::pair<Vector, double>> ys;
  for (std::size_t k = 0; k < probes; ++k) {
    Vector y = x + gaussian_vector(rng, x.size());
    const double fy = evaluate(p, y);
    ys.emplace_back(std::move(y), fy);
  }
  for (const auto& branch : branches) {
    for (const auto& [y, fy] : ys)
      out.support = std::min(out.support, (fy - psi(p, y, branch)) / (1.0 + std::abs(fy)));
    ++out.branches;
  }
}

PropertyResult properties() {
  PropertyResult out;
  const auto arch = Architecture::uniform(20, 64, 4, 2, 20, 2, 20);
  for (std::uint64_t m = 0; m < 5; ++m) {
    const auto p = build_random(100 + m, arch);
    const auto probe = oracle::convexity_probe([&p](const Vector& x) { return evaluate(p, x); },
                                               arch.input_dim, 1000, 200 + m);
    out.convexity = std::max(out.convexity, probe.max_violation);
  }

  // Branches emitted at the constructed kink and at ordinary points.
  const auto inst = build_degenerate_2d();
  const auto& q = inst.params;
  const auto t = forward(q, inst.x0);
  std::vector<DualBranch> emitted{canonical(q, t)};
  for (auto& b : sample_optimal_branches(q, t, kDefaultDegeneracyTol, 500, 1)) emitted.push_back(std::move(b));
  for (auto& b : extreme_branches(q, t, kDefaultDegeneracyTol, 16, 2)) emitted.push_back(std::move(b));
  support_check(q, inst.x0, emitted, 100, 3, out);
  {
    const auto p = build_random(7, Architecture::uniform(10, 32, 3, 1, 8, 2, 8));
    auto rng = derived_rng(4, 0);
    for (int k = 0; k < 20; ++k) {
      const Vector x = gaussian_vector(rng, 10);
      support_check(p, x, {canonical(p, forward(p, x))}, 100, 5 + k, out);
    }
  }

  // Optimal sets factor over blocks: swapping blocks between optimal branches stays optimal.
  const auto a = sample_optimal_branches(q, t, kDefaultDegeneracyTol, 200, 6);
  const auto b = sample_optimal_branches(q, t, kDefaultDegeneracyTol, 200, 7);
  for (std::size_t k = 0; k < a.size(); ++k) {
    DualBranch mixed = a[k];
    mixed.r = b[b.size() - 1 - k].r;
    mixed.p = b[k].p;
    out.mixing = std::max(out.mixing, std::max(feasibility_violation(q, mixed), 0.0));
    out.mixing = std::max(out.mixing, rel(psi(q, inst.x0, mixed), t.value));
  }

  for (std::uint64_t m = 0; m < 10; ++m) {
    const auto p = build_random(300 + m, arch);
    auto rng = derived_rng(400 + m, 0);
    for (int k = 0; k < 100; ++k) {
      const Vector x = gaussian_vector(rng, arch.input_dim);
      const auto tr = forward(p, x);
      out.canonical = std::max(out.canonical, std::abs(psi(p, x, canonical(p, tr)) - tr.value) /
                                                  std::max(1.0, std::abs(tr.value)));
    }
  }
  return out;
}

}  // namespace

int main() {
  try {
    const auto e1 = ex::run_exp1({});
    report(1, "exact first-order readout",
           e1.exact.mean_l2_err <= 1e-12 && e1.exact.min_cosine >= 1.0 - 1e-12 &&
               e1.fd.mean_l2_err <= 1e-5 && e1.runtime_ms < 5000.0,
           fmt("l2=%.3g min_cos-1=%.3g fd_l2=%.3g time=%.0fms", e1.exact.mean_l2_err,
               e1.exact.min_cosine - 1.0, e1.fd.mean_l2_err, e1.runtime_ms));
    report(2, "retained rate", e1.trials == 250 && e1.retained == 250,
           fmt("retained=%.0f/%.0f", double(e1.retained), double(e1.trials)));

    const auto e2 = ex::run_exp2({});
    report(3, "hessian formula",
           e2.trials == 100 && e2.hess_fro_err <= 1e-5 && e2.worst_min_eig_formula >= -1e-10 &&
               e2.runtime_ms < 10000.0,
           fmt("fro=%.3g worst_min_eig=%.3g points=%.0f time=%.0fms", e2.hess_fro_err,
               e2.worst_min_eig_formula, double(e2.trials), e2.runtime_ms));
    {
      const double bounds[] = {1e-12, 1e-11, 1e-9};
      bool ok = e2.radius_fits.size() == 3 && e2.runtime_ms < 10000.0;
      std::string detail;
      for (std::size_t i = 0; ok && i < 3; ++i) {
        const auto& fit = e2.radius_fits[i];
        ok = ok && fit.retained_rate == 1.0 && fit.mean_residual <= bounds[i];
        if (i > 0) ok = ok && fit.mean_residual > e2.radius_fits[i - 1].mean_residual;
        detail += fmt("r=%.0e res=%.3g ", fit.radius, fit.mean_residual);
      }
      const double ratio = ok ? e2.radius_fits[2].mean_residual / e2.radius_fits[0].mean_residual : 0.0;
      ok = ok && ratio >= 1e2 && ratio <= 1e4;
      report(4, "local quadratic model", ok, detail + fmt("ratio=%.3g", ratio));
    }

    const auto e3 = ex::run_exp3({});
    report(5, "degenerate directional deriv",
           e3.directions == 1000 && e3.fd_mean_err <= 5e-8 && e3.fd_max_err <= 2e-7 &&
               e3.exact_mean_err <= 1e-11,
           fmt("fd_mean=%.3g fd_max=%.3g exact_mean=%.3g", e3.fd_mean_err, e3.fd_max_err,
               e3.exact_mean_err));
    report(6, "dual validity at degeneracy",
           e3.max_violation <= 1e-9 && e3.raw_max_violation <= 1e-9 && e3.min_support_margin > 0.0,
           fmt("max_violation=%.3g min_support_margin=%.3g", e3.raw_max_violation, e3.min_support_margin));
    report(7, "canonical gap fraction", e3.canonical_gap_frac == 1.0,
           fmt("fraction=%.4f", e3.canonical_gap_frac));
    report(8, "min-norm selector", e3.min_norm_ties == 0 && e3.min_norm_excess > 0.0,
           fmt("ties=%.0f min_excess=%.3g", double(e3.min_norm_ties), e3.min_norm_excess));

    const auto e4 = ex::run_exp4({});
    const auto& gd = ex::summary_for(e4, Method::WhiteboxGd);
    const auto& newton = ex::summary_for(e4, Method::WhiteboxNewton);
    report(9, "white-box inference",
           newton.gap_to_best <= 5e-4 && newton.iterations <= 0.2 * gd.iterations &&
               e4.max_gd_objective_diff <= 1e-3 && e4.max_newton_objective_diff <= 1e-3 &&
               e4.runtime_ms < 60000.0,
           fmt("newton_gap=%.3g iter_ratio=%.3g fd_diff=%.3g time=%.0fms", newton.gap_to_best,
               newton.iterations / gd.iterations,
               std::max(e4.max_gd_objective_diff, e4.max_newton_objective_diff), e4.runtime_ms));

    const auto props = properties();
    report(10, "property suite",
           props.convexity <= 1e-10 && props.support >= -1e-10 && props.mixing <= 1e-10 &&
               props.canonical <= 1e-12,
           fmt("convexity=%.3g support=%.3g mixing=%.3g canonical=%.3g", props.convexity,
               props.support, props.mixing, props.canonical) +
               " branches=" + std::to_string(props.branches));
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  return failures;
}
