// Command-line front end: model generation/inspection and the four experiment runners.
//
//   socicnn model gen [--seed N] [arch flags] [--out FILE]
//   socicnn model info FILE
//   socicnn exp1|exp2|exp3|exp4 [--config FILE] [--seed N] [--out DIR] [--format csv|json] [--check]
//
// Exit codes: 0 success, 1 runtime/io failure, 2 config/parse/validation error,
// 3 threshold violation under --check.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "socicnn/experiments.hpp"
#include "socicnn/serialize.hpp"

namespace fs = std::filesystem;
using namespace socicnn;
using namespace socicnn::experiments;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCheck = 3;

struct ExpOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
  bool check = false;
};

struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  std::string bound;
};

nlohmann::json read_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_json_text(buf.str(), path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

void emit(const std::string& experiment, const std::vector<const Table*>& tables,
          const ExpOptions& opts) {
  if (opts.format == "json") {
    nlohmann::json doc = {{"experiment", experiment}, {"tables", nlohmann::json::array()}};
    for (const auto* t : tables) doc["tables"].push_back(to_json(*t));
    const std::string text = doc.dump(2) + "\n";
    if (opts.out.empty()) {
      std::cout << text;
    } else {
      fs::create_directories(opts.out);
      write_text(fs::path(opts.out) / (experiment + ".json"), text);
    }
    return;
  }
  if (opts.out.empty()) {
    for (std::size_t i = 0; i < tables.size(); ++i) std::cout << (i ? "\n" : "") << to_csv(*tables[i]);
    return;
  }
  fs::create_directories(opts.out);
  for (const auto* t : tables) write_text(fs::path(opts.out) / (t->name + ".csv"), to_csv(*t));
}

int report_checks(const std::vector<Check>& checks) {
  bool ok = true;
  for (const auto& c : checks) {
    std::cerr << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << " = " << format_double(c.value) << " ("
              << c.bound << ")\n";
    ok = ok && c.pass;
  }
  return ok ? kExitOk : kExitCheck;
}

Check at_most(std::string name, double value, double bound) {
  return {std::move(name), value <= bound, value, "<= " + format_double(bound)};
}

Check at_least(std::string name, double value, double bound) {
  return {std::move(name), value >= bound, value, ">= " + format_double(bound)};
}

int run_exp1_cmd(const ExpOptions& opts) {
  auto cfg = exp1_config_from_json(read_config(opts.config_path));
  if (opts.seed) cfg.seed = *opts.seed;
  const auto r = run_exp1(cfg);
  emit("exp1", {&r.table}, opts);
  if (!opts.check) return kExitOk;
  return report_checks({at_least("retained_rate", r.retained_rate, 1.0),
                        at_most("grad_l2_err", r.exact.mean_l2_err, 1e-12),
                        at_least("cosine_sim", r.exact.min_cosine, 1.0 - 1e-12),
                        at_most("fd_grad_l2_err", r.fd.mean_l2_err, 1e-5)});
}

int run_exp2_cmd(const ExpOptions& opts) {
  auto cfg = exp2_config_from_json(read_config(opts.config_path));
  if (opts.seed) cfg.seed = *opts.seed;
  const auto r = run_exp2(cfg);
  emit("exp2", {&r.formula_table, &r.quadratic_table}, opts);
  if (!opts.check) return kExitOk;
  std::vector<Check> checks = {at_most("hess_fro_err", r.hess_fro_err, 1e-5),
                               at_least("min_eig_formula", r.worst_min_eig_formula, -1e-10)};
  const double residual_bounds[] = {1e-12, 1e-11, 1e-9};
  for (std::size_t i = 0; i < r.radius_fits.size(); ++i) {
    const auto& fit = r.radius_fits[i];
    checks.push_back(at_least("retained_rate@" + format_double(fit.radius), fit.retained_rate, 1.0));
    if (i < std::size(residual_bounds))
      checks.push_back(at_most("quad_err@" + format_double(fit.radius), fit.mean_residual, residual_bounds[i]));
    if (i > 0)
      checks.push_back({"quad_err_increasing@" + format_double(fit.radius),
                        fit.mean_residual > r.radius_fits[i - 1].mean_residual, fit.mean_residual,
                        "> " + format_double(r.radius_fits[i - 1].mean_residual)});
  }
  if (r.radius_fits.size() >= 2) {
    const double ratio = r.radius_fits.back().mean_residual / r.radius_fits.front().mean_residual;
    checks.push_back({"quad_err_scaling", ratio >= 1e2 && ratio <= 1e4, ratio, "in [100, 10000]"});
  }
  return report_checks(checks);
}

int run_exp3_cmd(const ExpOptions& opts) {
  auto cfg = exp3_config_from_json(read_config(opts.config_path));
  if (opts.seed) cfg.seed = *opts.seed;
  const auto r = run_exp3(cfg);
  emit("exp3", {&r.table}, opts);
  if (!opts.check) return kExitOk;
  return report_checks({at_most("fd_mean_err", r.fd_mean_err, 5e-8),
                        at_most("fd_max_err", r.fd_max_err, 2e-7),
                        at_most("exact_mean_err", r.exact_mean_err, 1e-11),
                        at_most("max_violation", r.raw_max_violation, 1e-9),
                        at_least("min_support_margin", r.min_support_margin, -1e-10),
                        at_least("canonical_gap_frac", r.canonical_gap_frac, 1.0),
                        at_most("min_norm_ties", static_cast<double>(r.min_norm_ties), 0.0)});
}

int run_exp4_cmd(const ExpOptions& opts) {
  auto cfg = exp4_config_from_json(read_config(opts.config_path));
  if (opts.seed) cfg.seed = *opts.seed;
  const auto r = run_exp4(cfg);
  emit("exp4", {&r.method_table, &r.diagnostics_table, &r.query_table}, opts);
  if (!opts.check) return kExitOk;
  const auto& gd = summary_for(r, Method::WhiteboxGd);
  const auto& newton = summary_for(r, Method::WhiteboxNewton);
  return report_checks({at_most("newton_gap_to_best", newton.gap_to_best, 5e-4),
                        at_most("newton_gd_iteration_ratio", newton.iterations / gd.iterations, 0.2),
                        at_most("gd_vs_fd_objective_diff", r.max_gd_objective_diff, 1e-3),
                        at_most("newton_vs_fd_objective_diff", r.max_newton_objective_diff, 1e-3),
                        {"mean_min_conic_residual_norm", r.diagnosed > 0 && r.mean_diagnostics.min_cone_norm > 0.1,
                         r.mean_diagnostics.min_cone_norm, "> 0.1"}});
}

int model_info(const std::string& path) {
  const auto params = load_model(path);
  std::cout << "input_dim: " << params.input_dim << "\n";
  std::cout << "widths:";
  for (const auto& layer : params.layers) std::cout << " " << layer.b.size();
  std::cout << "\nquad_dims:";
  for (const auto& m : params.quad) std::cout << " " << m.e.size();
  std::cout << "\ncone_dims:";
  for (const auto& m : params.cone) std::cout << " " << m.d.size();
  std::cout << "\nseed: " << params.seed << "\n";
  const auto verdict = validate(params);
  std::cout << "valid: " << (verdict ? "yes" : "no") << "\n";
  if (!verdict) {
    std::cout << "violation: " << to_string(*verdict.error) << ": " << verdict.message << "\n";
    return kExitConfig;
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    std::cout << "layer " << l << " |W|_F=" << format_double(layer.W.norm())
              << " |U|_F=" << format_double(layer.U.norm()) << " |b|=" << format_double(layer.b.norm())
              << "\n";
  }
  std::cout << "|c|=" << format_double(params.c.norm()) << " |v|=" << format_double(params.v.norm())
            << " b0=" << format_double(params.b0) << "\n";
  for (std::size_t h = 0; h < params.quad.size(); ++h)
    std::cout << "quad " << h << " alpha=" << format_double(params.quad[h].alpha)
              << " |B|_F=" << format_double(params.quad[h].B.norm()) << "\n";
  for (std::size_t g = 0; g < params.cone.size(); ++g)
    std::cout << "cone " << g << " lambda=" << format_double(params.cone[g].lambda)
              << " |A|_F=" << format_double(params.cone[g].A.norm()) << "\n";
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::SolveFailure:
      return kExitRuntime;
    default:
      return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SOC-ICNN dual geometry toolkit"};
  app.require_subcommand(1);

  auto* model = app.add_subcommand("model", "Generate or inspect model files");
  model->require_subcommand(1);
  auto* gen = model->add_subcommand("gen", "Write a random model as JSON");
  std::uint64_t gen_seed = 0;
  Architecture gen_arch = Architecture::uniform(20, 64, 4, 2, 20, 2, 20);
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--d0", gen_arch.input_dim, "Input dimension");
  gen->add_option("--widths", gen_arch.widths, "Hidden layer widths")->delimiter(',');
  gen->add_option("--quad-dims", gen_arch.quad_dims, "Quadratic module dimensions")->delimiter(',');
  gen->add_option("--cone-dims", gen_arch.cone_dims, "Conic module dimensions")->delimiter(',');
  gen->add_option("--out", gen_out, "Output file (stdout when omitted)");

  auto* info = model->add_subcommand("info", "Print dimensions, validation and norms");
  std::string info_path;
  info->add_option("file", info_path, "Model JSON")->required();

  ExpOptions opts;
  std::vector<std::pair<CLI::App*, std::function<int(const ExpOptions&)>>> experiments;
  const std::pair<const char*, std::function<int(const ExpOptions&)>> specs[] = {
      {"exp1", run_exp1_cmd}, {"exp2", run_exp2_cmd}, {"exp3", run_exp3_cmd}, {"exp4", run_exp4_cmd}};
  const char* descriptions[] = {"Exact first-order readout on nondegenerate inputs",
                                "Local Hessian formula and quadratic model",
                                "Degenerate first-order geometry",
                                "White-box inference"};
  for (std::size_t i = 0; i < 4; ++i) {
    auto* sub = app.add_subcommand(specs[i].first, descriptions[i]);
    sub->add_option("--config", opts.config_path, "JSON config file");
    sub->add_option("--seed", opts.seed, "Override the config seed");
    sub->add_option("--out", opts.out, "Output directory (stdout when omitted)");
    sub->add_option("--format", opts.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--check", opts.check, "Exit 3 when an acceptance threshold is violated");
    experiments.emplace_back(sub, specs[i].second);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) {
      const auto params = build_random(gen_seed, gen_arch);
      if (gen_out.empty())
        std::cout << dump_model(params);
      else
        save_model(params, gen_out);
      return kExitOk;
    }
    if (info->parsed()) return model_info(info_path);
    for (const auto& [sub, run] : experiments)
      if (sub->parsed()) return run(opts);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
