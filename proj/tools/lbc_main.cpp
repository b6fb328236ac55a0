// lbc: experiment runner, lemma checks, and environment tooling.
//
//   lbc run --config cfg.json [--seed N] [--out DIR]
//   lbc verify <check> [--seed N] [--trials N] [--samples M] [--env FILE] [--out report.json]
//   lbc env-tool generate --kind random-linear|lsvi-ctex|quadratic-ctex [...] --out FILE
//   lbc env-tool validate FILE [--probes N] [--tol X]
//   lbc env-tool info FILE
//
// Exit status: 0 success, 1 failed check, 2 bad configuration or input.

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "lbc/envs.hpp"
#include "lbc/experiment.hpp"
#include "lbc/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitBadInput = 2;

struct VerifyArgs {
  std::string check;
  std::uint64_t seed = 0;
  int trials = 0;
  int samples = 0;
  std::string env;
  std::string out;
};

using Suite = std::function<std::vector<lbc::CheckReport>(const VerifyArgs&)>;

int pick(int value, int fallback) { return value > 0 ? value : fallback; }

lbc::FeatureMdp verify_env(const VerifyArgs& a) {
  return a.env.empty() ? lbc::make_random_linear_mdp(4, 2, 3, 8, 0) : lbc::load_mdp(a.env);
}

const std::map<std::string, Suite>& suites() {
  using lbc::CheckReport;
  static const std::map<std::string, Suite> table = {
      {"elliptic_potential",
       [](const VerifyArgs& a) {
         return std::vector<CheckReport>{lbc::check_elliptic_potential_suite(pick(a.trials, 1000), a.seed)};
       }},
      {"quadratic_sim",
       [](const VerifyArgs& a) {
         return std::vector<CheckReport>{
             lbc::check_quadratic_sim_suite(pick(a.trials, 1000), pick(a.samples, 100000), a.seed)};
       }},
      {"tl_upper_bound",
       [](const VerifyArgs& a) {
         return std::vector<CheckReport>{lbc::check_tl_upper_bound_suite(pick(a.trials, 1000), a.seed)};
       }},
      {"alpha_lb",
       [](const VerifyArgs& a) {
         return std::vector<CheckReport>{lbc::check_alpha_lb_suite(pick(a.trials, 1000), a.seed)};
       }},
      {"polygon_isometry",
       [](const VerifyArgs& a) {
         return std::vector<CheckReport>{lbc::check_polygon_isometry_suite(pick(a.trials, 1000), a.seed)};
       }},
      {"optimal_perimeter",
       [](const VerifyArgs& a) {
         return std::vector<CheckReport>{
             lbc::check_optimal_perimeter_suite(pick(a.trials, 200), pick(a.samples, 10000), a.seed)};
       }},
      {"orig_truncated",
       [](const VerifyArgs& a) {
         return std::vector<CheckReport>{lbc::check_orig_truncated_suite(pick(a.trials, 100), a.seed)};
       }},
      {"bound_truncation_error",
       [](const VerifyArgs& a) {
         return std::vector<CheckReport>{
             lbc::check_bound_truncation_error_suite(pick(a.trials, 200), pick(a.samples, 100000), a.seed)};
       }},
      {"bellman_linearity",
       [](const VerifyArgs& a) {
         return std::vector<CheckReport>{lbc::check_bellman_linearity_suite(verify_env(a), a.seed)};
       }},
      {"policy_q_linearity",
       [](const VerifyArgs& a) {
         return std::vector<CheckReport>{lbc::check_policy_q_linearity(verify_env(a), pick(a.trials, 50), a.seed)};
       }},
  };
  return table;
}

std::vector<lbc::CheckReport> run_lemmas(const VerifyArgs& a) {
  std::vector<lbc::CheckReport> all;
  for (const char* name : {"quadratic_sim", "tl_upper_bound", "alpha_lb", "polygon_isometry", "optimal_perimeter",
                           "orig_truncated", "bound_truncation_error", "elliptic_potential"}) {
    VerifyArgs defaults = a;
    defaults.trials = 0;
    defaults.samples = 0;
    for (auto& r : suites().at(name)(defaults)) all.push_back(std::move(r));
  }
  return all;
}

int cmd_verify(const VerifyArgs& a) {
  std::vector<lbc::CheckReport> reports;
  if (a.check == "lemmas") {
    reports = run_lemmas(a);
  } else {
    const auto it = suites().find(a.check);
    if (it == suites().end()) {
      std::cerr << "lbc verify: unknown check '" << a.check << "'\n";
      return kExitBadInput;
    }
    reports = it->second(a);
  }
  nlohmann::json doc;
  doc["seed"] = a.seed;
  doc["checks"] = nlohmann::json::array();
  bool ok = true;
  for (const auto& r : reports) {
    doc["checks"].push_back(lbc::check_report_to_json(r));
    ok = ok && r.pass;
    std::printf("%-24s %s  trials=%ld violations=%ld skipped=%ld worst_margin=%.6g\n", r.name.c_str(),
                r.pass ? "PASS" : "FAIL", r.trials, r.violations, r.skipped, r.worst_margin);
  }
  doc["all_passed"] = ok;
  if (!a.out.empty()) lbc::write_text_file(a.out, lbc::dump_json(doc));
  return ok ? kExitOk : kExitCheckFailed;
}

struct GenerateArgs {
  std::string kind = "random-linear";
  int d = 4;
  int num_actions = 2;
  int horizon = 3;
  int states = 8;
  std::uint64_t seed = 0;
  bool raw_scale = false;
  std::string out;
};

int cmd_generate(const GenerateArgs& g) {
  lbc::FeatureMdp mdp = [&] {
    if (g.kind == "random-linear") return lbc::make_random_linear_mdp(g.d, g.num_actions, g.horizon, g.states, g.seed);
    if (g.kind == "lsvi-ctex") return lbc::make_lsvi_counterexample(g.raw_scale);
    if (g.kind == "quadratic-ctex") return lbc::make_quadratic_counterexample(g.raw_scale);
    throw lbc::Error("unknown kind '" + g.kind + "' (expected random-linear, lsvi-ctex, or quadratic-ctex)");
  }();
  lbc::save_mdp(mdp, g.out);
  std::printf("wrote %s (H=%d A=%d d=%d B=%.17g)\n", g.out.c_str(), mdp.horizon(), mdp.num_actions(), mdp.dim(),
              mdp.norm_bound());
  return kExitOk;
}

int cmd_validate(const std::string& file, int probes, double tol, std::uint64_t seed) {
  const lbc::FeatureMdp mdp = lbc::load_mdp(file);
  const lbc::LbcReport report = lbc::validate_lbc(mdp, probes > 0 ? probes : 4 * mdp.dim(), tol, seed);
  std::cout << lbc::dump_json(lbc::lbc_report_to_json(report));
  return report.pass ? kExitOk : kExitCheckFailed;
}

int cmd_info(const std::string& file) {
  const lbc::FeatureMdp mdp = lbc::load_mdp(file);
  nlohmann::json j;
  j["H"] = mdp.horizon();
  j["A"] = mdp.num_actions();
  j["d"] = mdp.dim();
  j["S"] = mdp.states();
  j["B"] = mdp.norm_bound();
  std::vector<lbc::MatrixXd> designs;
  nlohmann::json ranks = nlohmann::json::array();
  for (int h = 0; h < mdp.horizon(); ++h) {
    ranks.push_back(lbc::feature_rank(mdp, h));
    designs.push_back(mdp.step_design(h));
  }
  j["feature_rank"] = ranks;
  const lbc::NormBound nb = lbc::mdp_norm_bound(designs);
  j["B_recomputed"] = nb.value;
  j["B_exact"] = nb.exact;
  std::cout << lbc::dump_json(j);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PSDP-UCB learner, verification checks, and environment tools"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t run_seed = 0;
  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  auto* seed_opt = run->add_option("--seed", run_seed, "Override the config seed");
  run->add_option("--out", out_dir, "Override the output directory");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Run one verification suite (or 'lemmas' for all lemma suites)");
  verify->add_option("check", va.check, "Suite name")->required();
  verify->add_option("--seed", va.seed, "Master seed");
  verify->add_option("--trials", va.trials, "Number of random instances");
  verify->add_option("--samples", va.samples, "Monte Carlo samples per instance");
  verify->add_option("--env", va.env, "MDP file (Bellman-linearity suites)");
  verify->add_option("--out", va.out, "Write the reports here (JSON)");

  auto* env_tool = app.add_subcommand("env-tool", "Generate, validate, or describe MDP files");
  env_tool->require_subcommand(1);
  GenerateArgs ga;
  auto* gen = env_tool->add_subcommand("generate", "Write a generated MDP");
  gen->add_option("--kind", ga.kind, "random-linear, lsvi-ctex, or quadratic-ctex");
  gen->add_option("--d", ga.d, "Feature dimension");
  gen->add_option("--A", ga.num_actions, "Number of actions");
  gen->add_option("--H", ga.horizon, "Horizon");
  gen->add_option("--S", ga.states, "States per step");
  gen->add_option("--seed", ga.seed, "Generator seed");
  gen->add_flag("--raw-scale", ga.raw_scale, "Counterexamples without feature rescaling");
  gen->add_option("--out", ga.out, "Output file")->required();

  std::string file;
  int probes = 0;
  double tol = 1e-9;
  std::uint64_t probe_seed = 0;
  auto* val = env_tool->add_subcommand("validate", "Check linear Bellman completeness");
  val->add_option("file", file, "MDP file")->required();
  val->add_option("--probes", probes, "Probe count (default 4d)");
  val->add_option("--tol", tol, "Residual tolerance");
  val->add_option("--seed", probe_seed, "Probe seed");
  auto* info = env_tool->add_subcommand("info", "Print dimensions, B, and feature ranks");
  info->add_option("file", file, "MDP file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (*run) {
      lbc::ExperimentConfig config = lbc::load_config(config_path);
      if (*seed_opt) config.seed = run_seed;
      if (!out_dir.empty()) config.output_dir = out_dir;
      const int code = lbc::run_experiment(config);
      std::printf("%s: wrote %s/learning_curve.csv, report.json, run_meta.json\n",
                  code == kExitOk ? "all checks passed" : "some checks FAILED", config.output_dir.c_str());
      return code;
    }
    if (*verify) return cmd_verify(va);
    if (*gen) return cmd_generate(ga);
    if (*val) return cmd_validate(file, probes, tol, probe_seed);
    if (*info) return cmd_info(file);
  } catch (const lbc::ConfigError& e) {
    std::cerr << "lbc: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const lbc::Error& e) {
    std::cerr << "lbc: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "lbc: " << e.what() << "\n";
    return kExitBadInput;
  }
  return kExitBadInput;
}
