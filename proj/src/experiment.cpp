#include "lbc/experiment.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Core>

#include "lbc/envs.hpp"

namespace lbc {

ConfigError::ConfigError(const std::string& message, int line, std::string key)
    : Error(line > 0 ? "config line " + std::to_string(line) + ": " + message : "config: " + message),
      line_(line),
      key_(std::move(key)) {}

namespace {

const char* const kVersion = "1.0.0";

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Line of the first occurrence of "key" at or after `from`.
int line_of_key(const std::string& text, const std::string& key, std::size_t from = 0) {
  const std::size_t pos = text.find('"' + key + '"', from);
  return pos == std::string::npos ? 0 : line_of_offset(text, pos);
}

class Reader {
 public:
  Reader(const std::string& text, const nlohmann::json& object, std::string where)
      : text_(text), object_(object), where_(std::move(where)) {
    anchor_ = where_.empty() ? 0 : text_.find('"' + where_ + '"');
    if (anchor_ == std::string::npos) anchor_ = 0;
    if (!object_.is_object()) throw ConfigError(label() + " must be an object", line_of_key(text_, where_), where_);
  }

  void allow_only(const std::set<std::string>& keys) const {
    for (const auto& item : object_.items())
      if (!keys.count(item.key()))
        throw ConfigError("unknown key '" + qualified(item.key()) + "'", line(item.key()), qualified(item.key()));
  }

  bool has(const std::string& key) const { return object_.contains(key); }

  template <typename T>
  std::optional<T> get(const std::string& key) const {
    if (!object_.contains(key)) return std::nullopt;
    const nlohmann::json& v = object_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected true or false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
            throw std::invalid_argument("expected a non-negative integer");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("expected a string");
      }
      return v.get<T>();
    } catch (const std::exception& e) {
      throw ConfigError("key '" + qualified(key) + "': " + e.what(), line(key), qualified(key));
    }
  }

  const nlohmann::json& at(const std::string& key) const { return object_.at(key); }
  int line(const std::string& key) const { return line_of_key(text_, key, anchor_); }
  std::string qualified(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

 private:
  std::string label() const { return where_.empty() ? "config" : "'" + where_ + "'"; }

  const std::string& text_;
  const nlohmann::json& object_;
  std::string where_;
  std::size_t anchor_ = 0;
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& known_run_checks() {
  static const std::vector<std::string> names = {
      "optimism",     "optimism_control", "regression_confidence", "bonus_linearity",     "q_linearity",
      "bonus_bound",  "sigmap_bound",     "bellman_linearity",     "policy_q_linearity", "lbc",
      "learning"};
  return names;
}

FeatureMdp build_env(const EnvSpec& spec) {
  if (spec.generator == "random_linear")
    return make_random_linear_mdp(spec.d, spec.num_actions, spec.horizon, spec.states_per_step, spec.seed);
  if (spec.generator == "lsvi_counterexample") return make_lsvi_counterexample(spec.raw_scale);
  if (spec.generator == "quadratic_counterexample") return make_quadratic_counterexample(spec.raw_scale);
  if (spec.generator == "file") return load_mdp(spec.path);
  throw Error("unknown environment generator '" + spec.generator + "'");
}

nlohmann::json env_spec_to_json(const EnvSpec& spec) {
  nlohmann::json j;
  j["generator"] = spec.generator;
  if (spec.generator == "random_linear") {
    j["d"] = spec.d;
    j["A"] = spec.num_actions;
    j["H"] = spec.horizon;
    j["S"] = spec.states_per_step;
    j["seed"] = spec.seed;
  } else if (spec.generator == "file") {
    j["path"] = spec.path;
  } else {
    j["raw_scale"] = spec.raw_scale;
  }
  return j;
}

ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what(), line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0));
  }
  ExperimentConfig c;
  Reader top(text, root, "");
  top.allow_only({"env", "mode", "params", "seed", "output", "checks", "learning_thresholds", "checkpoint",
                  "resume_from", "write_trajectories", "notes"});

  if (auto mode = top.get<std::string>("mode")) {
    try {
      c.mode = param_mode_from_string(*mode);
    } catch (const Error& e) {
      throw ConfigError(e.what(), top.line("mode"), "mode");
    }
  }
  c.seed = top.get<std::uint64_t>("seed").value_or(0);
  c.output_dir = top.get<std::string>("output").value_or("out");
  c.checkpoint = top.get<bool>("checkpoint").value_or(false);
  c.resume_from = top.get<std::string>("resume_from").value_or("");
  c.write_trajectories = top.get<bool>("write_trajectories").value_or(false);
  c.notes = top.get<std::string>("notes").value_or("");

  if (!top.has("env")) throw ConfigError("missing key 'env'", 0, "env");
  {
    Reader env(text, top.at("env"), "env");
    env.allow_only({"generator", "d", "A", "H", "S", "seed", "raw_scale", "path"});
    c.env.generator = env.get<std::string>("generator").value_or("random_linear");
    const std::set<std::string> generators = {"random_linear", "lsvi_counterexample", "quadratic_counterexample",
                                              "file"};
    if (!generators.count(c.env.generator))
      throw ConfigError("unknown generator '" + c.env.generator + "'", env.line("generator"), "env.generator");
    c.env.d = env.get<int>("d").value_or(c.env.d);
    c.env.num_actions = env.get<int>("A").value_or(c.env.num_actions);
    c.env.horizon = env.get<int>("H").value_or(c.env.horizon);
    c.env.states_per_step = env.get<int>("S").value_or(c.env.states_per_step);
    c.env.seed = env.get<std::uint64_t>("seed").value_or(0);
    c.env.raw_scale = env.get<bool>("raw_scale").value_or(false);
    c.env.path = env.get<std::string>("path").value_or("");
    if (c.env.generator == "file" && c.env.path.empty())
      throw ConfigError("generator 'file' needs 'path'", env.line("generator"), "env.path");
    for (const char* k : {"d", "A", "H", "S"})
      if (env.has(k) && env.get<int>(k).value() < 1)
        throw ConfigError(std::string("'env.") + k + "' must be positive", env.line(k), std::string("env.") + k);
  }

  if (top.has("params")) {
    Reader p(text, top.at("params"), "params");
    p.allow_only({"T", "n", "beta", "lambda", "lambda1", "M_tl", "M_n", "sigma_tr", "explored_threshold", "eps_final",
                  "delta", "max_samples", "C_psd", "C_thm", "C_reg", "C_cor", "C_sb"});
    if (c.mode == ParamMode::kTheoretical)
      for (const char* k : {"beta", "lambda", "lambda1", "M_tl", "M_n", "sigma_tr", "explored_threshold"})
        if (p.has(k))
          throw ConfigError(std::string("'params.") + k +
                                "' is fixed by the theoretical schedule; only T, n = 3T, eps_final, delta, "
                                "max_samples, and the C constants may be set",
                            p.line(k), std::string("params.") + k);
    auto& o = c.params;
    o.rounds = p.get<int>("T");
    o.samples = p.get<int>("n");
    o.beta = p.get<double>("beta");
    o.lambda = p.get<double>("lambda");
    o.lambda1 = p.get<double>("lambda1");
    o.m_tl = p.get<int>("M_tl");
    o.m_n = p.get<int>("M_n");
    o.sigma_tr = p.get<double>("sigma_tr");
    o.explored_threshold = p.get<double>("explored_threshold");
    o.eps_final = p.get<double>("eps_final");
    o.delta = p.get<double>("delta");
    o.max_samples = p.get<int>("max_samples");
    o.constants.c_psd = p.get<double>("C_psd").value_or(o.constants.c_psd);
    o.constants.c_thm = p.get<double>("C_thm").value_or(o.constants.c_thm);
    o.constants.c_reg = p.get<double>("C_reg").value_or(o.constants.c_reg);
    o.constants.c_cor = p.get<double>("C_cor").value_or(o.constants.c_cor);
    o.constants.c_sb = p.get<double>("C_sb");
    if (c.mode == ParamMode::kTheoretical && o.samples && o.rounds && *o.samples != 3 * *o.rounds)
      throw ConfigError("theoretical mode requires n = 3T", p.line("n"), "params.n");
    for (const char* k : {"T", "n", "M_tl", "M_n", "max_samples"})
      if (p.has(k) && p.get<int>(k).value() < 1)
        throw ConfigError(std::string("'params.") + k + "' must be positive", p.line(k), std::string("params.") + k);
  }

  if (top.has("checks")) {
    const nlohmann::json& list = top.at("checks");
    if (!list.is_array()) throw ConfigError("'checks' must be an array of names", top.line("checks"), "checks");
    const auto& known = known_run_checks();
    for (const auto& item : list) {
      if (!item.is_string()) throw ConfigError("'checks' entries must be strings", top.line("checks"), "checks");
      const std::string name = item.get<std::string>();
      if (std::find(known.begin(), known.end(), name) == known.end())
        throw ConfigError("unknown check '" + name + "'", line_of_key(text, name), "checks");
      c.checks.push_back(name);
    }
  }

  if (top.has("learning_thresholds")) {
    Reader l(text, top.at("learning_thresholds"), "learning_thresholds");
    l.allow_only({"min_suboptimality", "mixture_suboptimality"});
    c.learning.min_suboptimality = l.get<double>("min_suboptimality").value_or(c.learning.min_suboptimality);
    c.learning.mixture_suboptimality =
        l.get<double>("mixture_suboptimality").value_or(c.learning.mixture_suboptimality);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

ParamSet resolve_params(const ExperimentConfig& config, const FeatureMdp& mdp) {
  const ParamOverrides& o = config.params;
  if (!o.rounds) throw ConfigError("'params.T' (number of rounds to run) is required", 0, "params.T");
  const int d = mdp.dim(), a = mdp.num_actions(), h = mdp.horizon();
  const double b = mdp.norm_bound();
  if (config.mode == ParamMode::kTheoretical) {
    const int n = o.samples.value_or(3 * *o.rounds);
    return theoretical_params(o.eps_final.value_or(0.5), o.delta.value_or(0.1), d, a, h, b, o.constants, *o.rounds, n,
                              o.max_samples.value_or(2048));
  }
  if (!o.samples) throw ConfigError("'params.n' (samples per phase) is required in practical mode", 0, "params.n");
  PracticalOptions po;
  if (o.beta) po.beta = *o.beta;
  if (o.lambda) po.lambda = *o.lambda;
  po.lambda1 = o.lambda1;
  if (o.explored_threshold) po.explored_threshold = *o.explored_threshold;
  po.sigma_tr = o.sigma_tr;
  if (o.m_tl) po.m_tl = *o.m_tl;
  if (o.m_n) po.m_n = *o.m_n;
  if (o.eps_final) po.eps_final = *o.eps_final;
  if (o.delta) po.delta = *o.delta;
  return practical_params(d, a, h, b, *o.rounds, *o.samples, po, o.constants);
}

std::string learning_curve_csv(const LearnerOutput& output) {
  std::string csv =
      "round,suboptimality_exact,value_mixture,mean_bonus_per_step,max_bonus,regression_residual_max\n";
  for (const auto& d : output.diagnostics) {
    csv += std::to_string(d.round);
    for (double v : {d.suboptimality, d.value_mixture, d.mean_bonus_per_step, d.max_bonus, d.regression_residual_max})
      csv += "," + format_double(v);
    csv += "\n";
  }
  return csv;
}

namespace {

CheckReport learning_report(const LearnerOutput& out, double min_sub, const LearningThresholds& t) {
  CheckReport r;
  r.name = "learning";
  r.trials = 2;
  const double s1 = t.min_suboptimality - min_sub;
  const double s2 = t.mixture_suboptimality - out.mixture_suboptimality;
  r.worst_margin = std::min(s1, s2);
  r.violations = (s1 >= 0.0 ? 0 : 1) + (s2 >= 0.0 ? 0 : 1);
  r.pass = r.violations == 0;
  r.details["min_suboptimality"] = min_sub;
  r.details["mixture_suboptimality"] = out.mixture_suboptimality;
  r.details["optimal_value"] = out.optimal_value;
  r.details["threshold_min_suboptimality"] = t.min_suboptimality;
  r.details["threshold_mixture_suboptimality"] = t.mixture_suboptimality;
  return r;
}

CheckReport lbc_check(const FeatureMdp& mdp, std::uint64_t seed) {
  const LbcReport lbc = validate_lbc(mdp, 4 * mdp.dim(), 1e-9, seed);
  CheckReport r;
  r.name = "lbc";
  r.tolerance = lbc.tolerance;
  for (double res : lbc.step_residual) {
    const double slack = lbc.tolerance - res;
    if (r.trials == 0 || slack < r.worst_margin) r.worst_margin = slack;
    ++r.trials;
    if (!(slack >= 0.0)) ++r.violations;
  }
  r.pass = lbc.pass;
  r.details = lbc_report_to_json(lbc);
  return r;
}

std::string trajectories_csv(const LearnerState& state) {
  std::string csv = "round,phase_step,index,source_round,step,state,action,reward\n";
  for (const auto& s : state.log)
    for (std::size_t g = 0; g < s.trajectory.size(); ++g) {
      const auto& st = s.trajectory[g];
      csv += std::to_string(s.round) + "," + std::to_string(s.step + 1) + "," + std::to_string(s.index) + "," +
             std::to_string(s.source_round) + "," + std::to_string(g + 1) + "," + std::to_string(st.state) + "," +
             std::to_string(st.action) + "," + format_double(st.reward) + "\n";
    }
  return csv;
}

}  // namespace

ExperimentResult execute_experiment(const ExperimentConfig& config) {
  const FeatureMdp mdp = build_env(config.env);
  ExperimentResult res;
  res.params = resolve_params(config, mdp);
  const int rounds = *config.params.rounds;
  const int samples = config.params.samples.value_or(3 * rounds);

  LearnerOptions opts;
  opts.rounds = rounds;
  opts.samples = samples;
  opts.seed = config.seed;
  opts.keep_trajectories = config.write_trajectories;
  if (config.checkpoint) {
    const std::filesystem::path dir(config.output_dir);
    std::filesystem::create_directories(dir);
    opts.on_round = [dir](const LearnerState& s) {
      const std::filesystem::path tmp = dir / "checkpoint.json.tmp";
      write_text_file(tmp.string(), checkpoint_to_json(s).dump() + "\n");
      std::filesystem::rename(tmp, dir / "checkpoint.json");
    };
  }

  LearnerState state;
  int resumed_rounds = 0;
  if (!config.resume_from.empty()) {
    state = checkpoint_from_json(mdp, nlohmann::json::parse(read_text_file(config.resume_from)));
    resumed_rounds = state.completed_rounds();
    if (resumed_rounds > rounds) throw ConfigError("checkpoint holds more rounds than 'params.T'", 0, "resume_from");
  }
  res.output = run_psdp_ucb(mdp, res.params, opts, &state);
  res.min_suboptimality = res.output.diagnostics.empty() ? 0.0 : res.output.diagnostics.front().suboptimality;
  for (const auto& d : res.output.diagnostics) res.min_suboptimality = std::min(res.min_suboptimality, d.suboptimality);

  for (const std::string& name : config.checks) {
    if (name == "optimism") {
      res.reports.push_back(check_optimism(mdp, state, res.params));
    } else if (name == "optimism_control") {
      LearnerOptions control = opts;
      control.keep_trajectories = false;
      control.constant_bonus = static_cast<double>(mdp.horizon());
      LearnerState cs;
      run_psdp_ucb(mdp, res.params, control, &cs);
      CheckReport r = check_optimism(mdp, cs, res.params);
      r.name = "optimism_control";
      r.details["constant_bonus"] = mdp.horizon();
      res.reports.push_back(std::move(r));
    } else if (name == "regression_confidence") {
      if (resumed_rounds > 0) throw ConfigError("regression_confidence needs datasets, which checkpoints do not keep");
      res.reports.push_back(check_regression_confidence(mdp, state, res.params));
    } else if (name == "bonus_linearity") {
      res.reports.push_back(check_bonus_linearity(mdp, state));
    } else if (name == "q_linearity") {
      res.reports.push_back(check_q_linearity(mdp, state));
    } else if (name == "bonus_bound") {
      res.reports.push_back(check_bonus_bound(mdp, state, res.params));
    } else if (name == "sigmap_bound") {
      res.reports.push_back(check_sigmap_bound(mdp, state, res.params, 20000, config.seed));
    } else if (name == "bellman_linearity") {
      res.reports.push_back(check_bellman_linearity_suite(mdp, config.seed));
    } else if (name == "policy_q_linearity") {
      res.reports.push_back(check_policy_q_linearity(mdp, 50, config.seed));
    } else if (name == "lbc") {
      res.reports.push_back(lbc_check(mdp, config.seed));
    } else if (name == "learning") {
      res.reports.push_back(learning_report(res.output, res.min_suboptimality, config.learning));
    }
  }

  res.all_passed = std::all_of(res.reports.begin(), res.reports.end(), [](const CheckReport& r) { return r.pass; });
  res.csv = learning_curve_csv(res.output);

  nlohmann::json checks = nlohmann::json::array();
  for (const auto& r : res.reports) checks.push_back(check_report_to_json(r));
  res.report["checks"] = std::move(checks);
  res.report["all_passed"] = res.all_passed;
  res.report["summary"] = {{"optimal_value", res.output.optimal_value},
                           {"mixture_value", res.output.mixture_value},
                           {"mixture_suboptimality", res.output.mixture_suboptimality},
                           {"min_suboptimality", res.min_suboptimality}};

  nlohmann::json& meta = res.meta;
  meta["tool"] = "lbc";
  meta["version"] = kVersion;
  meta["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                     "." + std::to_string(EIGEN_MINOR_VERSION)},
                       {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
#ifdef __VERSION__
  meta["compiler"] = __VERSION__;
#endif
  meta["rng"] = "mt19937_64, streams seeded by SplitMix64 over (seed, component, round, step, index)";
  meta["seed"] = config.seed;
  meta["mode"] = to_string(config.mode);
  nlohmann::json env = env_spec_to_json(config.env);
  env["dims"] = {{"d", mdp.dim()}, {"A", mdp.num_actions()}, {"H", mdp.horizon()}, {"S", mdp.states()}};
  env["B"] = mdp.norm_bound();
  meta["env"] = std::move(env);
  meta["params"] = params_to_json(res.params);
  meta["run"] = {{"T", rounds}, {"n", samples}, {"resumed_rounds", resumed_rounds}};
  meta["checks"] = config.checks;
  meta["learning_thresholds"] = {{"min_suboptimality", config.learning.min_suboptimality},
                                 {"mixture_suboptimality", config.learning.mixture_suboptimality},
                                 {"seed", config.seed}};
  if (!config.notes.empty()) meta["notes"] = config.notes;

  if (config.checkpoint) res.meta["checkpoint"] = "checkpoint.json";
  if (config.write_trajectories) res.meta["trajectories"] = "trajectories.csv";
  if (config.write_trajectories) {
    std::filesystem::create_directories(config.output_dir);
    write_text_file((std::filesystem::path(config.output_dir) / "trajectories.csv").string(), trajectories_csv(state));
  }
  return res;
}

int run_experiment(const ExperimentConfig& config) {
  const ExperimentResult res = execute_experiment(config);
  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);
  write_text_file((dir / "learning_curve.csv").string(), res.csv);
  write_text_file((dir / "report.json").string(), dump_json(res.report));
  write_text_file((dir / "run_meta.json").string(), dump_json(res.meta));
  return res.all_passed ? 0 : 1;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace lbc
