#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbc/bonus.hpp"
#include "lbc/learner.hpp"
#include "lbc/verify.hpp"

namespace lbc {

/// Configuration problem; `line` is 1-based and 0 when unknown.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, int line = 0, std::string key = {});
  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  int line_;
  std::string key_;
};

/// Where the environment comes from.
struct EnvSpec {
  /// random_linear, lsvi_counterexample, quadratic_counterexample, or file.
  std::string generator = "random_linear";
  int d = 4;
  int num_actions = 2;
  int horizon = 3;
  int states_per_step = 8;
  std::uint64_t seed = 0;
  bool raw_scale = false;
  std::string path;
};

FeatureMdp build_env(const EnvSpec& spec);
nlohmann::json env_spec_to_json(const EnvSpec& spec);

/// Parameter overrides as written in the config. Anything unset keeps the
/// mode's default.
struct ParamOverrides {
  std::optional<int> rounds;
  std::optional<int> samples;
  std::optional<double> beta;
  std::optional<double> lambda;
  std::optional<double> lambda1;
  std::optional<int> m_tl;
  std::optional<int> m_n;
  std::optional<double> sigma_tr;
  std::optional<double> explored_threshold;
  std::optional<double> eps_final;
  std::optional<double> delta;
  std::optional<int> max_samples;
  Constants constants;
};

struct LearningThresholds {
  double min_suboptimality = 0.1;
  double mixture_suboptimality = 0.15;
};

struct ExperimentConfig {
  EnvSpec env;
  ParamMode mode = ParamMode::kPractical;
  ParamOverrides params;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::vector<std::string> checks;
  LearningThresholds learning;
  /// Write checkpoint.json after every round.
  bool checkpoint = false;
  /// Continue from this checkpoint instead of starting at round 1.
  std::string resume_from;
  bool write_trajectories = false;
  std::string notes;
};

/// Names accepted in the `checks` list.
const std::vector<std::string>& known_run_checks();

/// Parses a JSON config. Unknown keys, wrong types, and forbidden overrides
/// raise ConfigError carrying the key and its line in `text`.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Resolves the parameter schedule for `mdp` (T and n are mandatory).
ParamSet resolve_params(const ExperimentConfig& config, const FeatureMdp& mdp);

struct ExperimentResult {
  LearnerOutput output;
  ParamSet params;
  std::vector<CheckReport> reports;
  double min_suboptimality = 0.0;
  bool all_passed = true;
  std::string csv;
  nlohmann::json report;
  nlohmann::json meta;
};

/// Runs the learner and the requested checks and fills every output document.
/// Only checkpoint.json (after each round) and trajectories.csv are written
/// here, and only when the config asks for them.
ExperimentResult execute_experiment(const ExperimentConfig& config);

/// The learning-curve CSV (header row, LF endings, %.17g floats).
std::string learning_curve_csv(const LearnerOutput& output);

/// execute_experiment + writes learning_curve.csv, report.json, and
/// run_meta.json into the output directory. Returns 0 when every check
/// passed and 1 otherwise.
int run_experiment(const ExperimentConfig& config);

/// Writes `text` verbatim (binary mode) and throws lbc::Error on failure.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

/// Two-space indented JSON with a trailing newline.
std::string dump_json(const nlohmann::json& j);

}  // namespace lbc
