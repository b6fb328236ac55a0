#include <doctest.h>

#include <sstream>

#include "lbc/experiment.hpp"

using namespace lbc;

namespace {

const char* kSmall = R"({
  "env": {"generator": "random_linear", "d": 3, "A": 2, "H": 2, "S": 4, "seed": 1},
  "mode": "practical",
  "params": {"T": 3, "n": 40, "M_tl": 32, "M_n": 32},
  "seed": 5,
  "checks": ["lbc", "bonus_linearity", "q_linearity"]
})";

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("valid config") {
    const ExperimentConfig c = parse_config(kSmall);
    CHECK(c.env.d == 3);
    CHECK(c.seed == 5);
    CHECK(c.params.rounds.value() == 3);
    CHECK(c.checks.size() == 3);
    CHECK(c.mode == ParamMode::kPractical);
  }
  SUBCASE("unknown keys are rejected with their line") {
    CHECK(error_line("{\n  \"env\": {},\n  \"params\": {\"T\": 1, \"n\": 2},\n  \"sede\": 3\n}") == 4);
    CHECK(error_line("{\n  \"env\": {\n    \"generator\": \"random_linear\",\n    \"dim\": 4\n  }\n}") == 4);
  }
  SUBCASE("wrong types and bad values") {
    CHECK_THROWS_AS(parse_config(R"({"env": {"d": "four"}, "params": {"T": 1, "n": 1}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"env": {"generator": "maze"}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"env": {}, "checks": ["telepathy"]})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"env": {}, "params": {"T": 0, "n": 1}})"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"env\": "), ConfigError);
  }
  SUBCASE("theoretical schedule cannot be overridden") {
    CHECK_THROWS_AS(parse_config(R"({"env": {}, "mode": "theoretical", "params": {"T": 2, "beta": 3}})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"env": {}, "mode": "theoretical", "params": {"T": 2, "n": 5}})"),
                    ConfigError);
    CHECK_NOTHROW(parse_config(R"({"env": {}, "mode": "theoretical", "params": {"T": 2, "n": 6}})"));
  }
  SUBCASE("T is required at resolution") {
    const ExperimentConfig c = parse_config(R"({"env": {"d": 2, "A": 2, "H": 2, "S": 2}})");
    CHECK_THROWS_AS(resolve_params(c, build_env(c.env)), ConfigError);
  }
}

TEST_CASE("experiment outputs") {
  const ExperimentConfig c = parse_config(kSmall);
  const ExperimentResult a = execute_experiment(c);
  const ExperimentResult b = execute_experiment(c);
  CHECK(a.all_passed);
  CHECK(a.csv == b.csv);
  CHECK(dump_json(a.report) == dump_json(b.report));
  CHECK(dump_json(a.meta) == dump_json(b.meta));

  std::istringstream lines(a.csv);
  std::string header;
  std::getline(lines, header);
  CHECK(header == "round,suboptimality_exact,value_mixture,mean_bonus_per_step,max_bonus,regression_residual_max");
  int rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  CHECK(rows == 3);
  CHECK(a.meta.at("seed") == 5);
  CHECK(a.meta.at("learning_thresholds").at("seed") == 5);
}

TEST_CASE("single-action environment has an all-zero suboptimality column") {
  const ExperimentConfig c = parse_config(R"({
    "env": {"generator": "random_linear", "d": 2, "A": 1, "H": 3, "S": 3, "seed": 0},
    "params": {"T": 3, "n": 10, "M_tl": 16, "M_n": 16}
  })");
  const ExperimentResult r = execute_experiment(c);
  std::istringstream lines(r.csv);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    CHECK(std::stod(line.substr(first + 1, second - first - 1)) == doctest::Approx(0.0).epsilon(1e-12));
  }
}
