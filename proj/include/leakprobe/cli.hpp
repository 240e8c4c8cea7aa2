#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "leakprobe/game.hpp"
#include "leakprobe/stats.hpp"
#include "leakprobe/store.hpp"

namespace leakprobe::cli {

// Exit codes: 0 success, 1 scenario-validation failure, 2 usage/config/IO
// error, 3 no usable trials in an arm, 4 advantage gate tripped.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNoTrials = 3;
inline constexpr int kExitGate = 4;

struct TierSpec {
  std::string hardening_suffix;   // empty = standard preset
  std::string guard_profile;      // high tier
  std::string guard_instruction;  // empty = standard preset
  std::string refusal_text;       // empty = default refusal
};

struct RunConfig {
  std::string scenario_path;
  std::vector<TierLevel> tiers{TierLevel::low};
  std::map<std::string, BackendProfile> profiles;
  std::map<TierLevel, TierSpec> tier_specs;
  int trials_per_arm_override = 0;  // 0 = scenario value
  int question_budget_override = 0;
  int parallelism = 1;
  std::uint64_t seed = 0;
  DontKnowPolicy policy = DontKnowPolicy::count_as_not_original;
  std::string output_dir = "runs";
  std::optional<double> fail_if_advantage_above;
  std::string judge_prompt_template;  // loaded from judge_prompt_file; empty = default
};

RunConfig load_run_config(const std::string& path);  // throws Error

// Flag-level overrides; flags win over config-file values.
struct RunOverrides {
  std::vector<std::string> tiers;
  std::optional<int> trials_per_arm;
  std::optional<int> question_budget;
  std::optional<int> parallelism;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> policy;
  std::optional<std::string> output_dir;
  std::optional<double> fail_if_advantage_above;
};

int cmd_validate(const std::string& scenario_path, std::ostream& out, std::ostream& err);
int cmd_run(const std::string& config_path, const RunOverrides& overrides, std::ostream& out,
            std::ostream& err);

struct ReportArgs {
  std::string run_dir;
  std::string format = "json";  // json | markdown
  std::optional<std::string> policy;
  bool redact = false;
};
int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err);

int cmd_replay(const std::string& run_dir, const std::string& trial_id, std::ostream& out,
               std::ostream& err);

}  // namespace leakprobe::cli
