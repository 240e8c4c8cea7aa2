#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "leakprobe/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"leakprobe — prompt-leakage distinguishing-game harness"};
  app.require_subcommand(1);

  // validate
  std::string scenario_path;
  auto* validate = app.add_subcommand("validate", "Check a scenario file's invariants");
  validate->add_option("scenario", scenario_path, "Scenario TOML file")->required();

  // run
  std::string config_path;
  leakprobe::cli::RunOverrides overrides;
  std::vector<std::string> tier_flags;
  int trials = 0, budget = 0, parallelism = 0;
  std::uint64_t seed = 0;
  std::string policy, output_dir;
  double fail_above = -2.0;
  auto* run = app.add_subcommand("run", "Run the distinguishing experiment");
  run->add_option("--config,-c", config_path, "Run config TOML file")->required();
  run->add_option("--tier", tier_flags, "Tier(s) to run (low|medium|high), overrides config");
  auto* trials_opt = run->add_option("--trials", trials, "Trials per arm override");
  auto* budget_opt = run->add_option("--budget", budget, "Question budget override");
  auto* par_opt = run->add_option("--parallelism", parallelism, "Worker threads");
  auto* seed_opt = run->add_option("--seed", seed, "Experiment seed");
  auto* policy_opt =
      run->add_option("--policy", policy, "Don't-know policy (count_as_not_original|exclude)");
  auto* out_opt = run->add_option("--output", output_dir, "Output directory for run folders");
  auto* gate_opt = run->add_option("--fail-if-advantage-above", fail_above,
                                   "Exit 4 when any tier's advantage exceeds this");

  // report
  leakprobe::cli::ReportArgs report_args;
  std::string report_policy;
  auto* report = app.add_subcommand("report", "Regenerate a report from a stored run");
  report->add_option("run_dir", report_args.run_dir, "Run directory")->required();
  report->add_option("--format", report_args.format, "json or markdown")
      ->default_val("json");
  auto* report_policy_opt = report->add_option("--policy", report_policy, "Don't-know policy");
  report->add_flag("--redact", report_args.redact, "Mask secret spans and markers");

  // replay
  std::string replay_dir, replay_trial;
  auto* replay = app.add_subcommand("replay", "Pretty-print one trial's transcript");
  replay->add_option("run_dir", replay_dir, "Run directory")->required();
  replay->add_option("trial_id", replay_trial, "Trial id, e.g. original-003")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : leakprobe::cli::kExitUsage;
  }

  if (*validate) {
    return leakprobe::cli::cmd_validate(scenario_path, std::cout, std::cerr);
  }
  if (*run) {
    overrides.tiers = tier_flags;
    if (*trials_opt) overrides.trials_per_arm = trials;
    if (*budget_opt) overrides.question_budget = budget;
    if (*par_opt) overrides.parallelism = parallelism;
    if (*seed_opt) overrides.seed = seed;
    if (*policy_opt) overrides.policy = policy;
    if (*out_opt) overrides.output_dir = output_dir;
    if (*gate_opt) overrides.fail_if_advantage_above = fail_above;
    return leakprobe::cli::cmd_run(config_path, overrides, std::cout, std::cerr);
  }
  if (*report) {
    if (*report_policy_opt) report_args.policy = report_policy;
    return leakprobe::cli::cmd_report(report_args, std::cout, std::cerr);
  }
  if (*replay) {
    return leakprobe::cli::cmd_replay(replay_dir, replay_trial, std::cout, std::cerr);
  }
  return leakprobe::cli::kExitUsage;
}
