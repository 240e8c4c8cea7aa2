#include "leakprobe/cli.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

#include "leakprobe/prompts.hpp"
#include "leakprobe/toml.hpp"
#include "leakprobe/util.hpp"

namespace leakprobe::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kDefaultRefusal = "I can't help with that request.";

BackendProfile profile_from_toml(const std::string& id, const toml::Value& spec) {
  BackendProfile p;
  p.id = id;
  const std::string kind = spec.get_string("kind", "scripted");
  if (kind == "scripted") {
    p.kind = BackendKind::scripted;
    p.script_path = spec.get_string("script", "");
    if (p.script_path.empty())
      throw Error(errkind::config_error, "profile '" + id + "': scripted profile needs 'script'");
    p.model_name = spec.get_string("model", "scripted");
  } else if (kind == "live_http") {
    p.kind = BackendKind::live_http;
    p.endpoint_url = spec.get_string("endpoint_url", "");
    if (p.endpoint_url.empty())
      throw Error(errkind::config_error, "profile '" + id + "': live profile needs 'endpoint_url'");
    p.model_name = spec.get_string("model", "");
    if (p.model_name.empty())
      throw Error(errkind::config_error, "profile '" + id + "': live profile needs 'model'");
  } else {
    throw Error(errkind::config_error,
                "profile '" + id + "': kind must be 'scripted' or 'live_http'");
  }
  if (const toml::Value* t = spec.find("temperature")) p.temperature = t->as_float();
  p.max_response_tokens = static_cast<int>(spec.get_integer("max_response_tokens", 1024));
  p.request_timeout = std::chrono::milliseconds(spec.get_integer("request_timeout_ms", 30000));
  if (const toml::Value* retry = spec.find("retry")) {
    p.retry.max_attempts = static_cast<int>(retry->get_integer("max_attempts", 3));
    p.retry.base_backoff = std::chrono::milliseconds(retry->get_integer("base_backoff_ms", 500));
  }
  if (p.retry.max_attempts < 1)
    throw Error(errkind::config_error, "profile '" + id + "': retry.max_attempts must be >= 1");
  p.rate_limit_rpm = static_cast<int>(spec.get_integer("rate_limit_rpm", 0));
  return p;
}

// Resolves a path in the config file relative to the config's directory.
std::string resolve_relative(const std::string& base_file, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_file).parent_path() / path).string();
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  toml::Value doc = toml::parse_file(path);
  RunConfig config;

  config.scenario_path = resolve_relative(path, doc.get_string("scenario", ""));
  if (config.scenario_path.empty())
    throw Error(errkind::config_error, "config needs 'scenario' (path to the scenario file)");

  config.tiers.clear();
  if (const toml::Value* tiers = doc.find("tiers")) {
    for (const auto& t : tiers->as_array()) config.tiers.push_back(tier_from_string(t.as_string()));
  } else if (const toml::Value* tier = doc.find("tier")) {
    config.tiers.push_back(tier_from_string(tier->as_string()));
  } else {
    config.tiers.push_back(TierLevel::low);
  }
  if (config.tiers.empty()) throw Error(errkind::config_error, "'tiers' must not be empty");

  config.trials_per_arm_override = static_cast<int>(doc.get_integer("trials_per_arm", 0));
  config.question_budget_override = static_cast<int>(doc.get_integer("question_budget", 0));
  config.parallelism = static_cast<int>(doc.get_integer("parallelism", 1));
  config.seed = static_cast<std::uint64_t>(doc.get_integer("seed", 0));
  config.policy = policy_from_string(doc.get_string("dont_know_policy", "count_as_not_original"));
  config.output_dir = resolve_relative(path, doc.get_string("output_dir", "runs"));
  if (const toml::Value* gate = doc.find("fail_if_advantage_above"))
    config.fail_if_advantage_above = gate->as_float();
  if (const toml::Value* judge_prompt = doc.find("judge_prompt_file")) {
    config.judge_prompt_template =
        read_text_file(resolve_relative(path, judge_prompt->as_string()));
    if (trim(config.judge_prompt_template).empty())
      throw Error(errkind::config_error, "judge_prompt_file is empty");
  }

  if (const toml::Value* profiles = doc.find("profiles")) {
    for (const auto& [id, spec] : profiles->as_table()) {
      BackendProfile p = profile_from_toml(id, spec);
      p.script_path = resolve_relative(path, p.script_path);
      config.profiles.emplace(id, std::move(p));
    }
  }
  for (const char* role : {"tested", "judge", "analysis"}) {
    if (config.profiles.count(role) == 0)
      throw Error(errkind::config_error,
                  std::string("config needs [profiles.") + role + "]");
  }

  if (const toml::Value* tier_table = doc.find("tier_config")) {
    for (const auto& [name, spec] : tier_table->as_table()) {
      TierSpec ts;
      ts.hardening_suffix = spec.get_string("hardening_suffix", "");
      ts.guard_profile = spec.get_string("guard_profile", "");
      ts.guard_instruction = spec.get_string("guard_instruction", "");
      ts.refusal_text = spec.get_string("refusal_text", "");
      config.tier_specs.emplace(tier_from_string(name), std::move(ts));
    }
  }
  return config;
}

int cmd_validate(const std::string& scenario_path, std::ostream& out, std::ostream& err) {
  Scenario scenario;
  try {
    scenario = load_scenario_file(scenario_path);
  } catch (const Error& e) {
    err << "error: cannot load scenario '" << scenario_path << "': " << e.what() << "\n";
    return kExitUsage;
  }
  auto violations = validate_scenario(scenario);
  if (violations.empty()) {
    out << "scenario '" << scenario.id << "' is valid (" << scenario.substitutions.size()
        << " substitutions, " << scenario.markers.size() << " markers, " << scenario.trials_per_arm
        << " trials per arm)\n";
    return kExitOk;
  }
  for (const auto& v : violations) out << "violation: " << v.field << ": " << v.message << "\n";
  return kExitValidation;
}

namespace {

struct PreparedTier {
  SecurityTier tier;
};

SecurityTier build_tier(const RunConfig& config, TierLevel level) {
  TierSpec spec;
  auto it = config.tier_specs.find(level);
  if (it != config.tier_specs.end()) spec = it->second;

  std::optional<GuardConfig> guard;
  if (level == TierLevel::high) {
    if (spec.guard_profile.empty())
      throw Error(errkind::config_error,
                  "high tier needs [tier_config.high] guard_profile");
    auto pit = config.profiles.find(spec.guard_profile);
    if (pit == config.profiles.end())
      throw Error(errkind::config_error,
                  "guard profile '" + spec.guard_profile + "' is not defined");
    GuardConfig g;
    g.guard_backend = pit->second;
    g.guard_instruction =
        spec.guard_instruction.empty() ? prompts::kGuardInstructionV1 : spec.guard_instruction;
    g.refusal_text = spec.refusal_text.empty() ? kDefaultRefusal : spec.refusal_text;
    guard = std::move(g);
  }
  return make_tier(level, spec.hardening_suffix, std::move(guard));
}

void check_api_keys(const RunConfig& config, const std::vector<TierLevel>& tiers) {
  std::vector<std::string> needed{"tested", "judge", "analysis"};
  for (TierLevel level : tiers) {
    if (level == TierLevel::high) {
      auto it = config.tier_specs.find(level);
      if (it != config.tier_specs.end() && !it->second.guard_profile.empty())
        needed.push_back(it->second.guard_profile);
    }
  }
  for (const auto& name : needed) {
    auto it = config.profiles.find(name);
    if (it == config.profiles.end()) continue;
    const BackendProfile& p = it->second;
    if (p.kind == BackendKind::live_http && resolve_api_key(p.id).empty()) {
      throw Error(errkind::config_error, "live profile '" + p.id + "' needs an API key in " +
                                             api_key_env_name(p.id) + " or PROBE_API_KEY");
    }
    if (p.kind == BackendKind::scripted) {
      auto problems = validate_script_file(p.script_path);
      if (!problems.empty())
        throw Error(errkind::config_error,
                    "script '" + p.script_path + "' is invalid: " + problems.front());
    }
  }
}

std::string fmt3(double v) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(3);
  ss << v;
  return ss.str();
}

}  // namespace

int cmd_run(const std::string& config_path, const RunOverrides& overrides, std::ostream& out,
            std::ostream& err) {
  RunConfig config;
  try {
    config = load_run_config(config_path);
    if (!overrides.tiers.empty()) {
      config.tiers.clear();
      for (const auto& t : overrides.tiers) config.tiers.push_back(tier_from_string(t));
    }
    if (overrides.trials_per_arm) config.trials_per_arm_override = *overrides.trials_per_arm;
    if (overrides.question_budget) config.question_budget_override = *overrides.question_budget;
    if (overrides.parallelism) config.parallelism = *overrides.parallelism;
    if (overrides.seed) config.seed = *overrides.seed;
    if (overrides.policy) config.policy = policy_from_string(*overrides.policy);
    if (overrides.output_dir) config.output_dir = *overrides.output_dir;
    if (overrides.fail_if_advantage_above)
      config.fail_if_advantage_above = *overrides.fail_if_advantage_above;
    if (config.parallelism < 1)
      throw Error(errkind::config_error, "parallelism must be >= 1");
    if (config.trials_per_arm_override < 0 || config.question_budget_override < 0)
      throw Error(errkind::config_error, "overrides must be positive");
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  Scenario scenario;
  try {
    scenario = load_scenario_file(config.scenario_path);
  } catch (const Error& e) {
    err << "error: cannot load scenario '" << config.scenario_path << "': " << e.what() << "\n";
    return kExitUsage;
  }
  if (config.trials_per_arm_override > 0) scenario.trials_per_arm = config.trials_per_arm_override;
  if (config.question_budget_override > 0)
    scenario.question_budget = config.question_budget_override;

  auto violations = validate_scenario(scenario);
  if (!violations.empty()) {
    for (const auto& v : violations) out << "violation: " << v.field << ": " << v.message << "\n";
    return kExitValidation;
  }

  std::vector<SecurityTier> tiers;
  try {
    check_api_keys(config, config.tiers);
    for (TierLevel level : config.tiers) {
      SecurityTier tier = build_tier(config, level);
      for (const auto& v : validate_tier(tier, scenario)) {
        throw Error(errkind::config_error,
                    "tier " + std::string(to_string(level)) + ": " + v.field + ": " + v.message);
      }
      tiers.push_back(std::move(tier));
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  bool any_arm_empty = false;
  bool gate_tripped = false;

  // The judge samples at temperature 1.0 unless configured; the tested
  // profile keeps the provider default.
  BackendProfile judge_profile = config.profiles.at("judge");
  if (!judge_profile.temperature) judge_profile.temperature = 1.0;

  for (const SecurityTier& tier : tiers) {
    ExperimentConfig experiment;
    experiment.scenario = scenario;
    experiment.tier = tier;
    experiment.backends = {config.profiles.at("tested"), judge_profile,
                           config.profiles.at("analysis")};
    experiment.parallelism = config.parallelism;
    experiment.seed = config.seed;
    experiment.judge_prompt_template = config.judge_prompt_template;

    RunManifest manifest;
    manifest.run_id = uuid4();
    manifest.started_at = now_rfc3339_utc();
    manifest.scenario_id = scenario.id;
    manifest.tier = std::string(to_string(tier.level));
    manifest.dont_know_policy = std::string(to_string(config.policy));
    manifest.question_budget = scenario.question_budget;
    manifest.profiles = nlohmann::json{{"tested", experiment.backends.tested.to_json()},
                                       {"judge", experiment.backends.judge.to_json()},
                                       {"analysis", experiment.backends.analysis.to_json()}};
    if (tier.guard)
      manifest.profiles["guard"] = tier.guard->guard_backend.to_json();

    const std::string run_dir = (fs::path(config.output_dir) / manifest.run_id).string();
    ExperimentResult result;
    try {
      fs::create_directories(run_dir);
      const std::string snapshot = scenario_to_toml(scenario);
      write_text_file(scenario_snapshot_path(run_dir), snapshot);
      manifest.scenario_file_hash = sha256_hex(snapshot);
      manifest.config_fingerprint = sha256_hex(
          config_fingerprint(experiment) + "|policy=" + manifest.dont_know_policy);

      TrialLog log(trials_path(run_dir));
      result = run_experiment(experiment, [&log](const TrialRecord& r) { log.append(r); });
      log.close();

      manifest.finished_at = now_rfc3339_utc();
      write_text_file(manifest_path(run_dir), manifest.to_json().dump(2) + "\n");
    } catch (const Error& e) {
      err << "error: run failed for tier " << to_string(tier.level) << ": " << e.what() << "\n";
      return kExitUsage;
    }

    long completed_original = 0, completed_sanitized = 0;
    for (const auto& t : result.trials) {
      if (t.status != TrialStatus::completed) continue;
      (t.arm == Arm::original ? completed_original : completed_sanitized) += 1;
    }

    if (completed_original == 0 || completed_sanitized == 0) {
      any_arm_empty = true;
      out << "tier=" << to_string(tier.level) << " advantage=n/a (no completed trials on arm "
          << (completed_original == 0 ? "original" : "sanitized") << ") run=" << run_dir << "\n";
      continue;
    }

    ReportOptions options;
    options.policy = config.policy;
    options.question_budget = scenario.question_budget;
    try {
      nlohmann::json report = build_report(manifest, result.trials, options, &scenario);
      write_text_file(report_path(run_dir, ReportFormat::json, false),
                      render_report(report, ReportFormat::json));
      write_text_file(report_path(run_dir, ReportFormat::markdown, false),
                      render_report(report, ReportFormat::markdown));
      const auto& est = report.at("advantage");
      const double advantage = est.at("advantage").get<double>();
      out << "tier=" << to_string(tier.level) << " advantage=" << fmt3(advantage) << " ci"
          << static_cast<int>(options.ci_level * 100) << "=[" << fmt3(est.at("ci_low").get<double>())
          << "," << fmt3(est.at("ci_high").get<double>()) << "]"
          << " completed=" << (completed_original + completed_sanitized) << "/"
          << result.trials.size() << " run=" << run_dir << "\n";
      if (config.fail_if_advantage_above && advantage > *config.fail_if_advantage_above) {
        gate_tripped = true;
        out << "advantage gate tripped: " << fmt3(advantage) << " > "
            << fmt3(*config.fail_if_advantage_above) << " (tier " << to_string(tier.level)
            << ")\n";
      }
    } catch (const Error& e) {
      err << "error: report failed for tier " << to_string(tier.level) << ": " << e.what()
          << "\n";
      return kExitUsage;
    }
  }

  if (any_arm_empty) return kExitNoTrials;
  if (gate_tripped) return kExitGate;
  return kExitOk;
}

int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err) {
  LoadedRun run;
  try {
    run = load_run(args.run_dir);
  } catch (const Error& e) {
    err << "error: cannot load run '" << args.run_dir << "': " << e.what() << "\n";
    return kExitUsage;
  }
  if (run.truncated_tail) err << "notice: " << run.truncation_notice << "\n";

  ReportFormat format;
  if (args.format == "json") {
    format = ReportFormat::json;
  } else if (args.format == "markdown" || args.format == "md") {
    format = ReportFormat::markdown;
  } else {
    err << "error: --format must be json or markdown\n";
    return kExitUsage;
  }

  ReportOptions options;
  options.question_budget = run.manifest.question_budget;
  options.redact = args.redact;
  try {
    options.policy = policy_from_string(args.policy ? *args.policy
                                                    : run.manifest.dont_know_policy);
    std::optional<Scenario> scenario = load_run_scenario(args.run_dir);
    if (args.redact && !scenario) {
      err << "error: --redact needs the scenario snapshot (scenario.toml) in the run dir\n";
      return kExitUsage;
    }
    nlohmann::json report =
        build_report(run.manifest, run.trials, options, scenario ? &*scenario : nullptr);
    const std::string rendered = render_report(report, format);
    write_text_file(report_path(args.run_dir, format, args.redact), rendered);
    out << rendered;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

namespace {

std::string describe_message(const TranscriptEntry& entry) {
  std::ostringstream line;
  line << "[" << to_string(entry.channel) << "][" << to_string(entry.message.role);
  if (entry.message.is_tool_call()) line << "->" << entry.message.tool_name;
  line << "]";
  if (!entry.note.empty()) line << " (" << entry.note << ")";
  line << " ";
  if (entry.message.is_tool_call()) {
    line << entry.message.tool_arguments.dump();
  } else {
    line << entry.message.content;
  }
  return line.str();
}

}  // namespace

int cmd_replay(const std::string& run_dir, const std::string& trial_id, std::ostream& out,
               std::ostream& err) {
  LoadedRun run;
  try {
    run = load_run(run_dir);
  } catch (const Error& e) {
    err << "error: cannot load run '" << run_dir << "': " << e.what() << "\n";
    return kExitUsage;
  }
  const TrialRecord* trial = nullptr;
  for (const auto& t : run.trials) {
    if (t.trial_id == trial_id) {
      trial = &t;
      break;
    }
  }
  if (!trial) {
    err << "error: no trial '" << trial_id << "' in run '" << run_dir << "'\n";
    return kExitUsage;
  }

  out << "trial " << trial->trial_id << " — arm " << to_string(trial->arm) << ", tier "
      << to_string(trial->tier) << ", status " << to_string(trial->status) << ", seed "
      << trial->rng_seed << "\n";
  out << std::string(72, '-') << "\n";
  for (const auto& entry : trial->transcript) out << describe_message(entry) << "\n";
  out << std::string(72, '-') << "\n";
  if (!trial->leak_findings.empty()) {
    out << "leak findings (" << trial->leak_findings.size() << "):\n";
    for (const auto& f : trial->leak_findings) {
      out << "  turn " << f.trial_turn << " " << to_string(f.source) << " \"" << f.matched_span
          << "\" at offset " << f.position << "\n";
    }
  } else {
    out << "leak findings: none\n";
  }
  if (trial->status == TrialStatus::completed && trial->verdict) {
    out << "verdict: " << to_string(trial->verdict->decision) << " after "
        << trial->verdict->questions_used << " question(s)";
    if (!trial->verdict->rationale.empty()) out << " — " << trial->verdict->rationale;
    out << "\n";
  } else {
    out << "aborted: " << trial->abort_reason << "\n";
  }
  return kExitOk;
}

}  // namespace leakprobe::cli
