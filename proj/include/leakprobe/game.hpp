#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "leakprobe/adversary.hpp"
#include "leakprobe/backend.hpp"
#include "leakprobe/scenario.hpp"
#include "leakprobe/target.hpp"

namespace leakprobe {

struct Effort {
  long oracle_queries = 0;
  long judge_calls = 0;  // judge + analysis backend completions
  long request_tokens = 0;
  long response_tokens = 0;
  // Wall time is tracked in memory but never serialized: stored trial records
  // must be byte-identical across reruns of the same seed.
  std::chrono::milliseconds wall_time{0};
};

enum class TrialStatus { completed, aborted };
std::string_view to_string(TrialStatus s);

// Everything observed in one distinguishing-game trial.
struct TrialRecord {
  std::string trial_id;
  std::string scenario_id;
  Arm arm = Arm::original;
  TierLevel tier = TierLevel::low;
  TrialStatus status = TrialStatus::aborted;
  std::string abort_reason;  // empty when completed
  std::optional<Verdict> verdict;
  ChatTranscript transcript;
  std::vector<LeakFinding> leak_findings;
  Effort effort;
  std::uint64_t rng_seed = 0;

  nlohmann::json to_json() const;
  static TrialRecord from_json(const nlohmann::json& j);
};

struct BackendSet {
  BackendProfile tested;
  BackendProfile judge;
  BackendProfile analysis;
};

struct ExperimentConfig {
  Scenario scenario;
  SecurityTier tier;
  BackendSet backends;
  int parallelism = 1;
  std::uint64_t seed = 0;
  std::string judge_prompt_template;  // empty = shipped default
};

struct ExperimentResult {
  std::string scenario_id;
  TierLevel tier = TierLevel::low;
  std::vector<TrialRecord> trials;  // schedule order
  std::string config_fingerprint;
};

// Derived per-trial seed; independent of execution order.
std::uint64_t derive_trial_seed(std::uint64_t experiment_seed, Arm arm, int trial_index);

// Interleaved arm order for the whole experiment, shuffled from the seed.
std::vector<Arm> schedule_arms(std::uint64_t experiment_seed, int trials_per_arm);

// Hash of every setting that affects behavior.
std::string config_fingerprint(const ExperimentConfig& config);

// Plays one full trial: fresh oracle and judge, analysis plan, question loop,
// leak detection on every reply. Backend failures abort the trial and are
// captured in the record; this never throws past the record.
TrialRecord run_trial(const Scenario& s, Arm arm, const SecurityTier& tier,
                      const BackendSet& backends, std::uint64_t seed, int trial_index,
                      const std::string& judge_prompt_template = "");

using TrialSink = std::function<void(const TrialRecord&)>;

// Runs trials_per_arm trials on each arm under a bounded worker pool. Aborted
// trials are retried once with a derived seed; the final record per slot is
// kept and emitted to the sink in completion order.
ExperimentResult run_experiment(const ExperimentConfig& config, const TrialSink& sink = nullptr);

}  // namespace leakprobe
