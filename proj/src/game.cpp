#include "leakprobe/game.hpp"

#include <atomic>
#include <mutex>
#include <sstream>
#include <thread>

#include "leakprobe/util.hpp"

namespace leakprobe {

std::string_view to_string(TrialStatus s) {
  return s == TrialStatus::completed ? "completed" : "aborted";
}

nlohmann::json TrialRecord::to_json() const {
  nlohmann::json j{{"trial_id", trial_id},
                   {"scenario_id", scenario_id},
                   {"arm", to_string(arm)},
                   {"tier", to_string(tier)},
                   {"status", to_string(status)},
                   {"rng_seed", rng_seed}};
  if (!abort_reason.empty()) j["abort_reason"] = abort_reason;
  if (verdict) j["verdict"] = verdict->to_json();
  nlohmann::json findings = nlohmann::json::array();
  for (const auto& f : leak_findings) findings.push_back(f.to_json());
  j["leak_findings"] = std::move(findings);
  j["effort"] = nlohmann::json{{"oracle_queries", effort.oracle_queries},
                               {"judge_calls", effort.judge_calls},
                               {"request_tokens", effort.request_tokens},
                               {"response_tokens", effort.response_tokens}};
  nlohmann::json transcript_json = nlohmann::json::array();
  for (const auto& e : transcript) transcript_json.push_back(e.to_json());
  j["transcript"] = std::move(transcript_json);
  return j;
}

TrialRecord TrialRecord::from_json(const nlohmann::json& j) {
  TrialRecord r;
  r.trial_id = j.at("trial_id").get<std::string>();
  r.scenario_id = j.at("scenario_id").get<std::string>();
  r.arm = arm_from_string(j.at("arm").get<std::string>());
  r.tier = tier_from_string(j.at("tier").get<std::string>());
  r.status = j.at("status").get<std::string>() == "completed" ? TrialStatus::completed
                                                              : TrialStatus::aborted;
  r.abort_reason = j.value("abort_reason", std::string());
  r.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  if (j.contains("verdict")) r.verdict = Verdict::from_json(j["verdict"]);
  for (const auto& f : j.at("leak_findings")) r.leak_findings.push_back(LeakFinding::from_json(f));
  const auto& effort = j.at("effort");
  r.effort.oracle_queries = effort.at("oracle_queries").get<long>();
  r.effort.judge_calls = effort.at("judge_calls").get<long>();
  r.effort.request_tokens = effort.at("request_tokens").get<long>();
  r.effort.response_tokens = effort.at("response_tokens").get<long>();
  for (const auto& e : j.at("transcript")) r.transcript.push_back(TranscriptEntry::from_json(e));
  return r;
}

std::uint64_t derive_trial_seed(std::uint64_t experiment_seed, Arm arm, int trial_index) {
  return mix64(mix64(experiment_seed, arm == Arm::original ? 0x0A11ull : 0x0B22ull),
               static_cast<std::uint64_t>(trial_index));
}

std::vector<Arm> schedule_arms(std::uint64_t experiment_seed, int trials_per_arm) {
  std::vector<Arm> arms;
  arms.reserve(static_cast<std::size_t>(trials_per_arm) * 2);
  for (int i = 0; i < trials_per_arm; ++i) {
    arms.push_back(Arm::original);
    arms.push_back(Arm::sanitized);
  }
  Rng rng(mix64(experiment_seed, 0x5C4ED11ull));
  rng.shuffle(arms);
  return arms;
}

std::string config_fingerprint(const ExperimentConfig& config) {
  nlohmann::json j{
      {"scenario", nlohmann::json{{"id", config.scenario.id},
                                  {"original_prompt", config.scenario.original_prompt},
                                  {"sanitized_prompt", config.scenario.sanitized_prompt},
                                  {"task_description", config.scenario.task_description},
                                  {"trials_per_arm", config.scenario.trials_per_arm},
                                  {"question_budget", config.scenario.question_budget},
                                  {"marker_target",
                                   config.scenario.marker_target == MarkerTarget::sanitized
                                       ? "sanitized"
                                       : "original"}}},
      {"tier", std::string(to_string(config.tier.level))},
      {"hardening_suffix", config.tier.hardening_suffix},
      {"backends", nlohmann::json{{"tested", config.backends.tested.to_json()},
                                  {"judge", config.backends.judge.to_json()},
                                  {"analysis", config.backends.analysis.to_json()}}},
      {"parallelism", config.parallelism},
      {"seed", config.seed},
      {"judge_prompt_template", config.judge_prompt_template}};
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& s : config.scenario.substitutions)
    subs.push_back(nlohmann::json{{"secret", s.secret}, {"substitute", s.substitute}});
  j["scenario"]["substitutions"] = std::move(subs);
  j["scenario"]["markers"] = config.scenario.markers;
  if (config.tier.guard) {
    j["guard"] = nlohmann::json{{"backend", config.tier.guard->guard_backend.to_json()},
                                {"instruction", config.tier.guard->guard_instruction},
                                {"refusal_text", config.tier.guard->refusal_text}};
  }
  return sha256_hex(j.dump());
}

namespace {

void add_meta(Effort& effort, const CompletionMeta& meta) {
  effort.request_tokens += meta.request_tokens;
  effort.response_tokens += meta.response_tokens;
}

std::string trial_id_for(Arm arm, int index) {
  std::ostringstream id;
  id << to_string(arm) << "-";
  if (index < 100) id << (index < 10 ? "00" : "0");
  id << index;
  return id.str();
}

}  // namespace

TrialRecord run_trial(const Scenario& s, Arm arm, const SecurityTier& tier,
                      const BackendSet& backends, std::uint64_t seed, int trial_index,
                      const std::string& judge_prompt_template) {
  TrialRecord record;
  record.trial_id = trial_id_for(arm, trial_index);
  record.scenario_id = s.id;
  record.arm = arm;
  record.tier = tier.level;
  record.rng_seed = seed;
  const auto started = std::chrono::steady_clock::now();

  try {
    AnalysisResult analysis = run_analysis(s, backends.analysis, mix64(seed, 3));
    for (const auto& m : analysis.exchange)
      record.transcript.push_back({Channel::analysis, m, ""});
    record.effort.judge_calls += analysis.backend_calls;
    add_meta(record.effort, analysis.meta);

    Oracle oracle = make_oracle(s, arm, tier, backends.tested, mix64(seed, 1));
    record.transcript.push_back({Channel::oracle, oracle.conversation().front(), ""});

    JudgeSession judge(s, analysis.plan, backends.judge, mix64(seed, 2), judge_prompt_template);
    record.transcript.push_back({Channel::judge, judge.conversation().front(), ""});

    while (true) {
      JudgeAction action = judge.next_turn();
      for (const auto& m : action.new_messages)
        record.transcript.push_back({Channel::judge, m, ""});
      record.effort.judge_calls += action.backend_calls;
      add_meta(record.effort, action.meta);

      if (!action.is_question) {
        record.verdict = action.verdict;
        break;
      }

      const int turn_index = static_cast<int>(record.effort.oracle_queries);
      Oracle::AskResult ask = oracle.ask(action.question);
      ++record.effort.oracle_queries;
      add_meta(record.effort, ask.meta);
      add_meta(record.effort, ask.guard_meta);

      const auto& conv = oracle.conversation();
      record.transcript.push_back({Channel::oracle, conv[conv.size() - 2], ""});
      for (const auto& m : ask.guard_exchange)
        record.transcript.push_back(
            {Channel::guard, m, ask.guard_unparseable ? "guard_unparseable" : ""});
      record.transcript.push_back(
          {Channel::oracle, conv.back(), ask.blocked ? "blocked" : ""});

      auto findings = detect_leak(ask.response_text, s, arm, turn_index);
      record.leak_findings.insert(record.leak_findings.end(), findings.begin(), findings.end());

      record.transcript.push_back({Channel::judge, judge.provide_answer(ask.response_text), ""});
    }
    record.status = TrialStatus::completed;
  } catch (const Error& e) {
    record.status = TrialStatus::aborted;
    record.abort_reason = std::string(e.kind()) + ": " + e.what();
    record.verdict.reset();
  } catch (const std::exception& e) {
    record.status = TrialStatus::aborted;
    record.abort_reason = std::string("unexpected: ") + e.what();
    record.verdict.reset();
  }

  record.effort.wall_time = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  return record;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const TrialSink& sink) {
  if (config.parallelism < 1)
    throw Error(errkind::precondition, "parallelism must be >= 1");

  ExperimentResult result;
  result.scenario_id = config.scenario.id;
  result.tier = config.tier.level;
  result.config_fingerprint = config_fingerprint(config);

  const std::vector<Arm> arms = schedule_arms(config.seed, config.scenario.trials_per_arm);
  struct Job {
    Arm arm;
    int index;  // per-arm trial index
  };
  std::vector<Job> jobs;
  jobs.reserve(arms.size());
  int next_index[2] = {0, 0};
  for (Arm arm : arms) {
    int& idx = next_index[arm == Arm::original ? 0 : 1];
    jobs.push_back({arm, idx});
    ++idx;
  }

  result.trials.resize(jobs.size());
  std::mutex sink_mu;

  auto run_job = [&](std::size_t slot) {
    const Job& job = jobs[slot];
    std::uint64_t seed = derive_trial_seed(config.seed, job.arm, job.index);
    TrialRecord record = run_trial(config.scenario, job.arm, config.tier, config.backends, seed,
                                   job.index, config.judge_prompt_template);
    if (record.status == TrialStatus::aborted) {
      log_warn("trial " + record.trial_id + " aborted (" + record.abort_reason + "), retrying");
      std::uint64_t retry_seed = mix64(seed, 0x7E7779ull);
      TrialRecord retry = run_trial(config.scenario, job.arm, config.tier, config.backends,
                                    retry_seed, job.index, config.judge_prompt_template);
      record = std::move(retry);
    }
    if (sink) {
      std::lock_guard<std::mutex> lock(sink_mu);
      sink(record);
    }
    result.trials[slot] = std::move(record);
  };

  if (config.parallelism == 1) {
    for (std::size_t slot = 0; slot < jobs.size(); ++slot) run_job(slot);
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex error_mu;
    std::exception_ptr first_error;
    std::vector<std::thread> workers;
    const int n_workers = std::min<int>(config.parallelism, static_cast<int>(jobs.size()));
    workers.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) {
      workers.emplace_back([&] {
        while (true) {
          std::size_t slot = next.fetch_add(1);
          if (slot >= jobs.size()) return;
          try {
            run_job(slot);
          } catch (...) {
            // Sink failures (e.g. disk full) stop the run and re-surface.
            std::lock_guard<std::mutex> lock(error_mu);
            if (!first_error) first_error = std::current_exception();
            next.store(jobs.size());
          }
        }
      });
    }
    for (auto& t : workers) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  return result;
}

}  // namespace leakprobe
