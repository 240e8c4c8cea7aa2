#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "leakprobe/backend.hpp"
#include "leakprobe/scenario.hpp"

namespace leakprobe {

// Output of the analysis step: where the prompts differ and what to ask.
struct ProbePlan {
  std::vector<std::pair<std::string, std::string>> differing_spans;  // (A span, B span)
  std::vector<std::string> suggested_questions;
  std::string rationale;

  std::string render() const;  // judge-visible plan text
};

// Word-level LCS diff of the two prompts, paired as (A run, B run) spans with
// common punctuation trimmed from the run edges.
std::vector<std::pair<std::string, std::string>> diff_spans(const std::string& original_prompt,
                                                            const std::string& sanitized_prompt);

struct AnalysisResult {
  ProbePlan plan;
  std::vector<ChatMessage> exchange;  // the analysis-side conversation
  CompletionMeta meta;                // summed over (re-)asks
  int backend_calls = 0;
};

// Runs the analysis agent: deterministic diff plus backend-suggested
// questions. Re-asks up to twice when no questions come back, then throws
// Error(plan_generation_failed).
AnalysisResult run_analysis(const Scenario& s, const BackendProfile& analysis_backend,
                            std::uint64_t seed = 0);

enum class Decision { original, sanitized, dont_know };
std::string_view to_string(Decision d);
Decision decision_from_string(std::string_view s);

struct Verdict {
  Decision decision = Decision::dont_know;
  std::string rationale;
  int questions_used = 0;

  nlohmann::json to_json() const;
  static Verdict from_json(const nlohmann::json& j);
};

// One judge turn: either a question for the oracle or a final verdict.
struct JudgeAction {
  bool is_question = false;
  std::string question;
  Verdict verdict;                        // when !is_question
  std::vector<ChatMessage> new_messages;  // judge-side messages this turn appended
  CompletionMeta meta;                    // summed over (re-)asks
  int backend_calls = 0;
};

// Judge-side conversation state for one trial. The judge knows both prompts
// (as Prompt A / Prompt B) and converses with the oracle only through the
// prompt_agent tool.
class JudgeSession {
 public:
  // An empty prompt_template selects the shipped judge prompt asset.
  JudgeSession(const Scenario& s, const ProbePlan& plan, const BackendProfile& judge_backend,
               std::uint64_t seed, const std::string& prompt_template = "");

  // Invokes the judge backend and parses exactly one tool call. Re-asks up to
  // twice on malformed output, then throws Error(malformed_judge_action).
  // Asking past the budget is converted into a dont_know verdict.
  JudgeAction next_turn();

  // Feeds the oracle's reply back as the pending tool call's result.
  const ChatMessage& provide_answer(const std::string& oracle_reply);

  int questions_used() const { return questions_used_; }
  const std::vector<ChatMessage>& conversation() const { return conversation_; }

  // Wire tool schemas; names are the fixed contract strings.
  static const std::vector<ToolSpec>& tool_schemas();
  static constexpr const char* kAskTool = "prompt_agent";
  static constexpr const char* kVerdictTool = "submit_verdict";

 private:
  BackendProfile backend_;
  std::uint64_t seed_;
  int question_budget_;
  int questions_used_ = 0;
  std::string pending_call_id_;
  std::vector<ChatMessage> conversation_;
};

}  // namespace leakprobe
