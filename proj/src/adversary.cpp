#include "leakprobe/adversary.hpp"

#include <algorithm>
#include <cctype>

#include "leakprobe/prompts.hpp"
#include "leakprobe/util.hpp"

namespace leakprobe {

namespace {

std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (is_space_ascii(c)) {
      if (!cur.empty()) {
        words.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

bool is_edge_punct(char c) {
  switch (c) {
    case '.':
    case ',':
    case ';':
    case ':':
    case '!':
    case '?':
    case '(':
    case ')':
    case '"':
    case '\'':
    case '%': return true;
    default: return false;
  }
}

std::string trim_punct(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_edge_punct(s[b])) ++b;
  while (e > b && is_edge_punct(s[e - 1])) --e;
  return s.substr(b, e - b);
}

std::string join_words(const std::vector<std::string>& words, std::size_t begin,
                       std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out.push_back(' ');
    out += words[i];
  }
  return trim_punct(out);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> diff_spans(const std::string& original_prompt,
                                                            const std::string& sanitized_prompt) {
  const std::vector<std::string> a = words_of(original_prompt);
  const std::vector<std::string> b = words_of(sanitized_prompt);
  const std::size_t n = a.size(), m = b.size();

  // LCS table over words.
  std::vector<std::vector<std::uint32_t>> lcs(n + 1, std::vector<std::uint32_t>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      lcs[i][j] = (a[i] == b[j]) ? lcs[i + 1][j + 1] + 1
                                 : std::max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }

  std::vector<std::pair<std::string, std::string>> spans;
  std::size_t i = 0, j = 0;
  while (i < n || j < m) {
    if (i < n && j < m && a[i] == b[j]) {
      ++i;
      ++j;
      continue;
    }
    // Collect one maximal non-common run on each side.
    std::size_t ai = i, bj = j;
    while (ai < n || bj < m) {
      if (ai < n && bj < m && a[ai] == b[bj]) break;
      if (ai < n && (bj >= m || lcs[ai + 1][bj] >= lcs[ai][bj + 1])) {
        ++ai;
      } else {
        ++bj;
      }
    }
    std::string left = join_words(a, i, ai);
    std::string right = join_words(b, j, bj);
    if (!left.empty() || !right.empty()) spans.emplace_back(std::move(left), std::move(right));
    i = ai;
    j = bj;
  }
  return spans;
}

std::string ProbePlan::render() const {
  std::string out;
  if (differing_spans.empty()) {
    out += "The two prompts are textually identical; probe behavior and tone instead.\n";
  } else {
    out += "Spans present in only one prompt:\n";
    for (const auto& [left, right] : differing_spans) {
      out += "- A: \"" + left + "\" | B: \"" + right + "\"\n";
    }
  }
  if (!suggested_questions.empty()) {
    out += "Suggested questions:\n";
    for (std::size_t i = 0; i < suggested_questions.size(); ++i) {
      out += std::to_string(i + 1) + ". " + suggested_questions[i] + "\n";
    }
  }
  if (!rationale.empty()) out += "Analysis notes: " + rationale + "\n";
  return out;
}

namespace {

std::string strip_list_marker(const std::string& line) {
  std::size_t i = 0;
  while (i < line.size() && (std::isdigit(static_cast<unsigned char>(line[i])))) ++i;
  if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) {
    ++i;
  } else {
    i = 0;
    if (i < line.size() && (line[i] == '-' || line[i] == '*')) ++i;
  }
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  return line.substr(i);
}

std::vector<std::string> parse_questions(const std::string& reply) {
  std::vector<std::string> questions;
  for (const auto& raw : split_lines(reply)) {
    std::string line = trim(raw);
    if (line.empty()) continue;
    line = strip_list_marker(line);
    if (!line.empty()) questions.push_back(line);
  }
  return questions;
}

}  // namespace

AnalysisResult run_analysis(const Scenario& s, const BackendProfile& analysis_backend,
                            std::uint64_t seed) {
  AnalysisResult result;
  result.plan.differing_spans = diff_spans(s.original_prompt, s.sanitized_prompt);

  std::string diff_text;
  for (const auto& [left, right] : result.plan.differing_spans) {
    diff_text += "A: \"" + left + "\" | B: \"" + right + "\"\n";
  }

  std::vector<ChatMessage> conv{
      ChatMessage::make_system(prompts::kAnalysisSystemV1),
      ChatMessage::make_user(prompts::render_analysis_user(
          s.task_description, s.original_prompt, s.sanitized_prompt, diff_text))};

  result.meta.attempts = 0;
  const int max_asks = 3;  // one ask plus two re-asks
  for (int ask = 1; ask <= max_asks; ++ask) {
    Completion reply = complete(analysis_backend, conv, {}, seed);
    ++result.backend_calls;
    result.meta.attempts += reply.meta.attempts;
    result.meta.request_tokens += reply.meta.request_tokens;
    result.meta.response_tokens += reply.meta.response_tokens;
    conv.push_back(reply.message);
    auto questions = parse_questions(reply.message.content);
    if (!questions.empty()) {
      result.plan.suggested_questions = std::move(questions);
      result.plan.rationale = "questions proposed from the span diff";
      result.exchange = std::move(conv);
      return result;
    }
    if (ask < max_asks)
      conv.push_back(
          ChatMessage::make_user("Reply with at least one question, one per line."));
  }
  throw Error(errkind::plan_generation_failed,
              "analysis backend produced no questions after 3 asks");
}

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::original: return "original";
    case Decision::sanitized: return "sanitized";
    case Decision::dont_know: return "dont_know";
  }
  return "dont_know";
}

Decision decision_from_string(std::string_view s) {
  if (s == "original") return Decision::original;
  if (s == "sanitized") return Decision::sanitized;
  if (s == "dont_know") return Decision::dont_know;
  throw Error(errkind::precondition, "unknown decision '" + std::string(s) + "'");
}

nlohmann::json Verdict::to_json() const {
  return nlohmann::json{{"decision", to_string(decision)},
                        {"rationale", rationale},
                        {"questions_used", questions_used}};
}

Verdict Verdict::from_json(const nlohmann::json& j) {
  Verdict v;
  v.decision = decision_from_string(j.at("decision").get<std::string>());
  v.rationale = j.value("rationale", std::string());
  v.questions_used = j.at("questions_used").get<int>();
  return v;
}

const std::vector<ToolSpec>& JudgeSession::tool_schemas() {
  static const std::vector<ToolSpec> schemas = [] {
    std::vector<ToolSpec> out;
    ToolSpec ask;
    ask.name = kAskTool;
    ask.description = "Send the target assistant one question and get its answer.";
    ask.parameters = nlohmann::json{
        {"type", "object"},
        {"properties",
         nlohmann::json{{"question", nlohmann::json{{"type", "string"},
                                                    {"description", "The question to ask."}}}}},
        {"required", nlohmann::json::array({"question"})}};
    out.push_back(std::move(ask));

    ToolSpec verdict;
    verdict.name = kVerdictTool;
    verdict.description =
        "Declare which system prompt the target is running. decision must be "
        "\"prompt_a\", \"prompt_b\", or \"dont_know\".";
    verdict.parameters = nlohmann::json{
        {"type", "object"},
        {"properties",
         nlohmann::json{
             {"decision",
              nlohmann::json{{"type", "string"},
                             {"enum", nlohmann::json::array({"prompt_a", "prompt_b",
                                                             "dont_know"})}}},
             {"rationale", nlohmann::json{{"type", "string"}}}}},
        {"required", nlohmann::json::array({"decision"})}};
    out.push_back(std::move(verdict));
    return out;
  }();
  return schemas;
}

JudgeSession::JudgeSession(const Scenario& s, const ProbePlan& plan,
                           const BackendProfile& judge_backend, std::uint64_t seed,
                           const std::string& prompt_template)
    : backend_(judge_backend), seed_(seed), question_budget_(s.question_budget) {
  // Prompt A is the confidential prompt, Prompt B the cleaned one; the judge
  // is entitled to both (the arm stays hidden).
  conversation_.push_back(ChatMessage::make_system(prompts::render_judge_system(
      s.task_description, s.original_prompt, s.sanitized_prompt, plan.render(),
      s.question_budget,
      prompt_template.empty() ? prompts::kJudgeSystemV1 : prompt_template.c_str())));
}

namespace {

std::optional<Decision> wire_decision(const std::string& value) {
  if (value == "prompt_a") return Decision::original;
  if (value == "prompt_b") return Decision::sanitized;
  if (value == "dont_know") return Decision::dont_know;
  return std::nullopt;
}

}  // namespace

JudgeAction JudgeSession::next_turn() {
  JudgeAction action;
  action.meta.attempts = 0;
  const int max_asks = 3;  // one ask plus two re-asks
  for (int ask = 1; ask <= max_asks; ++ask) {
    Completion reply = complete(backend_, conversation_, tool_schemas(), seed_);
    ++action.backend_calls;
    action.meta.attempts += reply.meta.attempts;
    action.meta.request_tokens += reply.meta.request_tokens;
    action.meta.response_tokens += reply.meta.response_tokens;
    conversation_.push_back(reply.message);
    action.new_messages.push_back(reply.message);

    const ChatMessage& msg = reply.message;
    if (reply.meta.tool_call_count == 1 && msg.is_tool_call()) {
      if (msg.tool_name == kAskTool && msg.tool_arguments.contains("question") &&
          msg.tool_arguments["question"].is_string()) {
        const std::string question = msg.tool_arguments["question"].get<std::string>();
        if (!question.empty()) {
          if (questions_used_ >= question_budget_) {
            // The judge tried to overshoot the budget: forced abstention.
            action.is_question = false;
            action.verdict = {Decision::dont_know, "budget_exhausted", questions_used_};
            return action;
          }
          ++questions_used_;
          pending_call_id_ = msg.tool_call_id;
          action.is_question = true;
          action.question = question;
          return action;
        }
      } else if (msg.tool_name == kVerdictTool && msg.tool_arguments.contains("decision") &&
                 msg.tool_arguments["decision"].is_string()) {
        auto decision = wire_decision(msg.tool_arguments["decision"].get<std::string>());
        if (decision) {
          action.is_question = false;
          action.verdict.decision = *decision;
          action.verdict.rationale = msg.tool_arguments.value("rationale", std::string());
          action.verdict.questions_used = questions_used_;
          return action;
        }
      }
    }
    if (ask < max_asks) {
      // A dangling tool call must be answered with a tool result to keep the
      // wire protocol valid; plain text gets a user-role nudge.
      ChatMessage corrective =
          msg.is_tool_call()
              ? ChatMessage::make_tool_result(msg.tool_name, msg.tool_call_id,
                                              prompts::kJudgeCorrectiveV1)
              : ChatMessage::make_user(prompts::kJudgeCorrectiveV1);
      conversation_.push_back(corrective);
      action.new_messages.push_back(corrective);
    }
  }
  throw Error(errkind::malformed_judge_action,
              "judge backend produced no usable tool call after 3 asks");
}

const ChatMessage& JudgeSession::provide_answer(const std::string& oracle_reply) {
  conversation_.push_back(
      ChatMessage::make_tool_result(kAskTool, pending_call_id_, oracle_reply));
  pending_call_id_.clear();
  return conversation_.back();
}

}  // namespace leakprobe
