#include "leakprobe/store.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>

#include "leakprobe/util.hpp"

namespace leakprobe {

namespace fs = std::filesystem;

nlohmann::json RunManifest::to_json() const {
  return nlohmann::json{{"run_id", run_id},
                        {"started_at", started_at},
                        {"finished_at", finished_at},
                        {"scenario_file_hash", scenario_file_hash},
                        {"config_fingerprint", config_fingerprint},
                        {"tool_version", tool_version},
                        {"scenario_id", scenario_id},
                        {"tier", tier},
                        {"dont_know_policy", dont_know_policy},
                        {"question_budget", question_budget},
                        {"profiles", profiles}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.started_at = j.at("started_at").get<std::string>();
  m.finished_at = j.value("finished_at", std::string());
  m.scenario_file_hash = j.at("scenario_file_hash").get<std::string>();
  m.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  m.tool_version = j.at("tool_version").get<std::string>();
  m.scenario_id = j.value("scenario_id", std::string());
  m.tier = j.value("tier", std::string());
  m.dont_know_policy = j.value("dont_know_policy", std::string("count_as_not_original"));
  m.question_budget = j.value("question_budget", 5);
  m.profiles = j.value("profiles", nlohmann::json::object());
  return m;
}

TrialLog::TrialLog(const std::string& path) : path_(path) {
  out_.open(path, std::ios::out | std::ios::trunc | std::ios::binary);
  if (!out_.is_open()) throw Error(errkind::io_error, "cannot open '" + path + "' for writing");
  open_ = true;
}

TrialLog::~TrialLog() { close(); }

void TrialLog::append(const TrialRecord& record) {
  std::lock_guard<std::mutex> lock(mu_);
  if (!open_) throw Error(errkind::io_error, "append to closed trial log '" + path_ + "'");
  out_ << record.to_json().dump() << '\n';
  out_.flush();
  if (!out_.good())
    throw Error(errkind::io_error, "write to '" + path_ + "' failed (disk full?)");
}

void TrialLog::close() {
  std::lock_guard<std::mutex> lock(mu_);
  if (open_) {
    out_.close();
    open_ = false;
  }
}

std::string manifest_path(const std::string& run_dir) {
  return (fs::path(run_dir) / "manifest.json").string();
}
std::string trials_path(const std::string& run_dir) {
  return (fs::path(run_dir) / "trials.jsonl").string();
}
std::string report_path(const std::string& run_dir, ReportFormat format, bool redacted) {
  std::string name = redacted ? "report.redacted" : "report";
  name += format == ReportFormat::json ? ".json" : ".md";
  return (fs::path(run_dir) / name).string();
}
std::string scenario_snapshot_path(const std::string& run_dir) {
  return (fs::path(run_dir) / "scenario.toml").string();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::out | std::ios::trunc | std::ios::binary);
  if (!out.is_open()) throw Error(errkind::io_error, "cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out.good()) throw Error(errkind::io_error, "write to '" + path + "' failed");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) throw Error(errkind::io_error, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LoadedRun load_run(const std::string& run_dir) {
  LoadedRun run;
  const std::string mpath = manifest_path(run_dir);
  if (!fs::exists(mpath))
    throw Error(errkind::missing_manifest, "no manifest.json in '" + run_dir + "'");
  std::string manifest_text = read_text_file(mpath);
  if (trim(manifest_text).empty())
    throw Error(errkind::missing_manifest, "manifest.json in '" + run_dir + "' is empty");
  try {
    run.manifest = RunManifest::from_json(nlohmann::json::parse(manifest_text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(errkind::missing_manifest,
                std::string("manifest.json is not valid JSON: ") + e.what());
  }

  const std::string tpath = trials_path(run_dir);
  if (!fs::exists(tpath)) return run;
  const std::string text = read_text_file(tpath);

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    const bool has_newline = end != std::string::npos;
    std::string_view line(text.data() + start, (has_newline ? end : text.size()) - start);
    ++line_no;
    if (!trim(line).empty()) {
      try {
        run.trials.push_back(TrialRecord::from_json(nlohmann::json::parse(line)));
      } catch (const std::exception& e) {
        // Only a line the writer never finished (no trailing newline) counts
        // as crash truncation; a complete corrupt line is a real error.
        if (!has_newline) {
          // A crashed run leaves a half-written last line; keep what parsed.
          run.truncated_tail = true;
          run.truncation_notice = "trials.jsonl line " + std::to_string(line_no) +
                                  " is truncated and was skipped";
          log_warn(run.truncation_notice);
        } else {
          throw Error(errkind::io_error, "trials.jsonl line " + std::to_string(line_no) +
                                             " is malformed: " + e.what());
        }
      }
    }
    if (!has_newline) break;
    start = end + 1;
  }
  return run;
}

std::optional<Scenario> load_run_scenario(const std::string& run_dir) {
  const std::string path = scenario_snapshot_path(run_dir);
  if (!fs::exists(path)) return std::nullopt;
  return load_scenario_file(path);
}

namespace {

nlohmann::json verdict_table(const std::vector<TrialRecord>& trials, Arm arm) {
  long original = 0, sanitized = 0, dont_know = 0, aborted = 0;
  for (const auto& t : trials) {
    if (t.arm != arm) continue;
    if (t.status == TrialStatus::aborted) {
      ++aborted;
      continue;
    }
    if (!t.verdict) continue;
    switch (t.verdict->decision) {
      case Decision::original: ++original; break;
      case Decision::sanitized: ++sanitized; break;
      case Decision::dont_know: ++dont_know; break;
    }
  }
  return nlohmann::json{{"says_original", original},
                        {"says_sanitized", sanitized},
                        {"dont_know", dont_know},
                        {"aborted", aborted}};
}

nlohmann::json leak_summary(const std::vector<TrialRecord>& trials) {
  long total = 0, secret = 0, marker = 0, substitute = 0, trials_with = 0;
  for (const auto& t : trials) {
    if (!t.leak_findings.empty()) ++trials_with;
    for (const auto& f : t.leak_findings) {
      ++total;
      switch (f.source) {
        case LeakSource::secret: ++secret; break;
        case LeakSource::marker: ++marker; break;
        case LeakSource::substitute: ++substitute; break;
      }
    }
  }
  return nlohmann::json{{"total_findings", total},
                        {"trials_with_findings", trials_with},
                        {"by_source", nlohmann::json{{"secret", secret},
                                                     {"marker", marker},
                                                     {"substitute", substitute}}}};
}

// Up to N verbatim Q/A pairs from trials that produced findings.
nlohmann::json example_exchanges(const std::vector<TrialRecord>& trials, int max_examples) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : trials) {
    if (static_cast<int>(out.size()) >= max_examples) break;
    if (t.leak_findings.empty()) continue;
    const int turn = t.leak_findings.front().trial_turn;
    // Walk the oracle channel only; guard entries may sit between Q and A.
    int pair = -1;
    std::string question, answer, pending_question;
    for (const auto& e : t.transcript) {
      if (e.channel != Channel::oracle) continue;
      if (e.message.role == Role::user) {
        pending_question = e.message.content;
      } else if (e.message.role == Role::assistant && !pending_question.empty()) {
        ++pair;
        if (pair == turn) {
          question = pending_question;
          answer = e.message.content;
          break;
        }
        pending_question.clear();
      }
    }
    if (question.empty() && answer.empty()) continue;
    out.push_back(nlohmann::json{{"trial_id", t.trial_id},
                                 {"question", question},
                                 {"response", answer}});
  }
  return out;
}

void redact_json_strings(nlohmann::json& value, const Scenario& scenario) {
  if (value.is_string()) {
    std::string s = value.get<std::string>();
    for (const auto& sub : scenario.substitutions)
      s = replace_normalized(s, sub.secret, sub.substitute);
    for (std::size_t i = 0; i < scenario.markers.size(); ++i)
      s = replace_normalized(s, scenario.markers[i],
                             "[marker-" + std::to_string(i + 1) + "]");
    value = s;
  } else if (value.is_object() || value.is_array()) {
    for (auto& item : value) redact_json_strings(item, scenario);
  }
}

}  // namespace

nlohmann::json build_report(const RunManifest& manifest, const std::vector<TrialRecord>& trials,
                            const ReportOptions& options, const Scenario* scenario) {
  // Canonical trial order so in-run and loaded-from-disk reports agree.
  std::vector<TrialRecord> sorted = trials;
  std::sort(sorted.begin(), sorted.end(),
            [](const TrialRecord& a, const TrialRecord& b) { return a.trial_id < b.trial_id; });

  AdvantageEstimate estimate = estimate_advantage(sorted, options.policy, options.ci_level);
  const DontKnowPolicy other_policy = options.policy == DontKnowPolicy::count_as_not_original
                                          ? DontKnowPolicy::exclude
                                          : DontKnowPolicy::count_as_not_original;
  nlohmann::json alternative;
  try {
    alternative = estimate_advantage(sorted, other_policy, options.ci_level).to_json();
  } catch (const Error&) {
    alternative = nullptr;  // e.g. every verdict was dont_know under exclude
  }

  std::vector<int> budgets = options.curve_budgets;
  if (budgets.empty()) {
    for (int b = 1; b <= options.question_budget; ++b) budgets.push_back(b);
  }
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [budget, est] : advantage_curve(sorted, budgets, options.policy,
                                                   options.ci_level)) {
    curve.push_back(nlohmann::json{{"budget", budget},
                                   {"advantage", est.advantage},
                                   {"ci_low", est.ci_low},
                                   {"ci_high", est.ci_high}});
  }

  Effort totals;
  long scheduled = static_cast<long>(sorted.size());
  long completed = 0, aborted = 0;
  for (const auto& t : sorted) {
    totals.oracle_queries += t.effort.oracle_queries;
    totals.judge_calls += t.effort.judge_calls;
    totals.request_tokens += t.effort.request_tokens;
    totals.response_tokens += t.effort.response_tokens;
    (t.status == TrialStatus::completed ? completed : aborted) += 1;
  }

  nlohmann::json report{
      {"manifest", manifest.to_json()},
      {"scenario_id", manifest.scenario_id},
      {"tier", manifest.tier},
      {"policy", std::string(to_string(options.policy))},
      {"advantage", estimate.to_json()},
      {"advantage_alternative_policy", alternative},
      {"verdicts", nlohmann::json{{"original", verdict_table(sorted, Arm::original)},
                                  {"sanitized", verdict_table(sorted, Arm::sanitized)}}},
      {"dont_know", nlohmann::json{{"original", estimate.dont_know_original},
                                   {"sanitized", estimate.dont_know_sanitized}}},
      {"leaks", leak_summary(sorted)},
      {"effort", nlohmann::json{{"oracle_queries", totals.oracle_queries},
                                {"judge_calls", totals.judge_calls},
                                {"request_tokens", totals.request_tokens},
                                {"response_tokens", totals.response_tokens}}},
      {"advantage_curve", std::move(curve)},
      {"trials", nlohmann::json{{"scheduled", scheduled},
                                {"completed", completed},
                                {"aborted", aborted}}},
      {"example_exchanges", example_exchanges(sorted, options.max_example_exchanges)},
      {"redacted", options.redact}};

  if (options.redact) {
    if (!scenario)
      throw Error(errkind::config_error, "redaction requires the scenario snapshot");
    redact_json_strings(report, *scenario);
  }
  return report;
}

namespace {

std::string fmt3(double v) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(3);
  ss << v;
  return ss.str();
}

std::string quote_block(const std::string& text) {
  std::string out;
  for (const auto& line : split_lines(text)) out += "> " + line + "\n";
  if (out.empty()) out = ">\n";
  return out;
}

}  // namespace

std::string render_report_markdown(const nlohmann::json& report) {
  const auto& est = report.at("advantage");
  const auto& manifest = report.at("manifest");
  std::string md;
  md += "# Prompt-leakage report: " + report.at("scenario_id").get<std::string>() + " (tier " +
        report.at("tier").get<std::string>() + ")\n\n";
  md += "- run: `" + manifest.at("run_id").get<std::string>() + "`\n";
  md += "- started: " + manifest.at("started_at").get<std::string>() +
        ", finished: " + manifest.at("finished_at").get<std::string>() + "\n";
  md += "- tool: " + manifest.at("tool_version").get<std::string>() + ", config fingerprint `" +
        manifest.at("config_fingerprint").get<std::string>().substr(0, 12) + "...`\n";
  if (report.at("redacted").get<bool>()) md += "- redacted: secret spans masked\n";
  md += "\n## Advantage\n\n";
  md += "**" + fmt3(est.at("advantage").get<double>()) + "** (" +
        std::to_string(static_cast<int>(est.at("ci_level").get<double>() * 100)) + "% CI [" +
        fmt3(est.at("ci_low").get<double>()) + ", " + fmt3(est.at("ci_high").get<double>()) +
        "], " + est.at("ci_method").get<std::string>() + ", policy " +
        report.at("policy").get<std::string>() + ")\n\n";

  md += "| arm | n | says original | says sanitized | don't know | aborted |\n";
  md += "|-----|---|---------------|----------------|------------|---------|\n";
  for (const char* arm : {"original", "sanitized"}) {
    const auto& row = report.at("verdicts").at(arm);
    long n = row.at("says_original").get<long>() + row.at("says_sanitized").get<long>() +
             row.at("dont_know").get<long>();
    md += std::string("| ") + arm + " | " + std::to_string(n) + " | " +
          std::to_string(row.at("says_original").get<long>()) + " | " +
          std::to_string(row.at("says_sanitized").get<long>()) + " | " +
          std::to_string(row.at("dont_know").get<long>()) + " | " +
          std::to_string(row.at("aborted").get<long>()) + " |\n";
  }

  const auto& leaks = report.at("leaks");
  md += "\n## Leak findings\n\n";
  if (leaks.at("total_findings").get<long>() == 0) {
    md += "Zero leak findings across all trials.\n";
  } else {
    md += std::to_string(leaks.at("total_findings").get<long>()) + " finding(s) in " +
          std::to_string(leaks.at("trials_with_findings").get<long>()) + " trial(s) — secrets: " +
          std::to_string(leaks.at("by_source").at("secret").get<long>()) + ", markers: " +
          std::to_string(leaks.at("by_source").at("marker").get<long>()) + ", substitutes: " +
          std::to_string(leaks.at("by_source").at("substitute").get<long>()) + ".\n";
  }

  const auto& effort = report.at("effort");
  md += "\n## Effort\n\n";
  md += "- oracle queries: " + std::to_string(effort.at("oracle_queries").get<long>()) + "\n";
  md += "- judge/analysis calls: " + std::to_string(effort.at("judge_calls").get<long>()) + "\n";
  md += "- tokens: " + std::to_string(effort.at("request_tokens").get<long>()) + " in / " +
        std::to_string(effort.at("response_tokens").get<long>()) + " out\n";

  md += "\n## Advantage vs. question budget\n\n";
  md += "| budget | advantage | CI |\n|--------|-----------|----|\n";
  for (const auto& point : report.at("advantage_curve")) {
    md += "| " + std::to_string(point.at("budget").get<int>()) + " | " +
          fmt3(point.at("advantage").get<double>()) + " | [" +
          fmt3(point.at("ci_low").get<double>()) + ", " + fmt3(point.at("ci_high").get<double>()) +
          "] |\n";
  }

  const auto& examples = report.at("example_exchanges");
  if (!examples.empty()) {
    md += "\n## Example leaking exchanges\n";
    for (const auto& ex : examples) {
      md += "\n*Trial " + ex.at("trial_id").get<std::string>() + "*\n\n";
      md += quote_block("Q: " + ex.at("question").get<std::string>());
      md += quote_block("A: " + ex.at("response").get<std::string>());
    }
  }
  return md;
}

std::string render_report(const nlohmann::json& report, ReportFormat format) {
  if (format == ReportFormat::json) return report.dump(2) + "\n";
  return render_report_markdown(report);
}

}  // namespace leakprobe
