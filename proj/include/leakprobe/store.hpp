#pragma once

#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "leakprobe/game.hpp"
#include "leakprobe/stats.hpp"

namespace leakprobe {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
  std::string run_id;
  std::string started_at;   // RFC 3339 UTC
  std::string finished_at;  // empty until the run ends
  std::string scenario_file_hash;
  std::string config_fingerprint;
  std::string tool_version = kToolVersion;
  std::string scenario_id;
  std::string tier;
  // Reporting defaults recorded with the run so `report` reproduces the
  // in-run document without extra flags.
  std::string dont_know_policy = "count_as_not_original";
  int question_budget = 5;
  // Effective backend parameters, snapshotted for auditability.
  nlohmann::json profiles = nlohmann::json::object();

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

// Append-only JSONL writer: one record per line, flushed per line, appends
// serialized under an internal lock. IO failures abort the run loudly.
class TrialLog {
 public:
  explicit TrialLog(const std::string& path);
  ~TrialLog();

  void append(const TrialRecord& record);  // throws Error(io_error)
  void close();
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::mutex mu_;
  std::ofstream out_;
  bool open_ = false;
};

struct LoadedRun {
  RunManifest manifest;
  std::vector<TrialRecord> trials;
  bool truncated_tail = false;
  std::string truncation_notice;
};

// Reads runs/{id}/: manifest.json and trials.jsonl. A truncated final trial
// line is skipped with a notice; malformed earlier lines raise io_error with
// the line number. Missing or empty manifest raises missing_manifest.
LoadedRun load_run(const std::string& run_dir);

// Loads the scenario snapshot stored in the run dir, if present.
std::optional<Scenario> load_run_scenario(const std::string& run_dir);

enum class ReportFormat { json, markdown };

struct ReportOptions {
  DontKnowPolicy policy = DontKnowPolicy::count_as_not_original;
  double ci_level = 0.95;
  bool redact = false;               // mask secrets/markers via the scenario table
  std::vector<int> curve_budgets;    // empty = 1..question_budget
  int question_budget = 5;           // used when curve_budgets is empty
  int max_example_exchanges = 3;
};

// Builds the machine-readable report document. The scenario is required for
// redaction and used for the leak summary context; pass nullptr when absent.
nlohmann::json build_report(const RunManifest& manifest, const std::vector<TrialRecord>& trials,
                            const ReportOptions& options, const Scenario* scenario);

std::string render_report_markdown(const nlohmann::json& report);

// Serializes the report in the requested format (json is dump(2) + '\n').
std::string render_report(const nlohmann::json& report, ReportFormat format);

// Standard file layout inside a run directory.
std::string manifest_path(const std::string& run_dir);
std::string trials_path(const std::string& run_dir);
std::string report_path(const std::string& run_dir, ReportFormat format, bool redacted);
std::string scenario_snapshot_path(const std::string& run_dir);

void write_text_file(const std::string& path, const std::string& content);  // io_error
std::string read_text_file(const std::string& path);                        // io_error

}  // namespace leakprobe
