#pragma once

#include <json.hpp>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "leakprobe/toml.hpp"

namespace leakprobe {

enum class Arm { original, sanitized };
std::string_view to_string(Arm a);
Arm arm_from_string(std::string_view s);

struct Substitution {
  std::string secret;      // confidential span that must appear in the confidential prompt
  std::string substitute;  // plausible replacement appearing in the cleaned prompt
};

enum class MarkerTarget { original, sanitized };

// The prompt pair under test plus everything needed to run and score trials.
struct Scenario {
  std::string id;
  std::string original_prompt;
  std::string sanitized_prompt;
  std::vector<Substitution> substitutions;
  std::vector<std::string> markers;
  MarkerTarget marker_target = MarkerTarget::sanitized;
  std::string task_description;
  int trials_per_arm = 40;
  int question_budget = 5;

  const std::string& prompt_for(Arm arm) const {
    return arm == Arm::original ? original_prompt : sanitized_prompt;
  }
};

enum class LeakSource { secret, marker, substitute };
std::string_view to_string(LeakSource s);
LeakSource leak_source_from_string(std::string_view s);

struct LeakFinding {
  std::string matched_span;  // normalized form of the needle that matched
  LeakSource source = LeakSource::secret;
  std::size_t position = 0;  // character offset into the normalized response
  int trial_turn = 0;        // index of the oracle response it was found in

  nlohmann::json to_json() const;
  static LeakFinding from_json(const nlohmann::json& j);
};

struct Violation {
  std::string field;
  std::string message;
};

// Returns every violated invariant; empty means valid.
std::vector<Violation> validate_scenario(const Scenario& s);

// Applies substitutions in list order (each pass replaces every occurrence,
// left to right, non-overlapping), then appends the markers once in a trailing
// instruction block. Throws Error(precondition) when a secret is absent or a
// marker is already present.
std::string sanitize_prompt(const std::string& original,
                            const std::vector<Substitution>& substitutions,
                            const std::vector<std::string>& markers);

// String-matching leak detector. Matching happens on normalized text
// (ASCII case fold, whitespace runs collapsed). Arm original looks for
// secrets, arm sanitized for markers and substitutes (marker_target moves
// markers to the other side).
std::vector<LeakFinding> detect_leak(std::string_view response, const Scenario& s, Arm arm,
                                     int trial_turn = 0);

// The needles detect_leak scans for on the given arm, normalized.
std::vector<std::pair<std::string, LeakSource>> leak_needles(const Scenario& s, Arm arm);

Scenario scenario_from_toml(const toml::Value& doc);
Scenario load_scenario_file(const std::string& path);

// Serializes the effective scenario back to TOML (run-directory snapshot).
std::string scenario_to_toml(const Scenario& s);

}  // namespace leakprobe
