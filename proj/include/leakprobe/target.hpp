#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "leakprobe/backend.hpp"
#include "leakprobe/scenario.hpp"

namespace leakprobe {

enum class TierLevel { low, medium, high };
std::string_view to_string(TierLevel t);
TierLevel tier_from_string(std::string_view s);

// low = bare model, medium = hardened prompt, high = hardened + guard filter.
struct SecurityTier {
  TierLevel level = TierLevel::low;
  std::string hardening_suffix;       // non-empty for medium/high
  std::optional<GuardConfig> guard;   // present only for high
};

// Builds a tier, applying the standard hardening preset when no suffix is
// given. A high tier requires a guard.
SecurityTier make_tier(TierLevel level, const std::string& suffix_override = "",
                       std::optional<GuardConfig> guard = std::nullopt);

std::vector<Violation> validate_tier(const SecurityTier& tier, const Scenario& s);

// The tested agent: one arm's prompt bound to a backend behind a tier.
// Single-trial, single-owner state.
class Oracle {
 public:
  Oracle(const Scenario& s, Arm arm, const SecurityTier& tier, const BackendProfile& backend,
         std::uint64_t seed);

  struct AskResult {
    std::string response_text;
    bool blocked = false;
    bool guard_unparseable = false;
    CompletionMeta meta;
    CompletionMeta guard_meta;
    std::vector<ChatMessage> guard_exchange;
  };

  // Appends the question, obtains the (possibly guarded) reply, appends it,
  // returns the reply. Conversation persists across calls.
  AskResult ask(const std::string& user_text);

  Arm arm() const { return arm_; }
  const std::string& effective_system_prompt() const { return conversation_.front().content; }
  const std::vector<ChatMessage>& conversation() const { return conversation_; }
  TierLevel tier_level() const { return tier_.level; }

 private:
  Arm arm_;
  SecurityTier tier_;
  BackendProfile backend_;
  std::uint64_t seed_;
  std::vector<ChatMessage> conversation_;
};

// Validates the scenario and constructs a fresh oracle; hardening is applied
// identically to both arms. Throws Error(invalid_scenario).
Oracle make_oracle(const Scenario& s, Arm arm, const SecurityTier& tier,
                   const BackendProfile& backend, std::uint64_t seed = 0);

// The effective system prompt make_oracle would install (exposed for tests).
std::string effective_system_prompt(const Scenario& s, Arm arm, const SecurityTier& tier);

}  // namespace leakprobe
