#include "leakprobe/target.hpp"

#include "leakprobe/prompts.hpp"
#include "leakprobe/util.hpp"

namespace leakprobe {

std::string_view to_string(TierLevel t) {
  switch (t) {
    case TierLevel::low: return "low";
    case TierLevel::medium: return "medium";
    case TierLevel::high: return "high";
  }
  return "low";
}

TierLevel tier_from_string(std::string_view s) {
  if (s == "low") return TierLevel::low;
  if (s == "medium") return TierLevel::medium;
  if (s == "high") return TierLevel::high;
  throw Error(errkind::config_error, "unknown tier '" + std::string(s) + "'");
}

SecurityTier make_tier(TierLevel level, const std::string& suffix_override,
                       std::optional<GuardConfig> guard) {
  SecurityTier tier;
  tier.level = level;
  if (level != TierLevel::low)
    tier.hardening_suffix =
        suffix_override.empty() ? prompts::kHardeningSuffixStandardV1 : suffix_override;
  if (level == TierLevel::high) {
    if (!guard) throw Error(errkind::config_error, "high tier requires a guard");
    tier.guard = std::move(guard);
  } else if (guard) {
    throw Error(errkind::config_error, "guard is only valid on the high tier");
  }
  return tier;
}

std::vector<Violation> validate_tier(const SecurityTier& tier, const Scenario& s) {
  std::vector<Violation> out;
  if (tier.level == TierLevel::high && !tier.guard)
    out.push_back({"guard", "high tier requires a guard"});
  if (tier.level != TierLevel::high && tier.guard)
    out.push_back({"guard", "guard present below high tier"});
  if (tier.level != TierLevel::low && tier.hardening_suffix.empty())
    out.push_back({"hardening_suffix", "medium/high tier requires a hardening suffix"});
  if (tier.level == TierLevel::low && !tier.hardening_suffix.empty())
    out.push_back({"hardening_suffix", "low tier must not carry a hardening suffix"});
  if (tier.guard) {
    const std::string refusal = normalize_for_match(tier.guard->refusal_text);
    for (const auto& sub : s.substitutions) {
      if (contains(refusal, normalize_for_match(sub.secret)))
        out.push_back({"refusal_text", "refusal_text contains secret '" + sub.secret + "'"});
    }
    for (const auto& m : s.markers) {
      if (contains(refusal, normalize_for_match(m)))
        out.push_back({"refusal_text", "refusal_text contains marker '" + m + "'"});
    }
  }
  return out;
}

std::string effective_system_prompt(const Scenario& s, Arm arm, const SecurityTier& tier) {
  std::string prompt = s.prompt_for(arm);
  if (tier.level != TierLevel::low) prompt += "\n\n" + tier.hardening_suffix;
  return prompt;
}

Oracle::Oracle(const Scenario& s, Arm arm, const SecurityTier& tier,
               const BackendProfile& backend, std::uint64_t seed)
    : arm_(arm), tier_(tier), backend_(backend), seed_(seed) {
  conversation_.push_back(
      ChatMessage::make_system(leakprobe::effective_system_prompt(s, arm, tier)));
}

Oracle::AskResult Oracle::ask(const std::string& user_text) {
  if (user_text.empty()) throw Error(errkind::precondition, "user_text must not be empty");
  conversation_.push_back(ChatMessage::make_user(user_text));

  AskResult result;
  if (tier_.level == TierLevel::high) {
    GuardedCompletion gc = guarded_complete(backend_, *tier_.guard, conversation_, seed_);
    conversation_.push_back(gc.message);
    result.response_text = gc.message.content;
    result.blocked = gc.blocked;
    result.guard_unparseable = gc.guard_unparseable;
    result.meta = gc.candidate_meta;
    result.guard_meta = gc.guard_meta;
    result.guard_exchange = std::move(gc.guard_exchange);
  } else {
    Completion c = complete(backend_, conversation_, {}, seed_);
    conversation_.push_back(c.message);
    result.response_text = c.message.content;
    result.meta = c.meta;
  }
  return result;
}

Oracle make_oracle(const Scenario& s, Arm arm, const SecurityTier& tier,
                   const BackendProfile& backend, std::uint64_t seed) {
  auto violations = validate_scenario(s);
  auto tier_violations = validate_tier(tier, s);
  violations.insert(violations.end(), tier_violations.begin(), tier_violations.end());
  if (!violations.empty()) {
    std::string msg = "scenario/tier invalid:";
    for (const auto& v : violations) msg += "\n  " + v.field + ": " + v.message;
    throw Error(errkind::invalid_scenario, msg);
  }
  return Oracle(s, arm, tier, backend, seed);
}

}  // namespace leakprobe
