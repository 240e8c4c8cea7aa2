#pragma once

#include <string>
#include <utility>
#include <vector>

#include "leakprobe/game.hpp"

namespace leakprobe {

enum class DontKnowPolicy { count_as_not_original, exclude };
std::string_view to_string(DontKnowPolicy p);
DontKnowPolicy policy_from_string(std::string_view s);

// The distinguishing advantage: P(judge says the confidential prompt | it is)
// minus P(judge says the confidential prompt | it is not), with a Newcombe
// interval around the difference. n_* are the policy-effective denominators.
struct AdvantageEstimate {
  long n_original = 0;
  long n_sanitized = 0;
  long k_original = 0;   // decision == original on the original arm
  long k_sanitized = 0;  // decision == original on the sanitized arm
  long dont_know_original = 0;
  long dont_know_sanitized = 0;
  double advantage = 0.0;
  double ci_low = -1.0;
  double ci_high = 1.0;
  double ci_level = 0.95;
  std::string ci_method = "newcombe-wilson";
  DontKnowPolicy policy = DontKnowPolicy::count_as_not_original;

  nlohmann::json to_json() const;
};

// Quantile of the standard normal distribution (Wichura's AS241).
double inverse_normal_cdf(double p);

// Wilson score interval for one proportion.
std::pair<double, double> wilson_interval(long k, long n, double level);

// Newcombe hybrid interval for a difference of two independent proportions,
// clamped to [-1, 1].
std::pair<double, double> confidence_interval(long k1, long n1, long k2, long n2, double level);

// Point estimate + interval from completed trials under the chosen
// don't-know policy. Aborted trials never contribute. Throws
// Error(insufficient_trials) when an arm has no usable trials.
AdvantageEstimate estimate_advantage(const std::vector<TrialRecord>& trials,
                                     DontKnowPolicy policy, double ci_level = 0.95);

// Advantage as a function of question budget: verdicts reached after more
// than b questions are treated as dont_know at budget b.
std::vector<std::pair<int, AdvantageEstimate>> advantage_curve(
    const std::vector<TrialRecord>& trials, const std::vector<int>& budgets,
    DontKnowPolicy policy, double ci_level = 0.95);

}  // namespace leakprobe
