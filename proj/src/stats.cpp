#include "leakprobe/stats.hpp"

#include <algorithm>
#include <cmath>

#include "leakprobe/util.hpp"

namespace leakprobe {

std::string_view to_string(DontKnowPolicy p) {
  return p == DontKnowPolicy::count_as_not_original ? "count_as_not_original" : "exclude";
}

DontKnowPolicy policy_from_string(std::string_view s) {
  if (s == "count_as_not_original") return DontKnowPolicy::count_as_not_original;
  if (s == "exclude") return DontKnowPolicy::exclude;
  throw Error(errkind::config_error, "unknown dont_know_policy '" + std::string(s) + "'");
}

nlohmann::json AdvantageEstimate::to_json() const {
  return nlohmann::json{{"n_original", n_original},
                        {"n_sanitized", n_sanitized},
                        {"k_original", k_original},
                        {"k_sanitized", k_sanitized},
                        {"dont_know_original", dont_know_original},
                        {"dont_know_sanitized", dont_know_sanitized},
                        {"advantage", advantage},
                        {"ci_low", ci_low},
                        {"ci_high", ci_high},
                        {"ci_level", ci_level},
                        {"ci_method", ci_method},
                        {"dont_know_policy", std::string(to_string(policy))}};
}

// Wichura's algorithm AS241 (PPND16): maximum relative error about 1e-16.
double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw Error(errkind::precondition, "inverse_normal_cdf needs p in (0, 1)");

  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num = (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                             6.7265770927008700853e+4) *
                                r +
                            4.5921953931549871457e+4) *
                               r +
                           1.3731693765509461125e+4) *
                              r +
                          1.9715909503065514427e+3) *
                             r +
                         1.3314166789178437745e+2) *
                            r +
                        3.3871328727963666080e0);
    const double den = (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                             3.9307895800092710610e+4) *
                                r +
                            2.1213794301586595867e+4) *
                               r +
                           5.3941960214247511077e+3) *
                              r +
                          6.8718700749205790830e+2) *
                             r +
                         4.2313330701600911252e+1) *
                            r +
                        1.0);
    return q * num / den;
  }

  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    const double num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                             2.41780725177450611770e-1) *
                                r +
                            1.27045825245236838258e0) *
                               r +
                           3.64784832476320460504e0) *
                              r +
                          5.76949722146069140550e0) *
                             r +
                         4.63033784615654529590e0) *
                            r +
                        1.42343711074968357734e0);
    const double den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                             1.51986665636164571966e-2) *
                                r +
                            1.48103976427480074590e-1) *
                               r +
                           6.89767334985100004550e-1) *
                              r +
                          1.67638483018380384940e0) *
                             r +
                         2.05319162663775882187e0) *
                            r +
                        1.0);
    val = num / den;
  } else {
    r -= 5.0;
    const double num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                             1.24266094738807843860e-3) *
                                r +
                            2.65321895265761230930e-2) *
                               r +
                           2.96560571828504891230e-1) *
                              r +
                          1.78482653991729133580e0) *
                             r +
                         5.46378491116411436990e0) *
                            r +
                        6.65790464350110377720e0);
    const double den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                             1.84631831751005468180e-5) *
                                r +
                            7.86869131145613259100e-4) *
                               r +
                           1.48753612908506148525e-2) *
                              r +
                          1.36929880922735805310e-1) *
                             r +
                         5.99832206555887937690e-1) *
                            r +
                        1.0);
    val = num / den;
  }
  return q < 0.0 ? -val : val;
}

std::pair<double, double> wilson_interval(long k, long n, double level) {
  if (n < 1 || k < 0 || k > n)
    throw Error(errkind::precondition, "wilson_interval needs 0 <= k <= n, n >= 1");
  if (!(level > 0.0 && level < 1.0))
    throw Error(errkind::precondition, "confidence level must be in (0, 1)");
  const double z = inverse_normal_cdf(0.5 + level / 2.0);
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (phat + z2 / (2.0 * nn)) / denom;
  const double radius =
      z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - radius), std::min(1.0, center + radius)};
}

std::pair<double, double> confidence_interval(long k1, long n1, long k2, long n2, double level) {
  const auto [l1, u1] = wilson_interval(k1, n1, level);
  const auto [l2, u2] = wilson_interval(k2, n2, level);
  const double p1 = static_cast<double>(k1) / static_cast<double>(n1);
  const double p2 = static_cast<double>(k2) / static_cast<double>(n2);
  const double diff = p1 - p2;
  double low = diff - std::sqrt((p1 - l1) * (p1 - l1) + (u2 - p2) * (u2 - p2));
  double high = diff + std::sqrt((u1 - p1) * (u1 - p1) + (p2 - l2) * (p2 - l2));
  low = std::max(-1.0, low);
  high = std::min(1.0, high);
  return {low, high};
}

namespace {

struct ArmCounts {
  long completed = 0;
  long says_original = 0;
  long dont_know = 0;
};

AdvantageEstimate estimate_from_counts(const ArmCounts& orig, const ArmCounts& sani,
                                       DontKnowPolicy policy, double ci_level) {
  AdvantageEstimate est;
  est.policy = policy;
  est.ci_level = ci_level;
  est.k_original = orig.says_original;
  est.k_sanitized = sani.says_original;
  est.dont_know_original = orig.dont_know;
  est.dont_know_sanitized = sani.dont_know;
  if (policy == DontKnowPolicy::count_as_not_original) {
    est.n_original = orig.completed;
    est.n_sanitized = sani.completed;
  } else {
    est.n_original = orig.completed - orig.dont_know;
    est.n_sanitized = sani.completed - sani.dont_know;
  }
  if (est.n_original < 1)
    throw Error(errkind::insufficient_trials,
                "no usable trials on arm original under policy " +
                    std::string(to_string(policy)));
  if (est.n_sanitized < 1)
    throw Error(errkind::insufficient_trials,
                "no usable trials on arm sanitized under policy " +
                    std::string(to_string(policy)));
  est.advantage = static_cast<double>(est.k_original) / static_cast<double>(est.n_original) -
                  static_cast<double>(est.k_sanitized) / static_cast<double>(est.n_sanitized);
  std::tie(est.ci_low, est.ci_high) =
      confidence_interval(est.k_original, est.n_original, est.k_sanitized, est.n_sanitized,
                          ci_level);
  return est;
}

}  // namespace

AdvantageEstimate estimate_advantage(const std::vector<TrialRecord>& trials,
                                     DontKnowPolicy policy, double ci_level) {
  ArmCounts orig, sani;
  for (const auto& t : trials) {
    if (t.status != TrialStatus::completed || !t.verdict) continue;
    ArmCounts& c = t.arm == Arm::original ? orig : sani;
    ++c.completed;
    if (t.verdict->decision == Decision::original) ++c.says_original;
    if (t.verdict->decision == Decision::dont_know) ++c.dont_know;
  }
  return estimate_from_counts(orig, sani, policy, ci_level);
}

std::vector<std::pair<int, AdvantageEstimate>> advantage_curve(
    const std::vector<TrialRecord>& trials, const std::vector<int>& budgets,
    DontKnowPolicy policy, double ci_level) {
  for (std::size_t i = 1; i < budgets.size(); ++i) {
    if (budgets[i] < budgets[i - 1])
      throw Error(errkind::precondition, "budgets must be sorted ascending");
  }
  std::vector<std::pair<int, AdvantageEstimate>> curve;
  curve.reserve(budgets.size());
  for (int budget : budgets) {
    ArmCounts orig, sani;
    for (const auto& t : trials) {
      if (t.status != TrialStatus::completed || !t.verdict) continue;
      ArmCounts& c = t.arm == Arm::original ? orig : sani;
      ++c.completed;
      // A verdict reached after more than `budget` questions would not exist
      // had the judge been stopped there.
      Decision decision =
          t.verdict->questions_used <= budget ? t.verdict->decision : Decision::dont_know;
      if (decision == Decision::original) ++c.says_original;
      if (decision == Decision::dont_know) ++c.dont_know;
    }
    curve.emplace_back(budget, estimate_from_counts(orig, sani, policy, ci_level));
  }
  return curve;
}

}  // namespace leakprobe
