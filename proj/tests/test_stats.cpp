#include <doctest.h>

#include <cmath>

#include "leakprobe/stats.hpp"
#include "leakprobe/util.hpp"

using namespace leakprobe;

namespace {

// ---- independent Wilson/Newcombe oracle (bisection quantile) --------------
// Kept free of any implementation code from src/stats.cpp on purpose.
namespace ci_oracle {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double z_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::pair<double, double> wilson(long k, long n, double level) {
  const double z = z_quantile(0.5 + level / 2.0);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double radius = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  return {std::max(0.0, center - radius), std::min(1.0, center + radius)};
}

std::pair<double, double> newcombe(long k1, long n1, long k2, long n2, double level) {
  const auto [l1, u1] = wilson(k1, n1, level);
  const auto [l2, u2] = wilson(k2, n2, level);
  const double p1 = static_cast<double>(k1) / static_cast<double>(n1);
  const double p2 = static_cast<double>(k2) / static_cast<double>(n2);
  const double d = p1 - p2;
  return {std::max(-1.0, d - std::hypot(p1 - l1, u2 - p2)),
          std::min(1.0, d + std::hypot(u1 - p1, p2 - l2))};
}

}  // namespace ci_oracle

TrialRecord synthetic_trial(Arm arm, Decision decision, int questions_used = 1,
                            TrialStatus status = TrialStatus::completed) {
  TrialRecord t;
  t.trial_id = std::string(to_string(arm)) + "-x";
  t.scenario_id = "synthetic";
  t.arm = arm;
  t.status = status;
  if (status == TrialStatus::completed) {
    t.verdict = Verdict{decision, "", questions_used};
  } else {
    t.abort_reason = "synthetic abort";
  }
  return t;
}

std::vector<TrialRecord> from_counts(long k1, long n1, long k2, long n2, long dk1 = 0,
                                     long dk2 = 0) {
  // n counts completed trials; k of them say original, dk abstain, the rest
  // say sanitized.
  std::vector<TrialRecord> trials;
  for (long i = 0; i < k1; ++i) trials.push_back(synthetic_trial(Arm::original, Decision::original));
  for (long i = 0; i < dk1; ++i)
    trials.push_back(synthetic_trial(Arm::original, Decision::dont_know));
  for (long i = 0; i < n1 - k1 - dk1; ++i)
    trials.push_back(synthetic_trial(Arm::original, Decision::sanitized));
  for (long i = 0; i < k2; ++i)
    trials.push_back(synthetic_trial(Arm::sanitized, Decision::original));
  for (long i = 0; i < dk2; ++i)
    trials.push_back(synthetic_trial(Arm::sanitized, Decision::dont_know));
  for (long i = 0; i < n2 - k2 - dk2; ++i)
    trials.push_back(synthetic_trial(Arm::sanitized, Decision::sanitized));
  return trials;
}

}  // namespace

TEST_CASE("estimate_advantage: the reported tier headline splits reproduce exactly") {
  // 26/40 vs 0/40 -> 0.65; 9/40 -> 0.225; 4/40 -> 0.1. Tolerance zero.
  auto low = estimate_advantage(from_counts(26, 40, 0, 40),
                                DontKnowPolicy::count_as_not_original);
  CHECK(low.advantage == 0.65);
  CHECK(low.k_original == 26);
  CHECK(low.n_original == 40);
  CHECK(low.ci_low <= 0.65);
  CHECK(low.ci_high >= 0.65);

  auto medium = estimate_advantage(from_counts(9, 40, 0, 40),
                                   DontKnowPolicy::count_as_not_original);
  CHECK(medium.advantage == 0.225);

  auto high = estimate_advantage(from_counts(4, 40, 0, 40),
                                 DontKnowPolicy::count_as_not_original);
  CHECK(high.advantage == 0.1);
}

TEST_CASE("estimate_advantage: equal counts cancel; perfect judge reaches 1.0") {
  CHECK(estimate_advantage(from_counts(13, 40, 13, 40), DontKnowPolicy::count_as_not_original)
            .advantage == 0.0);
  CHECK(estimate_advantage(from_counts(40, 40, 0, 40), DontKnowPolicy::count_as_not_original)
            .advantage == 1.0);
}

TEST_CASE("estimate_advantage: dont_know handling differs by policy") {
  // H arm: 10 say original, 10 abstain, 20 completed total per arm.
  auto trials = from_counts(10, 20, 0, 20, /*dk1=*/10, /*dk2=*/5);
  auto counted = estimate_advantage(trials, DontKnowPolicy::count_as_not_original);
  CHECK(counted.n_original == 20);
  CHECK(counted.dont_know_original == 10);
  CHECK(counted.advantage == doctest::Approx(0.5));

  auto excluded = estimate_advantage(trials, DontKnowPolicy::exclude);
  CHECK(excluded.n_original == 10);
  CHECK(excluded.n_sanitized == 15);
  CHECK(excluded.advantage == doctest::Approx(1.0));
}

TEST_CASE("estimate_advantage: aborted trials never contribute") {
  auto trials = from_counts(5, 10, 0, 10);
  trials.push_back(synthetic_trial(Arm::original, Decision::original, 1, TrialStatus::aborted));
  auto est = estimate_advantage(trials, DontKnowPolicy::count_as_not_original);
  CHECK(est.n_original == 10);
  CHECK(est.k_original == 5);
}

TEST_CASE("estimate_advantage: an empty arm raises insufficient_trials naming the arm") {
  std::vector<TrialRecord> only_original = {synthetic_trial(Arm::original, Decision::original)};
  try {
    estimate_advantage(only_original, DontKnowPolicy::count_as_not_original);
    FAIL("expected insufficient_trials");
  } catch (const Error& e) {
    CHECK(std::string(e.kind()) == errkind::insufficient_trials);
    CHECK(std::string(e.what()).find("sanitized") != std::string::npos);
  }
}

TEST_CASE("confidence_interval: boundary counts clamp to the unit range") {
  auto [low, high] = confidence_interval(40, 40, 0, 40, 0.95);
  CHECK(high == 1.0);
  CHECK(low > 0.8);
  auto [low2, high2] = confidence_interval(0, 40, 40, 40, 0.95);
  CHECK(low2 == -1.0);
  CHECK(high2 < -0.8);
}

TEST_CASE("confidence_interval: symmetric counts cover zero") {
  for (long k : {0L, 7L, 20L, 40L}) {
    auto [low, high] = confidence_interval(k, 40, k, 40, 0.95);
    CHECK(low <= 0.0);
    CHECK(high >= 0.0);
  }
}

TEST_CASE("confidence_interval: matches the independently coded oracle (paper split)") {
  auto [low, high] = confidence_interval(26, 40, 0, 40, 0.95);
  auto [olow, ohigh] = ci_oracle::newcombe(26, 40, 0, 40, 0.95);
  CHECK(std::fabs(low - olow) < 1e-9);
  CHECK(std::fabs(high - ohigh) < 1e-9);
  CHECK(low <= 0.65);
  CHECK(high >= 0.65);
}

TEST_CASE("confidence_interval: randomized agreement with the oracle") {
  Rng rng(20260810);
  for (int iter = 0; iter < 300; ++iter) {
    const long n1 = 1 + static_cast<long>(rng.bounded(200));
    const long n2 = 1 + static_cast<long>(rng.bounded(200));
    const long k1 = static_cast<long>(rng.bounded(static_cast<std::uint64_t>(n1) + 1));
    const long k2 = static_cast<long>(rng.bounded(static_cast<std::uint64_t>(n2) + 1));
    const double level = 0.5 + 0.49 * rng.next_unit();
    auto [low, high] = confidence_interval(k1, n1, k2, n2, level);
    auto [olow, ohigh] = ci_oracle::newcombe(k1, n1, k2, n2, level);
    CAPTURE(k1);
    CAPTURE(n1);
    CAPTURE(k2);
    CAPTURE(n2);
    CAPTURE(level);
    CHECK(std::fabs(low - olow) < 1e-9);
    CHECK(std::fabs(high - ohigh) < 1e-9);
  }
}

TEST_CASE("confidence_interval: invalid counts are rejected") {
  CHECK_THROWS_AS(confidence_interval(5, 4, 0, 4, 0.95), Error);
  CHECK_THROWS_AS(confidence_interval(0, 0, 0, 4, 0.95), Error);
  CHECK_THROWS_AS(confidence_interval(1, 4, 0, 4, 1.5), Error);
}

TEST_CASE("inverse_normal_cdf: round-trips through erfc") {
  for (double p : {0.001, 0.025, 0.2, 0.5, 0.8, 0.975, 0.999}) {
    const double z = inverse_normal_cdf(p);
    CHECK(ci_oracle::normal_cdf(z) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
}

TEST_CASE("property: advantage stays in [-1, 1] and matches a brute-force recount") {
  Rng rng(424242);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<TrialRecord> trials;
    long expect_k1 = 0, expect_n1 = 0, expect_k2 = 0, expect_n2 = 0, dk1 = 0, dk2 = 0;
    const int n = 2 + static_cast<int>(rng.bounded(60));
    bool has_original = false, has_sanitized = false;
    for (int i = 0; i < n; ++i) {
      Arm arm = rng.bounded(2) == 0 ? Arm::original : Arm::sanitized;
      const std::uint64_t kind = rng.bounded(4);
      if (kind == 3) {
        trials.push_back(synthetic_trial(arm, Decision::original, 1, TrialStatus::aborted));
        continue;
      }
      Decision d = kind == 0 ? Decision::original
                             : (kind == 1 ? Decision::sanitized : Decision::dont_know);
      trials.push_back(synthetic_trial(arm, d));
      (arm == Arm::original ? has_original : has_sanitized) = true;
      if (arm == Arm::original) {
        ++expect_n1;
        if (d == Decision::original) ++expect_k1;
        if (d == Decision::dont_know) ++dk1;
      } else {
        ++expect_n2;
        if (d == Decision::original) ++expect_k2;
        if (d == Decision::dont_know) ++dk2;
      }
    }
    if (!has_original || !has_sanitized) continue;
    auto est = estimate_advantage(trials, DontKnowPolicy::count_as_not_original);
    CHECK(est.k_original == expect_k1);
    CHECK(est.n_original == expect_n1);
    CHECK(est.k_sanitized == expect_k2);
    CHECK(est.n_sanitized == expect_n2);
    CHECK(est.dont_know_original == dk1);
    const double brute = static_cast<double>(expect_k1) / static_cast<double>(expect_n1) -
                         static_cast<double>(expect_k2) / static_cast<double>(expect_n2);
    CHECK(est.advantage == brute);
    CHECK(est.advantage >= -1.0);
    CHECK(est.advantage <= 1.0);
    CHECK(est.ci_low <= est.advantage + 1e-12);
    CHECK(est.ci_high >= est.advantage - 1e-12);
  }
}

TEST_CASE("property: turning an original-arm verdict into dont_know never raises advantage") {
  Rng rng(99);
  for (int iter = 0; iter < 100; ++iter) {
    const long n = 5 + static_cast<long>(rng.bounded(40));
    const long k = rng.bounded(static_cast<std::uint64_t>(n) + 1);
    const long k2 = rng.bounded(static_cast<std::uint64_t>(n) + 1);
    auto trials = from_counts(k, n, k2, n);
    const double before =
        estimate_advantage(trials, DontKnowPolicy::count_as_not_original).advantage;
    // Convert one original-arm trial (any decision) to dont_know.
    for (auto& t : trials) {
      if (t.arm == Arm::original) {
        t.verdict->decision = Decision::dont_know;
        break;
      }
    }
    const double after =
        estimate_advantage(trials, DontKnowPolicy::count_as_not_original).advantage;
    CHECK(after <= before + 1e-12);
  }
}

TEST_CASE("null calibration: seeded coin-flip verdicts stay within the Hoeffding band") {
  Rng rng(1337);
  std::vector<TrialRecord> trials;
  for (int i = 0; i < 1000; ++i) {
    trials.push_back(synthetic_trial(
        Arm::original, rng.bounded(2) == 0 ? Decision::original : Decision::sanitized));
    trials.push_back(synthetic_trial(
        Arm::sanitized, rng.bounded(2) == 0 ? Decision::original : Decision::sanitized));
  }
  auto est = estimate_advantage(trials, DontKnowPolicy::count_as_not_original);
  CHECK(std::fabs(est.advantage) <= 0.11);
  CHECK(est.ci_low <= 0.0);
  CHECK(est.ci_high >= 0.0);
}

TEST_CASE("advantage_curve: full budget equals the headline estimate exactly") {
  auto trials = from_counts(26, 40, 0, 40);
  for (auto& t : trials) t.verdict->questions_used = 2;
  auto curve = advantage_curve(trials, {1, 2, 3}, DontKnowPolicy::count_as_not_original);
  REQUIRE(curve.size() == 3);
  const double headline =
      estimate_advantage(trials, DontKnowPolicy::count_as_not_original).advantage;
  CHECK(curve[2].second.advantage == headline);
  CHECK(curve[1].second.advantage == headline);
  CHECK(curve[0].second.advantage == 0.0);  // all verdicts arrived at question 2
}

TEST_CASE("advantage_curve: budget 0 under the counting policy gives advantage 0") {
  auto trials = from_counts(26, 40, 0, 40);
  for (auto& t : trials) t.verdict->questions_used = 1;
  auto curve = advantage_curve(trials, {0}, DontKnowPolicy::count_as_not_original);
  REQUIRE(curve.size() == 1);
  CHECK(curve[0].second.advantage == 0.0);
  CHECK(curve[0].second.dont_know_original == 40);
}

TEST_CASE("advantage_curve: a judge deciding on question 3 flatlines below budget 3") {
  auto trials = from_counts(40, 40, 0, 40);
  for (auto& t : trials) t.verdict->questions_used = 3;
  auto curve = advantage_curve(trials, {1, 2, 3, 4, 5}, DontKnowPolicy::count_as_not_original);
  CHECK(curve[0].second.advantage == 0.0);
  CHECK(curve[1].second.advantage == 0.0);
  CHECK(curve[2].second.advantage == 1.0);
  CHECK(curve[3].second.advantage == 1.0);
  CHECK(curve[4].second.advantage == 1.0);
}

TEST_CASE("advantage_curve: unsorted budgets are rejected") {
  auto trials = from_counts(5, 10, 0, 10);
  CHECK_THROWS_AS(advantage_curve(trials, {3, 1}, DontKnowPolicy::count_as_not_original), Error);
}
