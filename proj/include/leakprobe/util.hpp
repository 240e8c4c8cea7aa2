#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace leakprobe {

// Error with a stable machine-readable kind next to the human message.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

namespace errkind {
inline constexpr const char* precondition = "precondition";
inline constexpr const char* invalid_scenario = "invalid_scenario";
inline constexpr const char* toml_parse = "toml_parse";
inline constexpr const char* transport_exhausted = "transport_exhausted";
inline constexpr const char* provider_error = "provider_error";
inline constexpr const char* script_miss = "script_miss";
inline constexpr const char* malformed_judge_action = "malformed_judge_action";
inline constexpr const char* plan_generation_failed = "plan_generation_failed";
inline constexpr const char* insufficient_trials = "insufficient_trials";
inline constexpr const char* io_error = "io_error";
inline constexpr const char* missing_manifest = "missing_manifest";
inline constexpr const char* config_error = "config_error";
}  // namespace errkind

// ---- deterministic hashing / rng ----------------------------------------
// All randomness that can affect stored artifacts goes through these, never
// through std:: distributions, so runs reproduce across platforms.

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

// Small deterministic generator (splitmix64 stream).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  // uniform in [0, 1)
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  // uniform in [0, n)
  std::uint64_t bounded(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

  template <typename T>
  void shuffle(std::vector<T>& v) {  // Fisher-Yates, stable across platforms
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// ---- strings --------------------------------------------------------------

std::string to_lower_ascii(std::string_view s);
bool is_space_ascii(char c);
std::string trim(std::string_view s);
std::string replace_all(std::string text, std::string_view from, std::string_view to);
std::vector<std::string> split_lines(std::string_view text);
bool contains(std::string_view haystack, std::string_view needle);

// Case-fold (ASCII) and collapse whitespace runs to single spaces.
std::string normalize_for_match(std::string_view s);

// Replace every occurrence of `needle` in `text` with `replacement`, matching
// the way detect_leak matches: ASCII case-insensitive, and a space in `needle`
// matches any run of whitespace in `text`. Used by report redaction.
std::string replace_normalized(const std::string& text, const std::string& needle,
                               const std::string& replacement);

// ---- time / ids -----------------------------------------------------------

std::string now_rfc3339_utc();
std::string uuid4();

// ---- hashing --------------------------------------------------------------

std::string sha256_hex(std::string_view data);

// ---- env / logging ---------------------------------------------------------

// Reads an environment variable; empty string when unset.
std::string env_or_empty(const char* name);

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3 };
LogLevel log_threshold();  // from PROBE_LOG, default warn
void log(LogLevel level, const std::string& msg);  // to stderr
inline void log_debug(const std::string& m) { log(LogLevel::debug, m); }
inline void log_info(const std::string& m) { log(LogLevel::info, m); }
inline void log_warn(const std::string& m) { log(LogLevel::warn, m); }
inline void log_error(const std::string& m) { log(LogLevel::error, m); }

}  // namespace leakprobe
