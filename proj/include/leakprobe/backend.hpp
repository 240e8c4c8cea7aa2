#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "leakprobe/chat.hpp"

namespace leakprobe {

enum class BackendKind { live_http, scripted };
std::string_view to_string(BackendKind k);

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{500};
};

// Exponential backoff before the given retry attempt (attempt 2 waits
// base_backoff, attempt 3 waits 2x, ...). Attempt 1 never waits.
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt);

// How to reach and parameterize one chat-completion provider.
struct BackendProfile {
  std::string id;  // profile name: rate-limiter key and API-key env suffix
  BackendKind kind = BackendKind::scripted;
  // live_http
  std::string endpoint_url;
  std::string model_name;
  std::optional<double> temperature;  // unset = provider default
  int max_response_tokens = 1024;
  std::chrono::milliseconds request_timeout{30000};
  RetryPolicy retry;
  int rate_limit_rpm = 0;  // 0 = uncapped
  // scripted
  std::string script_path;

  nlohmann::json to_json() const;  // settings snapshot for fingerprints
};

// Environment variable that must hold the bearer token for a live profile:
// PROBE_API_KEY_<ID> (id uppercased, non-alphanumerics mapped to '_') if set,
// else PROBE_API_KEY.
std::string api_key_env_name(const std::string& profile_id);
std::string resolve_api_key(const std::string& profile_id);  // empty if none

struct GuardConfig {
  BackendProfile guard_backend;
  std::string guard_instruction;
  std::string refusal_text;
};

struct CompletionMeta {
  int attempts = 1;
  long request_tokens = 0;
  long response_tokens = 0;
  int tool_call_count = 0;  // tool calls the provider returned in the message
};

struct Completion {
  ChatMessage message;  // always role assistant
  CompletionMeta meta;
};

// One-shot completion against a profile. Scripted output is a pure function
// of (script, seed, conversation). Throws Error with kinds
// transport_exhausted / provider_error / script_miss / precondition.
Completion complete(const BackendProfile& profile, const std::vector<ChatMessage>& conversation,
                    const std::vector<ToolSpec>& tools = {}, std::uint64_t seed = 0);

struct GuardedCompletion {
  ChatMessage message;  // candidate, or refusal when blocked
  bool blocked = false;
  bool guard_unparseable = false;
  CompletionMeta candidate_meta;
  CompletionMeta guard_meta;                // summed over guard (re-)asks
  std::vector<ChatMessage> guard_exchange;  // the guard-side conversation
};

// complete() plus a second model screening the candidate. The guard sees the
// guarded conversation's own system prompt and the candidate text, answers
// ALLOW or BLOCK on its first line, and is re-asked up to twice; an
// unparseable verdict fails closed to BLOCK.
GuardedCompletion guarded_complete(const BackendProfile& profile, const GuardConfig& guard,
                                   const std::vector<ChatMessage>& conversation,
                                   std::uint64_t seed = 0);

// Parses a guard reply's first line into ALLOW (true) / BLOCK (false);
// nullopt when the line is neither.
std::optional<bool> parse_guard_verdict(const std::string& reply);

// Validates a script file, returning parse errors as messages (empty = ok).
std::vector<std::string> validate_script_file(const std::string& path);

// Drops any cached parsed scripts (tests rewrite script files in place).
void clear_script_cache();

}  // namespace leakprobe
