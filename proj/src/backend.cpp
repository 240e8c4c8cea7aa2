#include <httplib.h>

#include "leakprobe/backend.hpp"

#include <cctype>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "leakprobe/prompts.hpp"
#include "leakprobe/toml.hpp"
#include "leakprobe/util.hpp"

namespace leakprobe {

std::string_view to_string(BackendKind k) {
  return k == BackendKind::live_http ? "live_http" : "scripted";
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt) {
  if (attempt <= 1) return std::chrono::milliseconds(0);
  auto delay = policy.base_backoff;
  for (int i = 2; i < attempt; ++i) delay *= 2;
  return delay;
}

nlohmann::json BackendProfile::to_json() const {
  nlohmann::json j{{"id", id},
                   {"kind", std::string(to_string(kind))},
                   {"model", model_name},
                   {"max_response_tokens", max_response_tokens},
                   {"request_timeout_ms", request_timeout.count()},
                   {"retry_max_attempts", retry.max_attempts},
                   {"retry_base_backoff_ms", retry.base_backoff.count()},
                   {"rate_limit_rpm", rate_limit_rpm}};
  if (temperature) j["temperature"] = *temperature;
  if (!endpoint_url.empty()) j["endpoint_url"] = endpoint_url;
  if (!script_path.empty()) j["script"] = script_path;
  return j;
}

std::string api_key_env_name(const std::string& profile_id) {
  std::string suffix;
  for (char c : profile_id) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      suffix.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    else
      suffix.push_back('_');
  }
  return "PROBE_API_KEY_" + suffix;
}

std::string resolve_api_key(const std::string& profile_id) {
  std::string key = env_or_empty(api_key_env_name(profile_id).c_str());
  if (key.empty()) key = env_or_empty("PROBE_API_KEY");
  return key;
}

// ---- rate limiting ---------------------------------------------------------

namespace {

class RateLimiter {
 public:
  explicit RateLimiter(int rpm) : rpm_(rpm) {}

  void acquire() {
    if (rpm_ <= 0) return;
    std::unique_lock<std::mutex> lock(mu_);
    const auto window = std::chrono::seconds(60);
    while (true) {
      auto now = std::chrono::steady_clock::now();
      while (!stamps_.empty() && now - stamps_.front() >= window) stamps_.pop_front();
      if (static_cast<int>(stamps_.size()) < rpm_) {
        stamps_.push_back(now);
        return;
      }
      auto wake = stamps_.front() + window;
      lock.unlock();
      std::this_thread::sleep_until(wake);
      lock.lock();
    }
  }

 private:
  int rpm_;
  std::mutex mu_;
  std::deque<std::chrono::steady_clock::time_point> stamps_;
};

RateLimiter& limiter_for(const std::string& profile_id, int rpm) {
  static std::mutex mu;
  static std::map<std::string, std::unique_ptr<RateLimiter>> limiters;
  std::lock_guard<std::mutex> lock(mu);
  auto it = limiters.find(profile_id);
  if (it == limiters.end())
    it = limiters.emplace(profile_id, std::make_unique<RateLimiter>(rpm)).first;
  return *it->second;
}

long approx_tokens(const std::string& text) {
  long words = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space_ascii(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++words;
    }
  }
  return words;
}

std::string canonical_conversation(const std::vector<ChatMessage>& conversation) {
  std::string s;
  for (const auto& m : conversation) {
    s += to_string(m.role);
    s += '\x1f';
    s += m.content;
    s += '\x1f';
    s += m.tool_name;
    s += '\x1f';
    if (!m.tool_arguments.is_null()) s += m.tool_arguments.dump();
    s += '\x1e';
  }
  return s;
}

// ---- scripted backend -------------------------------------------------------

struct MessagePredicate {
  bool system_anchor = false;  // match the first (system) message
  int offset = 0;              // 0 = last message, 1 = one before, 2 = two before
  std::optional<Role> role;
  std::optional<std::string> contains_text;
  std::optional<std::string> equals_text;
};

struct ScriptResponse {
  enum class Kind { text, tool_call, choose };
  Kind kind = Kind::text;
  std::string text;
  std::string tool;
  nlohmann::json arguments;
  std::vector<std::pair<double, ScriptResponse>> alternatives;  // choose
};

struct ScriptRule {
  std::vector<MessagePredicate> match;  // empty = catch-all
  ScriptResponse respond;
};

struct Script {
  std::vector<ScriptRule> rules;
};

ScriptResponse parse_response(const toml::Value& spec, bool allow_choose) {
  ScriptResponse r;
  const toml::Value* text = spec.find("text");
  const toml::Value* tool = spec.find("tool");
  const toml::Value* choose = spec.find("choose");
  int forms = (text != nullptr) + (tool != nullptr) + (choose != nullptr);
  if (forms != 1)
    throw Error(errkind::toml_parse,
                "respond must have exactly one of 'text', 'tool', 'choose'");
  if (text) {
    r.kind = ScriptResponse::Kind::text;
    r.text = text->as_string();
    return r;
  }
  if (tool) {
    r.kind = ScriptResponse::Kind::tool_call;
    r.tool = tool->as_string();
    r.arguments = nlohmann::json::object();
    if (const toml::Value* args = spec.find("arguments")) {
      for (const auto& [k, v] : args->as_table()) {
        switch (v.kind()) {
          case toml::Value::Kind::string: r.arguments[k] = v.as_string(); break;
          case toml::Value::Kind::integer: r.arguments[k] = v.as_integer(); break;
          case toml::Value::Kind::floating: r.arguments[k] = v.as_float(); break;
          case toml::Value::Kind::boolean: r.arguments[k] = v.as_boolean(); break;
          default:
            throw Error(errkind::toml_parse, "tool argument '" + k + "' must be a scalar");
        }
      }
    }
    return r;
  }
  if (!allow_choose)
    throw Error(errkind::toml_parse, "'choose' cannot nest inside 'choose'");
  r.kind = ScriptResponse::Kind::choose;
  for (const auto& alt : choose->as_array()) {
    double weight = alt.get_float("weight", 1.0);
    if (weight <= 0) throw Error(errkind::toml_parse, "choose weight must be > 0");
    r.alternatives.emplace_back(weight, parse_response(alt, /*allow_choose=*/false));
  }
  if (r.alternatives.empty())
    throw Error(errkind::toml_parse, "'choose' needs at least one alternative");
  return r;
}

Script parse_script(const toml::Value& doc) {
  Script script;
  const toml::Value* rules = doc.find("rules");
  if (!rules) throw Error(errkind::toml_parse, "script has no [[rules]]");
  for (const auto& rule_spec : rules->as_array()) {
    ScriptRule rule;
    if (const toml::Value* match = rule_spec.find("match")) {
      for (const auto& pred_spec : match->as_array()) {
        MessagePredicate p;
        std::string where = pred_spec.get_string("where", "last");
        if (where == "system") {
          p.system_anchor = true;
        } else if (where == "last") {
          p.offset = 0;
        } else if (where == "last-1") {
          p.offset = 1;
        } else if (where == "last-2") {
          p.offset = 2;
        } else {
          throw Error(errkind::toml_parse,
                      "match 'where' must be system|last|last-1|last-2, got '" + where + "'");
        }
        if (const toml::Value* role = pred_spec.find("role"))
          p.role = role_from_string(role->as_string());
        if (const toml::Value* c = pred_spec.find("contains")) p.contains_text = c->as_string();
        if (const toml::Value* e = pred_spec.find("equals")) p.equals_text = e->as_string();
        if (!p.contains_text && !p.equals_text && !p.role && !p.system_anchor)
          throw Error(errkind::toml_parse, "empty match predicate");
        rule.match.push_back(std::move(p));
      }
    }
    const toml::Value* respond = rule_spec.find("respond");
    if (!respond) throw Error(errkind::toml_parse, "rule has no [rules.respond]");
    rule.respond = parse_response(*respond, /*allow_choose=*/true);
    script.rules.push_back(std::move(rule));
  }
  return script;
}

std::mutex script_cache_mu;
std::map<std::string, std::shared_ptr<const Script>> script_cache;

std::shared_ptr<const Script> load_script_cached(const std::string& path) {
  {
    std::lock_guard<std::mutex> lock(script_cache_mu);
    auto it = script_cache.find(path);
    if (it != script_cache.end()) return it->second;
  }
  auto script = std::make_shared<const Script>(parse_script(toml::parse_file(path)));
  std::lock_guard<std::mutex> lock(script_cache_mu);
  script_cache[path] = script;
  return script;
}

bool predicate_holds(const MessagePredicate& p, const std::vector<ChatMessage>& conversation) {
  const ChatMessage* msg = nullptr;
  if (p.system_anchor) {
    msg = &conversation.front();
  } else {
    if (p.offset >= static_cast<int>(conversation.size())) return false;
    msg = &conversation[conversation.size() - 1 - static_cast<std::size_t>(p.offset)];
  }
  if (p.role && msg->role != *p.role) return false;
  if (p.equals_text && msg->content != *p.equals_text) return false;
  if (p.contains_text && !contains(msg->content, *p.contains_text)) return false;
  return true;
}

const ScriptResponse* pick_alternative(const ScriptResponse& r, std::uint64_t seed,
                                       const std::string& canonical) {
  double total = 0;
  for (const auto& [w, _] : r.alternatives) total += w;
  double u = Rng(mix64(seed, fnv1a64(canonical))).next_unit() * total;
  double acc = 0;
  for (const auto& [w, alt] : r.alternatives) {
    acc += w;
    if (u < acc) return &alt;
  }
  return &r.alternatives.back().second;
}

Completion scripted_complete(const BackendProfile& profile,
                             const std::vector<ChatMessage>& conversation, std::uint64_t seed) {
  auto script = load_script_cached(profile.script_path);
  const std::string canonical = canonical_conversation(conversation);

  const ScriptRule* hit = nullptr;
  for (const auto& rule : script->rules) {
    bool ok = true;
    for (const auto& p : rule.match) {
      if (!predicate_holds(p, conversation)) {
        ok = false;
        break;
      }
    }
    if (ok) {
      hit = &rule;
      break;
    }
  }
  if (!hit) {
    throw Error(errkind::script_miss,
                "script '" + profile.script_path + "' has no rule for the conversation (last: " +
                    (conversation.empty() ? std::string("<none>") : conversation.back().content) +
                    ")");
  }

  const ScriptResponse* response = &hit->respond;
  if (response->kind == ScriptResponse::Kind::choose)
    response = pick_alternative(*response, seed, canonical);

  Completion out;
  out.meta.attempts = 1;
  for (const auto& m : conversation) out.meta.request_tokens += approx_tokens(m.content);
  if (response->kind == ScriptResponse::Kind::tool_call) {
    std::ostringstream id;
    id << "call-" << std::hex << (fnv1a64(canonical) & 0xffffffffull);
    out.message = ChatMessage::make_tool_call(response->tool, response->arguments, id.str());
    out.meta.tool_call_count = 1;
    out.meta.response_tokens = approx_tokens(response->arguments.dump());
  } else {
    out.message = ChatMessage::make_assistant(response->text);
    out.meta.response_tokens = approx_tokens(response->text);
  }
  return out;
}

// ---- live backend -----------------------------------------------------------

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // path prefix, no trailing slash
};

ParsedUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw Error(errkind::config_error, "endpoint_url '" + url + "' has no scheme");
  auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.base = url;
  } else {
    out.base = url.substr(0, path_start);
    out.path = url.substr(path_start);
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  }
  return out;
}

nlohmann::json message_to_wire(const ChatMessage& m) {
  nlohmann::json j{{"role", std::string(to_string(m.role))}};
  if (m.is_tool_call()) {
    j["content"] = nullptr;
    j["tool_calls"] = nlohmann::json::array(
        {nlohmann::json{{"id", m.tool_call_id},
                        {"type", "function"},
                        {"function", nlohmann::json{{"name", m.tool_name},
                                                    {"arguments", m.tool_arguments.dump()}}}}});
  } else if (m.role == Role::tool) {
    j["content"] = m.content;
    j["tool_call_id"] = m.tool_call_id;
  } else {
    j["content"] = m.content;
  }
  return j;
}

bool retryable_status(int status) {
  return status == 408 || status == 429 || (status >= 500 && status < 600);
}

Completion live_complete(const BackendProfile& profile,
                         const std::vector<ChatMessage>& conversation,
                         const std::vector<ToolSpec>& tools) {
  ParsedUrl url = split_url(profile.endpoint_url);

  nlohmann::json body{{"model", profile.model_name},
                      {"max_tokens", profile.max_response_tokens}};
  if (profile.temperature) body["temperature"] = *profile.temperature;
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : conversation) messages.push_back(message_to_wire(m));
  body["messages"] = std::move(messages);
  if (!tools.empty()) {
    nlohmann::json tool_arr = nlohmann::json::array();
    for (const auto& t : tools) tool_arr.push_back(t.to_json());
    body["tools"] = std::move(tool_arr);
  }
  const std::string payload = body.dump();
  const std::string api_key = resolve_api_key(profile.id);

  RateLimiter& limiter = limiter_for(profile.id, profile.rate_limit_rpm);

  std::string last_error;
  for (int attempt = 1; attempt <= profile.retry.max_attempts; ++attempt) {
    auto delay = backoff_delay(profile.retry, attempt);
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    limiter.acquire();

    httplib::Client client(url.base);
    client.set_connection_timeout(profile.request_timeout);
    client.set_read_timeout(profile.request_timeout);
    client.set_write_timeout(profile.request_timeout);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

    auto res = client.Post(url.path + "/chat/completions", headers, payload, "application/json");
    if (!res) {
      last_error = "transport: " + httplib::to_string(res.error());
      log_debug("attempt " + std::to_string(attempt) + " failed: " + last_error);
      continue;
    }
    if (res->status != 200) {
      if (retryable_status(res->status)) {
        last_error = "HTTP " + std::to_string(res->status);
        log_debug("attempt " + std::to_string(attempt) + " failed: " + last_error);
        continue;
      }
      throw Error(errkind::provider_error, "provider returned HTTP " +
                                               std::to_string(res->status) + ": " + res->body);
    }

    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(errkind::provider_error, std::string("unparseable provider body: ") + e.what());
    }
    if (!reply.contains("choices") || reply["choices"].empty())
      throw Error(errkind::provider_error, "provider reply has no choices");

    const nlohmann::json& wire = reply["choices"][0]["message"];
    Completion out;
    out.meta.attempts = attempt;
    out.message.role = Role::assistant;
    if (wire.contains("content") && wire["content"].is_string())
      out.message.content = wire["content"].get<std::string>();
    if (wire.contains("tool_calls") && wire["tool_calls"].is_array() &&
        !wire["tool_calls"].empty()) {
      out.meta.tool_call_count = static_cast<int>(wire["tool_calls"].size());
      const nlohmann::json& call = wire["tool_calls"][0];
      out.message.tool_call_id = call.value("id", std::string());
      out.message.tool_name = call["function"].value("name", std::string());
      std::string args = call["function"].value("arguments", std::string("{}"));
      try {
        out.message.tool_arguments = nlohmann::json::parse(args);
      } catch (const nlohmann::json::exception&) {
        out.message.tool_arguments = nlohmann::json{{"_raw", args}};
      }
    }
    if (reply.contains("usage")) {
      out.meta.request_tokens = reply["usage"].value("prompt_tokens", 0);
      out.meta.response_tokens = reply["usage"].value("completion_tokens", 0);
    }
    return out;
  }
  throw Error(errkind::transport_exhausted,
              "all " + std::to_string(profile.retry.max_attempts) +
                  " attempts failed against '" + profile.endpoint_url + "' (last: " + last_error +
                  ")");
}

}  // namespace

Completion complete(const BackendProfile& profile, const std::vector<ChatMessage>& conversation,
                    const std::vector<ToolSpec>& tools, std::uint64_t seed) {
  if (conversation.empty())
    throw Error(errkind::precondition, "conversation must not be empty");
  if (conversation.front().role != Role::system)
    throw Error(errkind::precondition, "conversation must start with a system message");
  if (profile.kind == BackendKind::scripted) return scripted_complete(profile, conversation, seed);
  return live_complete(profile, conversation, tools);
}

std::optional<bool> parse_guard_verdict(const std::string& reply) {
  auto lines = split_lines(reply);
  std::string first = lines.empty() ? std::string() : trim(lines.front());
  while (!first.empty() && (first.back() == '.' || first.back() == '!' || first.back() == ':'))
    first.pop_back();
  first = to_lower_ascii(first);
  if (first == "allow") return true;
  if (first == "block") return false;
  return std::nullopt;
}

GuardedCompletion guarded_complete(const BackendProfile& profile, const GuardConfig& guard,
                                   const std::vector<ChatMessage>& conversation,
                                   std::uint64_t seed) {
  Completion candidate = complete(profile, conversation, {}, seed);

  GuardedCompletion out;
  out.candidate_meta = candidate.meta;

  // The guard sees exactly the system prompt of the conversation it guards.
  const std::string& guarded_system = conversation.front().content;
  std::vector<ChatMessage> guard_conv{
      ChatMessage::make_system(guard.guard_instruction),
      ChatMessage::make_user(
          prompts::render_guard_user(guarded_system, candidate.message.content))};

  std::optional<bool> verdict;
  out.guard_meta.attempts = 0;
  const int max_asks = 3;  // one ask plus two re-asks
  for (int ask = 1; ask <= max_asks; ++ask) {
    Completion reply = complete(guard.guard_backend, guard_conv, {}, mix64(seed, 0x6761726433ull));
    out.guard_meta.attempts += reply.meta.attempts;
    out.guard_meta.request_tokens += reply.meta.request_tokens;
    out.guard_meta.response_tokens += reply.meta.response_tokens;
    guard_conv.push_back(reply.message);
    verdict = parse_guard_verdict(reply.message.content);
    if (verdict) break;
    if (ask < max_asks) guard_conv.push_back(ChatMessage::make_user(prompts::kGuardReaskV1));
  }

  out.guard_exchange = std::move(guard_conv);
  if (!verdict) {
    out.guard_unparseable = true;
    out.blocked = true;  // fail closed
  } else {
    out.blocked = !*verdict;
  }
  out.message = out.blocked ? ChatMessage::make_assistant(guard.refusal_text) : candidate.message;
  return out;
}

std::vector<std::string> validate_script_file(const std::string& path) {
  std::vector<std::string> problems;
  try {
    parse_script(toml::parse_file(path));
  } catch (const Error& e) {
    problems.push_back(e.what());
  }
  return problems;
}

void clear_script_cache() {
  std::lock_guard<std::mutex> lock(script_cache_mu);
  script_cache.clear();
}

}  // namespace leakprobe
