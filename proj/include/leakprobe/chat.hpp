#pragma once

#include <json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace leakprobe {

enum class Role { system, user, assistant, tool };

std::string_view to_string(Role r);
Role role_from_string(std::string_view s);  // throws Error(precondition)

// One chat-completion message. tool_name/tool_arguments are set when an
// assistant issues a call; tool_name/tool_call_id when a tool returns.
struct ChatMessage {
  Role role = Role::user;
  std::string content;
  std::string tool_name;
  std::string tool_call_id;
  nlohmann::json tool_arguments;  // object when present, null otherwise

  bool is_tool_call() const { return role == Role::assistant && !tool_name.empty(); }

  nlohmann::json to_json() const;
  static ChatMessage from_json(const nlohmann::json& j);

  static ChatMessage make_system(std::string content);
  static ChatMessage make_user(std::string content);
  static ChatMessage make_assistant(std::string content);
  static ChatMessage make_tool_call(std::string name, nlohmann::json arguments, std::string id);
  static ChatMessage make_tool_result(std::string name, std::string id, std::string content);
};

// Declared function schema advertised to a backend.
struct ToolSpec {
  std::string name;
  std::string description;
  nlohmann::json parameters;  // JSON schema object

  nlohmann::json to_json() const;  // OpenAI-compatible wire form
};

// Which side of the game a transcript message belongs to.
enum class Channel { oracle, judge, analysis, guard };

std::string_view to_string(Channel c);
Channel channel_from_string(std::string_view s);

struct TranscriptEntry {
  Channel channel = Channel::oracle;
  ChatMessage message;
  std::string note;  // e.g. "blocked", "guard_unparseable"; empty = none

  nlohmann::json to_json() const;
  static TranscriptEntry from_json(const nlohmann::json& j);
};

using ChatTranscript = std::vector<TranscriptEntry>;

}  // namespace leakprobe
