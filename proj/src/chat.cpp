#include "leakprobe/chat.hpp"

#include "leakprobe/util.hpp"

namespace leakprobe {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    case Role::tool: return "tool";
  }
  return "user";
}

Role role_from_string(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  if (s == "tool") return Role::tool;
  throw Error(errkind::precondition, "unknown role '" + std::string(s) + "'");
}

nlohmann::json ChatMessage::to_json() const {
  nlohmann::json j{{"role", to_string(role)}, {"content", content}};
  if (!tool_name.empty()) j["tool_name"] = tool_name;
  if (!tool_call_id.empty()) j["tool_call_id"] = tool_call_id;
  if (!tool_arguments.is_null()) j["tool_arguments"] = tool_arguments;
  return j;
}

ChatMessage ChatMessage::from_json(const nlohmann::json& j) {
  ChatMessage m;
  m.role = role_from_string(j.at("role").get<std::string>());
  m.content = j.value("content", std::string());
  m.tool_name = j.value("tool_name", std::string());
  m.tool_call_id = j.value("tool_call_id", std::string());
  if (j.contains("tool_arguments")) m.tool_arguments = j["tool_arguments"];
  return m;
}

ChatMessage ChatMessage::make_system(std::string content) {
  ChatMessage m;
  m.role = Role::system;
  m.content = std::move(content);
  return m;
}
ChatMessage ChatMessage::make_user(std::string content) {
  ChatMessage m;
  m.role = Role::user;
  m.content = std::move(content);
  return m;
}
ChatMessage ChatMessage::make_assistant(std::string content) {
  ChatMessage m;
  m.role = Role::assistant;
  m.content = std::move(content);
  return m;
}
ChatMessage ChatMessage::make_tool_call(std::string name, nlohmann::json arguments,
                                        std::string id) {
  ChatMessage m;
  m.role = Role::assistant;
  m.tool_name = std::move(name);
  m.tool_arguments = std::move(arguments);
  m.tool_call_id = std::move(id);
  return m;
}
ChatMessage ChatMessage::make_tool_result(std::string name, std::string id, std::string content) {
  ChatMessage m;
  m.role = Role::tool;
  m.tool_name = std::move(name);
  m.tool_call_id = std::move(id);
  m.content = std::move(content);
  return m;
}

nlohmann::json ToolSpec::to_json() const {
  return nlohmann::json{
      {"type", "function"},
      {"function",
       nlohmann::json{{"name", name}, {"description", description}, {"parameters", parameters}}}};
}

std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::oracle: return "oracle";
    case Channel::judge: return "judge";
    case Channel::analysis: return "analysis";
    case Channel::guard: return "guard";
  }
  return "oracle";
}

Channel channel_from_string(std::string_view s) {
  if (s == "oracle") return Channel::oracle;
  if (s == "judge") return Channel::judge;
  if (s == "analysis") return Channel::analysis;
  if (s == "guard") return Channel::guard;
  throw Error(errkind::precondition, "unknown channel '" + std::string(s) + "'");
}

nlohmann::json TranscriptEntry::to_json() const {
  nlohmann::json j = message.to_json();
  j["channel"] = to_string(channel);
  if (!note.empty()) j["note"] = note;
  return j;
}

TranscriptEntry TranscriptEntry::from_json(const nlohmann::json& j) {
  TranscriptEntry e;
  e.channel = channel_from_string(j.at("channel").get<std::string>());
  e.message = ChatMessage::from_json(j);
  e.note = j.value("note", std::string());
  return e;
}

}  // namespace leakprobe
