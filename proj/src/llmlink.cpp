#include "llmctl/llmlink.hpp"

#include <cmath>
#include <cstdlib>
#include <set>

namespace llmctl {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::Tool: return "tool";
  }
  return "user";
}

Role role_from_string(std::string_view s) {
  for (auto r : {Role::System, Role::User, Role::Assistant, Role::Tool}) {
    if (s == to_string(r)) return r;
  }
  throw ValidationError("unknown chat role '" + std::string(s) + "'");
}

nlohmann::json to_json(const ChatMessage& m) {
  nlohmann::json j;
  j["role"] = to_string(m.role);
  j["content"] = m.content;
  if (!m.tool_calls.empty()) {
    j["tool_calls"] = nlohmann::json::array();
    for (const auto& c : m.tool_calls) {
      j["tool_calls"].push_back(
          {{"id", c.id}, {"type", "function"}, {"function", {{"name", c.name}, {"arguments", c.arguments.dump()}}}});
    }
  }
  if (m.role == Role::Tool) j["tool_call_id"] = m.tool_call_id;
  return j;
}

ChatMessage message_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw MalformedReplyError("message is not an object");
  ChatMessage m;
  m.role = role_from_string(j.value("role", "assistant"));
  if (j.contains("content") && j["content"].is_string()) m.content = j["content"].get<std::string>();
  if (j.contains("tool_calls") && j["tool_calls"].is_array()) {
    for (const auto& c : j["tool_calls"]) {
      if (!c.contains("function") || !c["function"].contains("name")) {
        throw MalformedReplyError("tool call without a function name");
      }
      ToolCall call;
      call.id = c.value("id", "");
      call.name = c["function"]["name"].get<std::string>();
      const auto& args = c["function"].value("arguments", nlohmann::json("{}"));
      try {
        call.arguments = args.is_string() ? nlohmann::json::parse(args.get<std::string>()) : args;
      } catch (const nlohmann::json::exception&) {
        throw MalformedReplyError("arguments of tool call '" + call.name + "' are not valid JSON");
      }
      m.tool_calls.push_back(std::move(call));
    }
  }
  if (j.contains("tool_call_id") && j["tool_call_id"].is_string()) m.tool_call_id = j["tool_call_id"];
  return m;
}

void validate_conversation(const std::vector<ChatMessage>& messages) {
  if (messages.empty()) throw ValidationError("conversation is empty");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const auto& m = messages[i];
    if (m.role == Role::Assistant) {
      if (m.content.empty() && m.tool_calls.empty()) {
        throw ValidationError("assistant message " + std::to_string(i) + " has neither content nor tool calls");
      }
      for (const auto& c : m.tool_calls) ids.insert(c.id);
    } else if (m.role == Role::Tool) {
      if (!ids.count(m.tool_call_id)) {
        throw ValidationError("tool message " + std::to_string(i) + " answers unknown call id '" + m.tool_call_id + "'");
      }
    } else if (!m.tool_calls.empty()) {
      throw ValidationError("only assistant messages may carry tool calls");
    }
  }
}

void BackendConfig::validate() const {
  if (!(temperature >= 0) || !std::isfinite(temperature)) throw ValidationError("sampling temperature must be >= 0");
  if (!(timeout_s > 0)) throw ValidationError("timeout must be > 0");
  if (retries < 0) throw ValidationError("retries must be >= 0");
  if (kind == BackendKind::Remote) {
    if (endpoint.empty()) throw ValidationError("remote backend needs an endpoint (set LLMCTL_LLM_ENDPOINT)");
    if (model.empty()) throw ValidationError("remote backend needs a model name (set LLMCTL_LLM_MODEL)");
  }
}

BackendConfig remote_config_from_env(BackendConfig base) {
  base.kind = BackendKind::Remote;
  if (const char* e = std::getenv("LLMCTL_LLM_ENDPOINT")) base.endpoint = e;
  if (const char* m = std::getenv("LLMCTL_LLM_MODEL")) base.model = m;
  return base;
}

nlohmann::json build_chat_request(const BackendConfig& cfg, const std::vector<ChatMessage>& messages,
                                  const std::vector<ToolSchema>& tools) {
  // nlohmann::json objects sort keys, which keeps serialisation stable.
  nlohmann::json body;
  body[cfg.fields.model] = cfg.model;
  body[cfg.fields.temperature] = cfg.temperature;
  auto& msgs = body[cfg.fields.messages] = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back(to_json(m));
  if (!tools.empty()) {
    auto& ts = body[cfg.fields.tools] = nlohmann::json::array();
    for (const auto& t : tools) {
      ts.push_back({{"type", "function"},
                    {"function", {{"name", t.name}, {"description", t.description}, {"parameters", t.parameters}}}});
    }
  }
  return body;
}

ChatMessage parse_chat_reply(const BackendConfig& cfg, const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw MalformedReplyError("reply body is not JSON");
  }
  if (!j.is_object() || !j.contains(cfg.fields.choices) || !j[cfg.fields.choices].is_array() ||
      j[cfg.fields.choices].empty()) {
    throw MalformedReplyError("reply has no '" + cfg.fields.choices + "' entries");
  }
  const auto& choice = j[cfg.fields.choices][0];
  if (!choice.contains(cfg.fields.message)) throw MalformedReplyError("reply choice has no '" + cfg.fields.message + "'");
  auto m = message_from_json(choice[cfg.fields.message]);
  if (m.role != Role::Assistant) throw MalformedReplyError("reply message is not from the assistant");
  if (m.content.empty() && m.tool_calls.empty()) throw MalformedReplyError("reply message is empty");
  return m;
}

}  // namespace llmctl
