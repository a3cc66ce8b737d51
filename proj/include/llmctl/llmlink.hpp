#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "llmctl/error.hpp"

namespace llmctl {

enum class Role { System, User, Assistant, Tool };
std::string_view to_string(Role r);
Role role_from_string(std::string_view s);

struct ToolCall {
  std::string id;
  std::string name;
  nlohmann::json arguments = nlohmann::json::object();

  bool operator==(const ToolCall&) const = default;
};

struct ChatMessage {
  Role role = Role::User;
  std::string content;
  std::vector<ToolCall> tool_calls;  // assistant only
  std::string tool_call_id;          // tool only

  static ChatMessage system(std::string text) { return {Role::System, std::move(text), {}, {}}; }
  static ChatMessage user(std::string text) { return {Role::User, std::move(text), {}, {}}; }
  static ChatMessage assistant(std::string text, std::vector<ToolCall> calls = {}) {
    return {Role::Assistant, std::move(text), std::move(calls), {}};
  }
  static ChatMessage tool(std::string call_id, std::string text) {
    return {Role::Tool, std::move(text), {}, std::move(call_id)};
  }

  bool operator==(const ChatMessage&) const = default;
};

nlohmann::json to_json(const ChatMessage& m);
ChatMessage message_from_json(const nlohmann::json& j);

/// Throws ValidationError unless the list is non-empty, every tool message
/// answers an earlier call id and every assistant message has content or
/// tool calls.
void validate_conversation(const std::vector<ChatMessage>& messages);

/// Function-style tool advertised to the model.
struct ToolSchema {
  std::string name;
  std::string description;
  nlohmann::json parameters;  // JSON schema of the argument object
};

enum class BackendKind { Remote, Mock };

/// Wire names of the chat-completion request and reply, overridable for
/// compatible providers.
struct WireFields {
  std::string model = "model";
  std::string temperature = "temperature";
  std::string messages = "messages";
  std::string tools = "tools";
  std::string choices = "choices";
  std::string message = "message";
};

struct BackendConfig {
  BackendKind kind = BackendKind::Mock;
  std::string endpoint;  // full URL of the chat-completions resource
  std::string model;
  double temperature = 0.0;
  double timeout_s = 30.0;
  int retries = 2;
  std::string api_key_env = "LLMCTL_API_KEY";  // name of the variable, never its value
  WireFields fields;

  void validate() const;
};

/// Reads LLMCTL_LLM_ENDPOINT and LLMCTL_LLM_MODEL over the given defaults.
BackendConfig remote_config_from_env(BackendConfig base = {});

class BackendError : public Error {
 public:
  using Error::Error;
};
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};
class TimeoutError : public BackendError {
 public:
  using BackendError::BackendError;
};
class MalformedReplyError : public BackendError {
 public:
  using BackendError::BackendError;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Returns the next assistant message. Throws a BackendError subtype.
  virtual ChatMessage chat(const std::vector<ChatMessage>& messages, const std::vector<ToolSchema>& tools) = 0;
};

/// Request body for the remote endpoint. Key order is fixed, so the same
/// logical request always serialises to the same bytes.
nlohmann::json build_chat_request(const BackendConfig& cfg, const std::vector<ChatMessage>& messages,
                                  const std::vector<ToolSchema>& tools);
/// Extracts the assistant message from a reply body.
ChatMessage parse_chat_reply(const BackendConfig& cfg, const std::string& body);

class RemoteBackend final : public ChatBackend {
 public:
  explicit RemoteBackend(BackendConfig cfg);
  ChatMessage chat(const std::vector<ChatMessage>& messages, const std::vector<ToolSchema>& tools) override;

 private:
  BackendConfig cfg_;
  std::string scheme_host_port_;
  std::string path_;
};

}  // namespace llmctl
