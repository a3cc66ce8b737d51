#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "llmctl/llmlink.hpp"

namespace llmctl {

namespace {

void split_url(const std::string& url, std::string& base, std::string& path) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ValidationError("endpoint '" + url + "' has no scheme");
  const auto slash = url.find('/', scheme + 3);
  base = slash == std::string::npos ? url : url.substr(0, slash);
  path = slash == std::string::npos ? "/" : url.substr(slash);
}

}  // namespace

RemoteBackend::RemoteBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.kind = BackendKind::Remote;
  cfg_.validate();
  split_url(cfg_.endpoint, scheme_host_port_, path_);
}

ChatMessage RemoteBackend::chat(const std::vector<ChatMessage>& messages, const std::vector<ToolSchema>& tools) {
  validate_conversation(messages);
  const std::string body = build_chat_request(cfg_, messages, tools).dump();

  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const auto timeout = std::chrono::duration<double>(cfg_.timeout_s);
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout).count();

  std::string last_error;
  bool timed_out = false;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(0, usec);
    client.set_read_timeout(0, usec);
    client.set_write_timeout(0, usec);
    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      const bool slow = std::chrono::steady_clock::now() - started >= timeout;
      timed_out = err == httplib::Error::ConnectionTimeout || (err == httplib::Error::Read && slow);
      last_error = httplib::to_string(err);
      continue;
    }
    timed_out = false;
    if (res->status >= 500 || res->status == 429) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw TransportError("chat endpoint answered HTTP " + std::to_string(res->status));
    return parse_chat_reply(cfg_, res->body);
  }
  const std::string where = " after " + std::to_string(cfg_.retries + 1) + " attempt(s) to " + scheme_host_port_;
  if (timed_out) throw TimeoutError("chat request timed out" + where);
  throw TransportError("chat request failed (" + last_error + ")" + where);
}

}  // namespace llmctl
