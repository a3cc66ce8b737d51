#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "llmctl/mock_backend.hpp"
#include "llmctl/tools.hpp"

using namespace llmctl;

namespace {

std::vector<CandidateOutcome> example(std::initializer_list<std::pair<double, double>> duty_and_end) {
  std::vector<CandidateOutcome> out;
  for (auto [duty, end] : duty_and_end) out.push_back({ControlInput::exact(duty, 0), end});
  return out;
}

const std::string kPrompt =
    "What should the control values heater_duty_cycle and fan_on be set to in order to maintain a temperature of 30 "
    "degrees? The temperature now is 27 and the ambient temperature is 23 degrees.\nIt is important that the "
    "temperature in the greenhouse matches the target temperature exactly. Use HAM.";

std::vector<ToolSchema> schemas(std::initializer_list<const char*> names) {
  std::vector<ToolSchema> out;
  for (const char* n : names) out.push_back({n, "", nlohmann::json::object()});
  return out;
}

/// Serves canned replies on an ephemeral port for the lifetime of the object.
struct FakeServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::string last_body;
  std::string last_auth;
  int hits = 0;

  template <class Handler>
  explicit FakeServer(Handler h) {
    server.Post("/v1/chat/completions", [this, h](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      h(req, res);
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeServer() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions"; }
};

BackendConfig remote(const std::string& url, double timeout = 2.0, int retries = 0) {
  BackendConfig c;
  c.kind = BackendKind::Remote;
  c.endpoint = url;
  c.model = "test-model";
  c.timeout_s = timeout;
  c.retries = retries;
  c.api_key_env = "LLMCTL_TEST_KEY";
  return c;
}

}  // namespace

TEST_CASE("mock_select on the predictor examples") {
  // Among these predictions the closest end temperature to 30 is heater 1.0.
  const auto c = example({{0.0, 26.80}, {1.0, 30.08}, {0.5, 28.43}, {0.8, 28.93}});
  CHECK(mock_select(c, 30.0, 0.0) == ControlInput::exact(1.0, 0));
  const auto d = example({{0.0, 27.60}, {1.0, 28.97}, {0.5, 28.43}, {0.8, 28.83}});
  CHECK(mock_select(d, 30.0, 0.0) == ControlInput::exact(1.0, 0));
}

TEST_CASE("mock_select ties and errors") {
  const auto tie = example({{0.6, 29.0}, {0.4, 31.0}});
  CHECK(mock_select(tie, 30.0, 0.0) == ControlInput::exact(0.4, 0));
  std::vector<CandidateOutcome> fan_tie{{ControlInput::exact(0.5, 1), 30.5}, {ControlInput::exact(0.5, 0), 29.5}};
  CHECK(mock_select(fan_tie, 30.0, 0.0) == ControlInput::exact(0.5, 0));
  CHECK_THROWS_AS(mock_select(std::vector<CandidateOutcome>{}, 30.0, 0.0), ValidationError);
  std::vector<CandidateOutcome> nan{{ControlInput{}, std::nan("")}};
  CHECK_THROWS_AS(mock_select(nan, 30.0, 0.0), ValidationError);
}

TEST_CASE("penalty never turns the fan on") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> T(20, 35);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<CandidateOutcome> c;
    const int n = 1 + static_cast<int>(rng() % 12);
    for (int k = 0; k < n; ++k) c.push_back({ControlInput::from_steps(static_cast<int>(rng() % 21), rng() % 2), T(rng)});
    const double target = T(rng);
    const auto free = mock_select(c, target, 0.0);
    for (double lambda : {0.1, 1.0, 5.0}) CHECK(mock_select(c, target, lambda).fan_on() <= free.fan_on());
  }
}

TEST_CASE("read_prompt") {
  const auto r = read_prompt(kPrompt);
  CHECK(r.target == 30.0);
  CHECK(r.current == 27.0);
  CHECK(r.ambient == 23.0);
  CHECK_FALSE(r.penalty);
  const auto a = read_prompt(
      "maintain a temperature of 27.34C ? The temperature now is 27.1C and the ambient temperature is 22.6C. The "
      "first priority is to have minimal usage of the fan when possible. Use SQL databse of earlier MPC titled "
      "\"MPC control_penalty2025-03-01T12:41:30\" experiment as guide.");
  CHECK(a.target == 27.34);
  CHECK(a.penalty);
  CHECK(a.guide_experiment == "MPC control_penalty2025-03-01T12:41:30");
  CHECK_THROWS_AS(read_prompt("hello"), ValidationError);
}

TEST_CASE("mock state machine") {
  MockBackend mock;
  std::vector<ChatMessage> conv{ChatMessage::system("s"), ChatMessage::user(kPrompt)};

  SUBCASE("predictive asks for simulations first") {
    const auto r = mock.chat(conv, schemas({kSimulateTool, kFinalAnswerTool}));
    REQUIRE(r.tool_calls.size() == 1);
    CHECK(r.tool_calls[0].name == kSimulateTool);
    CHECK(r.tool_calls[0].arguments["candidates"].size() == 10);
    CHECK(r.tool_calls[0].arguments["horizon"] == 10);
    CHECK(mock.chat(conv, schemas({kSimulateTool, kFinalAnswerTool})) == r);
  }
  SUBCASE("plain answers at once") {
    const auto r = mock.chat(conv, schemas({kFinalAnswerTool}));
    REQUIRE(r.tool_calls.size() == 1);
    CHECK(r.tool_calls[0].name == kFinalAnswerTool);
  }
  SUBCASE("never names a tool it was not given") {
    const auto r = mock.chat(conv, {});
    CHECK(r.tool_calls.empty());
    CHECK(r.content.find("heater_duty_cycle:") != std::string::npos);
  }
  SUBCASE("sql without a guide answers unsupported") {
    const auto r = mock.chat(conv, schemas({kQueryTool, kFinalAnswerTool}));
    REQUIRE(r.tool_calls.size() == 1);
    CHECK(r.tool_calls[0].name == kFinalAnswerTool);
  }
  SUBCASE("conversation validation") {
    CHECK_THROWS_AS(mock.chat({}, {}), ValidationError);
    auto bad = conv;
    bad.push_back(ChatMessage::tool("nope", "{}"));
    CHECK_THROWS_AS(mock.chat(bad, {}), ValidationError);
  }
}

TEST_CASE("scripted and failing backends") {
  ScriptedBackend s({ChatMessage::assistant("one"), ChatMessage::assistant("two")});
  std::vector<ChatMessage> conv{ChatMessage::user(kPrompt)};
  CHECK(s.chat(conv, {}).content == "one");
  conv.push_back(ChatMessage::assistant("one"));
  CHECK(s.chat(conv, {}).content == "two");
  conv.push_back(ChatMessage::assistant("two"));
  CHECK(s.chat(conv, {}).content == "two");

  CHECK_THROWS_AS(FailingBackend(FailingBackend::Mode::Transport).chat(conv, {}), TransportError);
  CHECK_THROWS_AS(FailingBackend(FailingBackend::Mode::Timeout).chat(conv, {}), TimeoutError);
  CHECK_THROWS_AS(FailingBackend(FailingBackend::Mode::Malformed).chat(conv, {}), MalformedReplyError);
}

TEST_CASE("message json round trip") {
  const auto m = ChatMessage::assistant("x", {ToolCall{"c1", "simulate", {{"horizon", 3}}}});
  CHECK(message_from_json(to_json(m)) == m);
  const auto t = ChatMessage::tool("c1", "{\"a\":1}");
  CHECK(message_from_json(to_json(t)) == t);
}

TEST_CASE("request serialisation is stable") {
  auto cfg = remote("http://127.0.0.1:1/v1/chat/completions");
  std::vector<ChatMessage> conv{ChatMessage::system("s"), ChatMessage::user(kPrompt)};
  const auto tools = std::vector<ToolSchema>{final_answer_schema()};
  const auto a = build_chat_request(cfg, conv, tools).dump();
  CHECK(a == build_chat_request(cfg, conv, tools).dump());
  const auto j = nlohmann::json::parse(a);
  CHECK(j["model"] == "test-model");
  CHECK(j["temperature"] == 0.0);
  CHECK(j["messages"].size() == 2);
  CHECK(j["tools"][0]["function"]["name"] == kFinalAnswerTool);

  cfg.fields.messages = "input";
  CHECK(build_chat_request(cfg, conv, tools).contains("input"));
}

TEST_CASE("remote backend against a local server") {
  const std::vector<ChatMessage> conv{ChatMessage::system("s"), ChatMessage::user(kPrompt)};
  setenv("LLMCTL_TEST_KEY", "sekret", 1);

  SUBCASE("tool call reply") {
    FakeServer srv([](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"choices":[{"message":{"role":"assistant","content":null,"tool_calls":[
        {"id":"c9","type":"function","function":{"name":"final_answer",
         "arguments":"{\"heater_duty_cycle\":0.3,\"fan_on\":0,\"rationale\":\"r\"}"}}]}}]})",
                      "application/json");
    });
    RemoteBackend b(remote(srv.url()));
    const auto r = b.chat(conv, {final_answer_schema()});
    REQUIRE(r.tool_calls.size() == 1);
    CHECK(r.tool_calls[0].id == "c9");
    CHECK(r.tool_calls[0].arguments["heater_duty_cycle"] == 0.3);
    CHECK(srv.last_auth == "Bearer sekret");
    CHECK(srv.last_body == build_chat_request(remote(srv.url()), conv, {final_answer_schema()}).dump());
  }
  SUBCASE("malformed reply") {
    FakeServer srv([](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"choices":[]})", "application/json");
    });
    CHECK_THROWS_AS(RemoteBackend(remote(srv.url())).chat(conv, {}), MalformedReplyError);
  }
  SUBCASE("server errors are retried then reported") {
    FakeServer srv([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    CHECK_THROWS_AS(RemoteBackend(remote(srv.url(), 2.0, 2)).chat(conv, {}), TransportError);
    CHECK(srv.hits == 3);
  }
  SUBCASE("slow server times out") {
    FakeServer srv([](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(800));
      res.set_content("{}", "application/json");
    });
    const auto t0 = std::chrono::steady_clock::now();
    CHECK_THROWS_AS(RemoteBackend(remote(srv.url(), 0.2)).chat(conv, {}), TimeoutError);
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(2));
  }
  SUBCASE("unreachable endpoint is a transport error") {
    const int port = 1;  // privileged and unused: connection refused
    const auto t0 = std::chrono::steady_clock::now();
    CHECK_THROWS_AS(RemoteBackend(remote("http://127.0.0.1:" + std::to_string(port) + "/v1", 1.0)).chat(conv, {}),
                    TransportError);
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(3));
  }
  SUBCASE("config validation") {
    BackendConfig c = remote("");
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = remote("http://x/");
    c.temperature = -1;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.temperature = 0;
    c.timeout_s = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
  }
  unsetenv("LLMCTL_TEST_KEY");
}
