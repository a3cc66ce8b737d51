#include <doctest.h>

#include <random>
#include <set>

#include "llmctl/naming.hpp"

using namespace llmctl;

TEST_CASE("figure legend names parse to their parts") {
  CHECK(parse_controller_name("LLM-Te0") == ControllerName{Assistance::None, 0.0, false});
  CHECK(parse_controller_name("LLM-HAM-Te0-P") == ControllerName{Assistance::HAM, 0.0, true});
  CHECK(parse_controller_name("LLM-SQL-Te0") == ControllerName{Assistance::SQL, 0.0, false});
  CHECK(parse_controller_name("LLM-LSTM-Te0.7") == ControllerName{Assistance::LSTM, 0.7, false});
  CHECK(parse_controller_name("LLM-Linear-Te1-P") == ControllerName{Assistance::Linear, 1.0, true});
}

TEST_CASE("all twenty variants round trip") {
  const auto names = all_variants();
  REQUIRE(names.size() == 20);
  std::set<std::string> rendered;
  for (const auto& n : names) {
    const auto s = render_controller_name(n);
    CHECK(parse_controller_name(s) == n);
    CHECK(render_controller_name(parse_controller_name(s)) == s);
    rendered.insert(s);
  }
  CHECK(rendered.size() == 20);
  CHECK(rendered.count("LLM-Te0") == 1);
  CHECK(rendered.count("LLM-HAM-Te1-P") == 1);
}

TEST_CASE("round trip holds for arbitrary two-decimal temperatures") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> hundredths(0, 200);
  for (int i = 0; i < 500; ++i) {
    const ControllerName n{static_cast<Assistance>(i % 5), hundredths(rng) / 100.0, i % 2 == 0};
    const auto s = render_controller_name(n);
    CHECK(parse_controller_name(s) == n);
  }
}

TEST_CASE("bad names are rejected with a hint") {
  const auto message = [](const char* s) {
    try {
      parse_controller_name(s);
    } catch (const NameError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("LLM-XGB-Te0").find("unknown assistance 'XGB'") != std::string::npos);
  CHECK(message("LLM-XGB-Te0").find("SQL, Linear, LSTM, HAM") != std::string::npos);
  CHECK(message("LLM-none-Te0").find("unknown assistance") != std::string::npos);
  for (const char* bad : {"", "LLM", "MPC-Te0", "LLM-HAM", "LLM-HAM-Te", "LLM-HAM-Te0-Q", "LLM-HAM-Te-1",
                          "llm-HAM-Te0", "LLM-HAM-Te0-P-P", " LLM-Te0"}) {
    CHECK_THROWS_AS(parse_controller_name(bad), NameError);
  }
  // Non-canonical numbers would break render(parse(s)) == s.
  CHECK_THROWS_AS(parse_controller_name("LLM-Te00"), NameError);
  CHECK_THROWS_AS(parse_controller_name("LLM-Te0.50"), NameError);
  CHECK_THROWS_AS(parse_controller_name("LLM-Te1.0"), NameError);
  CHECK_THROWS_AS(render_controller_name({Assistance::HAM, -1.0, false}), NameError);
}

TEST_CASE("assistance tags") {
  CHECK(assistance_from_tag("HAM") == Assistance::HAM);
  CHECK_FALSE(assistance_from_tag("ham").has_value());
  CHECK_FALSE(assistance_from_tag("none").has_value());
  CHECK(is_predictive(Assistance::LSTM));
  CHECK_FALSE(is_predictive(Assistance::SQL));
  CHECK_FALSE(is_predictive(Assistance::None));
}
