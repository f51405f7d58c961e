#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <thread>

#include "consult/backend.hpp"
#include "consult/errors.hpp"
#include "httplib.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace consult;

namespace {

ChatRequest user_request(const std::string& text) {
  ChatRequest request;
  request.messages.push_back({ChatRole::user, text});
  return request;
}

}  // namespace

TEST_CASE("scripted backend pops fixture entries in order") {
  ScriptedBackend backend({{std::nullopt, "<Inquiry>: Chief Complaint. Do you feel headache?"},
                           {std::string("second"), "reply two"}});
  CHECK(backend.complete(user_request("anything")).content ==
        "<Inquiry>: Chief Complaint. Do you feel headache?");
  CHECK(backend.complete(user_request("the second prompt")).content == "reply two");
  CHECK_THROWS_AS(backend.complete(user_request("x")), FixtureExhausted);
}

TEST_CASE("scripted backend fails loudly on matcher mismatch") {
  ScriptedBackend backend({{std::string("never present"), "reply"}});
  CHECK_THROWS_AS(backend.complete(user_request("something else")), FixtureMismatch);
}

TEST_CASE("matcher looks at the last user message") {
  ScriptedBackend backend({{std::string("needle"), "found"}});
  ChatRequest request;
  request.messages.push_back({ChatRole::user, "needle here"});
  request.messages.push_back({ChatRole::assistant, "noise"});
  request.messages.push_back({ChatRole::user, "also needle"});
  CHECK(backend.complete(request).content == "found");
}

TEST_CASE("request invariants") {
  ScriptedBackend backend({{std::nullopt, "r"}});
  CHECK_THROWS_AS(backend.complete(ChatRequest{}), ValidationError);
  ChatRequest bad;
  bad.messages.push_back({ChatRole::assistant, "hi"});
  CHECK_THROWS_AS(backend.complete(bad), ValidationError);
}

TEST_CASE("usage totals count requests and never decrease") {
  ScriptedBackend backend({{std::nullopt, "a"}, {std::nullopt, "b"}});
  CHECK(backend.usage_totals().requests == 0);
  backend.complete(user_request("1"));
  backend.complete(user_request("2"));
  const auto totals = backend.usage_totals();
  CHECK(totals.requests == 2);
  CHECK(totals.prompt_tokens == 0);
  CHECK(totals.completion_tokens == 0);
}

TEST_CASE("scripted mode is deterministic for identical fixture and requests") {
  const ScriptedFixture fixture = {{std::nullopt, "a"}, {std::nullopt, "b"}, {std::nullopt, "c"}};
  ScriptedBackend one(fixture), two(fixture);
  for (int i = 0; i < 3; ++i) {
    CHECK(one.complete(user_request("q")).content == two.complete(user_request("q")).content);
  }
}

TEST_CASE("load_fixture parses match-anything and literal matchers") {
  testutil::TempDir dir;
  testutil::write_file(dir.file("f.json"),
                       R"([{"match": null, "reply": "a"}, {"match": "m", "reply": "b"}])");
  const auto fixture = load_fixture(dir.file("f.json"));
  REQUIRE(fixture.size() == 2);
  CHECK(!fixture[0].match.has_value());
  CHECK(fixture[1].match == "m");
}

TEST_CASE("http backend retries 429 then succeeds") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    CHECK(body.at("messages").at(0).at("content") == "hello");
    if (hits.fetch_add(1) < 2) {
      res.status = 429;
      return;
    }
    res.set_content(
        nlohmann::json{{"choices",
                        {{{"message", {{"role", "assistant"}, {"content", "hi there"}}}}}},
                       {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 3}}}}
            .dump(),
        "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpBackendConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port);
  config.model_name = "test-model";
  config.retry.base_delay_ms = 1;
  HttpBackend backend(config);
  const auto response = backend.complete(user_request("hello"));
  CHECK(response.content == "hi there");
  CHECK(response.prompt_tokens == 12);
  CHECK(response.completion_tokens == 3);
  CHECK(hits.load() == 3);
  const auto totals = backend.usage_totals();
  CHECK(totals.requests == 1);
  CHECK(totals.prompt_tokens == 12);

  server.stop();
  server_thread.join();
}

TEST_CASE("http backend gives up after five attempts") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    hits.fetch_add(1);
    res.status = 503;
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpBackendConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port);
  config.retry.base_delay_ms = 1;
  HttpBackend backend(config);
  CHECK_THROWS_AS(backend.complete(user_request("hello")), BackendFailure);
  CHECK(hits.load() == 5);

  server.stop();
  server_thread.join();
}

TEST_CASE("http backend does not retry client errors") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    hits.fetch_add(1);
    res.status = 401;
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpBackendConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port);
  config.retry.base_delay_ms = 1;
  HttpBackend backend(config);
  CHECK_THROWS_AS(backend.complete(user_request("hello")), BackendFailure);
  CHECK(hits.load() == 1);

  server.stop();
  server_thread.join();
}
