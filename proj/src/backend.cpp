#include "consult/backend.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <random>
#include <thread>

#include "consult/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace consult {

using nlohmann::json;

std::string to_string(ChatRole r) {
  switch (r) {
    case ChatRole::system: return "system";
    case ChatRole::user: return "user";
    case ChatRole::assistant: return "assistant";
  }
  return "user";
}

ChatResponse ChatBackend::complete(const ChatRequest& request) {
  if (request.messages.empty()) {
    throw ValidationError("chat request must carry at least one message");
  }
  if (request.messages.front().role == ChatRole::assistant) {
    throw ValidationError("first chat message must be system or user");
  }
  ChatResponse response = do_complete(request);
  {
    std::lock_guard lock(mutex_);
    totals_.requests += 1;
    totals_.prompt_tokens += response.prompt_tokens;
    totals_.completion_tokens += response.completion_tokens;
  }
  return response;
}

UsageTotals ChatBackend::usage_totals() const {
  std::lock_guard lock(mutex_);
  return totals_;
}

ScriptedFixture load_fixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("fixture file not found: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FileError("malformed fixture file " + path + ": " + e.what());
  }
  ScriptedFixture fixture;
  for (const auto& entry : j) {
    FixtureEntry fe;
    if (entry.contains("match") && !entry.at("match").is_null()) {
      fe.match = entry.at("match").get<std::string>();
    }
    fe.reply = entry.at("reply").get<std::string>();
    fixture.push_back(std::move(fe));
  }
  return fixture;
}

ScriptedBackend::ScriptedBackend(ScriptedFixture fixture) : fixture_(std::move(fixture)) {}

std::size_t ScriptedBackend::remaining() const {
  std::lock_guard lock(mutex_);
  return fixture_.size() - next_;
}

ChatResponse ScriptedBackend::do_complete(const ChatRequest& request) {
  std::lock_guard lock(mutex_);
  if (next_ >= fixture_.size()) throw FixtureExhausted();
  const FixtureEntry& entry = fixture_[next_];
  if (entry.match) {
    std::string last_user;
    for (const auto& m : request.messages) {
      if (m.role == ChatRole::user) last_user = m.content;
    }
    if (last_user.find(*entry.match) == std::string::npos) {
      throw FixtureMismatch("entry " + std::to_string(next_) + " expects \"" + *entry.match +
                            "\" in the last user message");
    }
  }
  ++next_;
  return ChatResponse{entry.reply, 0, 0, 0};
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) {
    if (const char* env = std::getenv("CONSULT_BASE_URL")) config_.base_url = env;
  }
  if (config_.api_key.empty()) {
    if (const char* env = std::getenv("CONSULT_API_KEY")) config_.api_key = env;
  }
  if (config_.base_url.empty()) {
    throw ConfigError("http backend requires a base URL (flag or CONSULT_BASE_URL)");
  }
}

namespace {

bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

ChatResponse HttpBackend::do_complete(const ChatRequest& request) {
  json body;
  body["model"] = request.model_name.empty() ? config_.model_name : request.model_name;
  body["temperature"] = request.temperature;
  if (request.seed) body["seed"] = *request.seed;
  if (request.max_tokens) body["max_tokens"] = *request.max_tokens;
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  body["messages"] = messages;
  const std::string payload = body.dump();

  httplib::Client client(config_.base_url);
  client.set_connection_timeout(std::chrono::milliseconds(config_.retry.timeout_ms));
  client.set_read_timeout(std::chrono::milliseconds(config_.retry.timeout_ms));
  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }

  std::mt19937_64 jitter_rng(std::random_device{}());
  std::string last_error;
  for (int attempt = 0; attempt < config_.retry.max_attempts; ++attempt) {
    if (attempt > 0) {
      const std::int64_t cap = config_.retry.base_delay_ms << (attempt - 1);
      std::uniform_int_distribution<std::int64_t> dist(0, cap);
      std::this_thread::sleep_for(std::chrono::milliseconds(dist(jitter_rng)));
    }
    const auto start = std::chrono::steady_clock::now();
    auto result = client.Post("/v1/chat/completions", headers, payload, "application/json");
    const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    if (retryable_status(result->status)) {
      last_error = "http status " + std::to_string(result->status);
      continue;
    }
    if (result->status != 200) {
      throw BackendFailure("http status " + std::to_string(result->status) + ": " +
                           result->body);
    }
    try {
      const json reply = json::parse(result->body);
      ChatResponse response;
      response.content =
          reply.at("choices").at(0).at("message").at("content").get<std::string>();
      if (reply.contains("usage")) {
        response.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
        response.completion_tokens = reply["usage"].value("completion_tokens", 0);
      }
      response.latency_ms = latency;
      return response;
    } catch (const json::exception& e) {
      throw BackendFailure(std::string("unparseable completion response: ") + e.what());
    }
  }
  throw BackendFailure("retries exhausted: " + last_error);
}

}  // namespace consult
