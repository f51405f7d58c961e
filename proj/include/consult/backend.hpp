#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace consult {

enum class ChatRole { system, user, assistant };

std::string to_string(ChatRole r);

struct ChatMessage {
  ChatRole role = ChatRole::user;
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  std::string model_name;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
  std::optional<int> max_tokens;
};

struct ChatResponse {
  std::string content;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t latency_ms = 0;
};

struct UsageTotals {
  std::int64_t requests = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

// Chat-completion handle. Shareable across concurrent runs; usage counters
// are internally synchronized.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  ChatResponse complete(const ChatRequest& request);
  UsageTotals usage_totals() const;

 protected:
  virtual ChatResponse do_complete(const ChatRequest& request) = 0;

 private:
  mutable std::mutex mutex_;
  UsageTotals totals_;
};

struct FixtureEntry {
  std::optional<std::string> match;  // nullopt = match anything
  std::string reply;
};

using ScriptedFixture = std::vector<FixtureEntry>;

// JSON array of {"match": string|null, "reply": string}.
ScriptedFixture load_fixture(const std::string& path);

// Deterministic test backend: entries are consumed strictly in order; the
// front entry's matcher must occur in the last user message or the call
// fails loudly (FixtureMismatch / FixtureExhausted — test bugs).
class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(ScriptedFixture fixture);

  std::size_t remaining() const;

 protected:
  ChatResponse do_complete(const ChatRequest& request) override;

 private:
  mutable std::mutex mutex_;
  ScriptedFixture fixture_;
  std::size_t next_ = 0;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::int64_t base_delay_ms = 1000;  // doubled per attempt, full jitter
  std::int64_t timeout_ms = 60000;
};

struct HttpBackendConfig {
  std::string base_url;   // falls back to CONSULT_BASE_URL
  std::string api_key;    // falls back to CONSULT_API_KEY
  std::string model_name;
  RetryPolicy retry;
};

// OpenAI-compatible chat-completions client with exponential backoff on
// timeout/429/5xx.
class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

 protected:
  ChatResponse do_complete(const ChatRequest& request) override;

 private:
  HttpBackendConfig config_;
};

}  // namespace consult
