#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "haystack/assemble.hpp"
#include "haystack/types.hpp"

namespace haystack {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Integer similarity score in [0, 100].
class Score {
 public:
  explicit Score(int value);
  int value() const { return value_; }
  bool operator==(const Score&) const = default;

 private:
  int value_;
};

// ---------------------------------------------------------------------------
// Prompt

/// The scoring rubric, identical for every trial.
std::string_view rubric_text();
std::string_view response_instruction();

struct PromptBundle {
  std::string rubric;
  std::string doc_a;  // baseline
  std::string doc_b;  // altered
  std::string instruction;

  /// Full user message sent to the judge.
  std::string text() const;
  std::uint64_t hash() const;
};

/// Baseline first, altered second.
PromptBundle render_prompt(const DocumentPair& pair);
PromptBundle render_prompt(const std::string& doc_a, const std::string& doc_b);

/// First decimal integer in [0, 100]; numbers written as "/N" denominators,
/// decimals, and out-of-range integers are passed over.
std::optional<int> parse_score(std::string_view raw);

// ---------------------------------------------------------------------------
// Judges

struct TrialKey {
  std::string judge;
  NeedleType needle = NeedleType::None;
  HayType hay = HayType::Orig;
  Position position;
  std::string doc_id;

  std::uint64_t hash() const;
};

struct JudgeId {
  std::string name;
  std::string adapter;  // "http" | "mock"
  std::string model_version;
};

struct JudgeReply {
  Score score{0};
  std::string raw;
  int attempts = 1;
};

/// Run-wide cost guardrail shared by every judge.
class Budget {
 public:
  Budget(std::optional<std::uint64_t> max_trials = std::nullopt,
         std::optional<std::uint64_t> max_tokens = std::nullopt)
      : max_trials_(max_trials), max_tokens_(max_tokens) {}

  /// Accounts for one request; throws BudgetExceeded if a cap would be passed.
  void charge_request(std::uint64_t estimated_tokens);
  void add_tokens(std::uint64_t tokens) { tokens_ += tokens; }

  std::uint64_t requests() const { return requests_; }
  std::uint64_t tokens() const { return tokens_; }

 private:
  std::optional<std::uint64_t> max_trials_;
  std::optional<std::uint64_t> max_tokens_;
  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> tokens_{0};
};

/// Rough token count used for budgeting (4 characters per token).
std::uint64_t estimate_tokens(std::string_view s);

class Judge {
 public:
  virtual ~Judge() = default;
  virtual const JudgeId& id() const = 0;
  /// One isolated, stateless scoring request (plus re-asks / retries).
  virtual JudgeReply score(const TrialKey& key, const PromptBundle& prompt) = 0;
};

struct BiasProfile {
  double base = 80.0;
  double early_bias = 0.0;  // added when i > j, subtracted when i < j
  std::map<NeedleType, double> needle_shift;
  std::map<HayType, double> hay_shift;
  double bipolar_prob = 0.0;
  int k_low = 5;
  double noise_sd = 0.0;
  std::uint64_t seed = 0;
};

/// Deterministic in (profile, key).
Score mock_score(const BiasProfile& profile, const TrialKey& key);

class MockJudge final : public Judge {
 public:
  MockJudge(JudgeId id, BiasProfile profile, Budget* budget = nullptr)
      : id_(std::move(id)), profile_(std::move(profile)), budget_(budget) {}

  const JudgeId& id() const override { return id_; }
  JudgeReply score(const TrialKey& key, const PromptBundle& prompt) override;
  const BiasProfile& profile() const { return profile_; }

 private:
  JudgeId id_;
  BiasProfile profile_;
  Budget* budget_;
};

// ---------------------------------------------------------------------------
// HTTP adapter

struct HttpResponse {
  int status = 0;
  std::string body;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  /// Throws TransportError when no HTTP response was obtained at all.
  virtual HttpResponse post(const std::string& path, const std::string& body,
                            const std::multimap<std::string, std::string>& headers,
                            std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport for "scheme://host[:port]" base URLs.
std::unique_ptr<HttpTransport> make_httplib_transport(const std::string& base_url);

struct RetryPolicy {
  int max_retries = 5;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds backoff_max{30000};
  double multiplier = 2.0;

  std::chrono::milliseconds delay(int attempt) const;
};

struct HttpJudgeConfig {
  std::string api_style = "openai";  // "openai" | "anthropic"
  std::string endpoint;              // base URL
  std::string path;                  // empty: style default
  std::string model;
  std::string api_key_env;
  std::string auth_header;  // empty: style default
  std::chrono::milliseconds timeout{120000};
  RetryPolicy retry;
  int reasks = 2;  // extra requests after an unparseable reply
  int max_tokens = 1024;  // anthropic requires it
};

class HttpJudge final : public Judge {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  HttpJudge(JudgeId id, HttpJudgeConfig config, std::unique_ptr<HttpTransport> transport,
            Budget* budget = nullptr, Sleeper sleeper = {});

  const JudgeId& id() const override { return id_; }
  JudgeReply score(const TrialKey& key, const PromptBundle& prompt) override;

  /// Request body for one prompt (exposed for tests).
  std::string request_body(const PromptBundle& prompt) const;
  /// Extracts the assistant text from a response body.
  std::string extract_text(const std::string& body) const;

 private:
  std::string send_once(const PromptBundle& prompt);

  JudgeId id_;
  HttpJudgeConfig config_;
  std::unique_ptr<HttpTransport> transport_;
  Budget* budget_;
  Sleeper sleeper_;
  std::string api_key_;
};

}  // namespace haystack
