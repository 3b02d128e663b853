#include "haystack/judge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "haystack/random.hpp"

namespace haystack {

using nlohmann::json;

Score::Score(int value) : value_(value) {
  if (value < 0 || value > 100) throw std::out_of_range("score outside [0, 100]: " + std::to_string(value));
}

// ---------------------------------------------------------------------------
// Prompt

std::string_view rubric_text() {
  static constexpr std::string_view kRubric =
      "Semantic Similarity (Scale: 0-100)\n"
      "\n"
      "Score the degree to which two text documents are semantically similar, based on underlying "
      "concepts and ideas rather than surface-level lexical features, word choice, or syntax.\n"
      "\n"
      "0-25 (Poor): The documents have significantly different semantic meaning, conveying "
      "fundamentally different subject matter, topics, ideas, or context.\n"
      "\n"
      "26-50 (Fair): The documents share some overlap in semantic meaning, but differences outweigh "
      "similarities. Significant differences in subject matter, topics, ideas, or context.\n"
      "\n"
      "51-75 (Good): The documents share substantial semantic similarity. Similarities outweigh "
      "differences, but nontrivial differences in subject matter, topics, ideas, or context remain.\n"
      "\n"
      "76-100 (Excellent): The documents have nearly identical or identical semantic meaning. Both "
      "convey the same core idea, information, subject matter, topics, and context.";
  return kRubric;
}

std::string_view response_instruction() {
  return "Respond with a single integer between 0 and 100.";
}

std::string PromptBundle::text() const {
  std::string out;
  out.reserve(rubric.size() + doc_a.size() + doc_b.size() + instruction.size() + 64);
  out += rubric;
  out += "\n\nDocument 1:\n";
  out += doc_a;
  out += "\n\nDocument 2:\n";
  out += doc_b;
  out += "\n\n";
  out += instruction;
  return out;
}

std::uint64_t PromptBundle::hash() const { return fnv1a64(text()); }

PromptBundle render_prompt(const std::string& doc_a, const std::string& doc_b) {
  return {std::string(rubric_text()), doc_a, doc_b, std::string(response_instruction())};
}

PromptBundle render_prompt(const DocumentPair& pair) {
  return render_prompt(pair.baseline.render(), pair.altered.render());
}

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }

}  // namespace

std::optional<int> parse_score(std::string_view raw) {
  std::size_t i = 0;
  while (i < raw.size()) {
    if (!is_digit(raw[i])) {
      ++i;
      continue;
    }
    const std::size_t b = i;
    while (i < raw.size() && is_digit(raw[i])) ++i;
    const std::size_t e = i;

    // Decimal: swallow the fractional part and move on.
    if (e + 1 < raw.size() && (raw[e] == '.' || raw[e] == ',') && is_digit(raw[e + 1])) {
      i = e + 1;
      while (i < raw.size() && is_digit(raw[i])) ++i;
      continue;
    }
    if (b > 0 && (is_alpha(raw[b - 1]) || raw[b - 1] == '-')) continue;
    if (e < raw.size() && is_alpha(raw[e])) continue;
    std::size_t p = b;
    while (p > 0 && raw[p - 1] == ' ') --p;
    if (p > 0 && raw[p - 1] == '/') continue;  // denominator of "89/100"

    auto digits = raw.substr(b, e - b);
    while (digits.size() > 1 && digits.front() == '0') digits.remove_prefix(1);
    if (digits.size() > 3) continue;
    const int value = std::stoi(std::string(digits));
    if (value >= 0 && value <= 100) return value;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

std::uint64_t TrialKey::hash() const {
  return hash_all(fnv1a64("trial"), std::string_view(judge), to_string(needle), to_string(hay),
                  static_cast<std::uint64_t>(position.i), static_cast<std::uint64_t>(position.j),
                  std::string_view(doc_id));
}

void Budget::charge_request(std::uint64_t estimated_tokens) {
  if (max_trials_ && requests_.load() + 1 > *max_trials_)
    throw BudgetExceeded("request cap of " + std::to_string(*max_trials_) + " reached");
  if (max_tokens_ && tokens_.load() + estimated_tokens > *max_tokens_)
    throw BudgetExceeded("token cap of " + std::to_string(*max_tokens_) + " reached");
  ++requests_;
  tokens_ += estimated_tokens;
}

std::uint64_t estimate_tokens(std::string_view s) { return (s.size() + 3) / 4; }

Score mock_score(const BiasProfile& profile, const TrialKey& key) {
  CounterRng rng(hash_combine(profile.seed, key.hash()));
  double s = profile.base;
  if (const auto it = profile.needle_shift.find(key.needle); it != profile.needle_shift.end()) s += it->second;
  if (const auto it = profile.hay_shift.find(key.hay); it != profile.hay_shift.end()) s += it->second;
  const int diff = key.position.i - key.position.j;
  s += profile.early_bias * static_cast<double>((diff > 0) - (diff < 0));
  s += profile.noise_sd * rng.gaussian();

  // Draws below happen unconditionally so the stream layout never depends on p.
  const double u = rng.uniform();
  const bool high = rng.uniform() < 0.5;
  const auto k = static_cast<std::uint64_t>(std::max(0, profile.k_low));
  const auto offset = static_cast<double>(rng.below(k + 1));
  if (u < profile.bipolar_prob) s = high ? 100.0 - offset : offset;

  s = std::clamp(s, 0.0, 100.0);
  return Score(static_cast<int>(std::lround(s)));
}

JudgeReply MockJudge::score(const TrialKey& key, const PromptBundle& prompt) {
  if (budget_) budget_->charge_request(estimate_tokens(prompt.text()) + 1);
  const auto s = mock_score(profile_, key);
  return {s, std::to_string(s.value()), 1};
}

// ---------------------------------------------------------------------------
// HTTP

std::chrono::milliseconds RetryPolicy::delay(int attempt) const {
  const double ms = static_cast<double>(backoff_base.count()) * std::pow(multiplier, attempt);
  return std::chrono::milliseconds(
      static_cast<long long>(std::min(ms, static_cast<double>(backoff_max.count()))));
}

HttpJudge::HttpJudge(JudgeId id, HttpJudgeConfig config, std::unique_ptr<HttpTransport> transport,
                     Budget* budget, Sleeper sleeper)
    : id_(std::move(id)),
      config_(std::move(config)),
      transport_(std::move(transport)),
      budget_(budget),
      sleeper_(std::move(sleeper)) {
  if (config_.api_style != "openai" && config_.api_style != "anthropic")
    throw std::invalid_argument("unknown api_style " + config_.api_style);
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key || !*key)
      throw std::runtime_error("judge " + id_.name + ": environment variable " + config_.api_key_env +
                               " is not set");
    api_key_ = key;
  }
}

std::string HttpJudge::request_body(const PromptBundle& prompt) const {
  json body = {{"model", config_.model},
               {"messages", json::array({{{"role", "user"}, {"content", prompt.text()}}})}};
  if (config_.api_style == "anthropic") body["max_tokens"] = config_.max_tokens;
  return body.dump();
}

std::string HttpJudge::extract_text(const std::string& body) const {
  const auto parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) return body;
  if (config_.api_style == "anthropic") {
    if (!parsed.contains("content") || !parsed["content"].is_array()) return body;
    std::string out;
    for (const auto& part : parsed["content"])
      if (part.value("type", "") == "text") out += part.value("text", "");
    return out;
  }
  if (!parsed.contains("choices") || !parsed["choices"].is_array() || parsed["choices"].empty()) return body;
  const auto& msg = parsed["choices"][0]["message"];
  if (msg.is_object() && msg.contains("content")) {
    const auto& c = msg["content"];
    if (c.is_string()) return c.get<std::string>();
    if (c.is_array()) {
      std::string out;
      for (const auto& part : c)
        if (part.is_object()) out += part.value("text", "");
      return out;
    }
  }
  return body;
}

std::string HttpJudge::send_once(const PromptBundle& prompt) {
  const auto body = request_body(prompt);
  std::multimap<std::string, std::string> headers{{"Content-Type", "application/json"}};
  const bool anthropic = config_.api_style == "anthropic";
  if (!api_key_.empty()) {
    const auto header = !config_.auth_header.empty() ? config_.auth_header : anthropic ? "x-api-key" : "Authorization";
    headers.emplace(header, header == "Authorization" ? "Bearer " + api_key_ : api_key_);
  }
  if (anthropic) headers.emplace("anthropic-version", "2023-06-01");
  const auto path = !config_.path.empty() ? config_.path : anthropic ? "/v1/messages" : "/v1/chat/completions";

  std::string last_error;
  for (int attempt = 0; attempt <= config_.retry.max_retries; ++attempt) {
    if (attempt > 0) sleeper_(config_.retry.delay(attempt - 1));
    if (budget_) budget_->charge_request(estimate_tokens(body));
    HttpResponse resp;
    try {
      resp = transport_->post(path, body, headers, config_.timeout);
    } catch (const TransportError& e) {
      last_error = e.what();
      continue;
    }
    if (resp.status >= 200 && resp.status < 300) {
      auto out = extract_text(resp.body);
      if (budget_) budget_->add_tokens(estimate_tokens(out));
      return out;
    }
    last_error = "HTTP " + std::to_string(resp.status);
    if (resp.status != 408 && resp.status != 429 && resp.status < 500)
      throw TransportError("judge " + id_.name + ": non-retryable " + last_error + ": " + resp.body.substr(0, 200));
  }
  throw TransportError("judge " + id_.name + ": giving up after " + std::to_string(config_.retry.max_retries + 1) +
                       " attempts: " + last_error);
}

JudgeReply HttpJudge::score(const TrialKey& key, const PromptBundle& prompt) {
  (void)key;
  std::string raw;
  for (int ask = 0; ask <= config_.reasks; ++ask) {
    raw = send_once(prompt);
    if (const auto v = parse_score(raw)) return {Score(*v), raw, ask + 1};
  }
  throw ParseError("judge " + id_.name + ": no score in reply after " + std::to_string(config_.reasks + 1) +
                   " requests: " + raw.substr(0, 200));
}

}  // namespace haystack
