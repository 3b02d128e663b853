#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "haystack/annotation.hpp"

// Client side of the line-delimited annotation protocol.
//
//   request:  {"id": str, "text": str}
//   response: {"id": str,
//              "sentences": [{"start": int, "end": int}],
//              "tokens":    [[sent_idx, start, end, surface, lemma, pos, dep, head]],
//              "entities":  [[sent_idx, start, end, label]]}
//   error:    {"id": str, "error": str}
//
// Offsets are code points into the request text, end-exclusive. `head` is a
// token index into the response's token list.
namespace haystack::sidecar {

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OffsetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TimeoutError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Request {
  std::string id;
  std::string text;
};

struct SentenceSpan {
  std::size_t start = 0;
  std::size_t end = 0;
};

struct Response {
  std::string id;
  std::optional<std::string> error;
  std::vector<SentenceSpan> sentences;
  /// One annotation per sentence; token/entity offsets are relative to that
  /// sentence and heads index into the sentence's own token list.
  std::vector<SentenceAnnotation> annotations;
  /// Labels exactly as the sidecar sent them, parallel to the flattened
  /// entity list (before collapsing unknown labels to OTHER).
  std::vector<std::string> raw_entity_labels;

  /// Everything merged into a single annotation over the whole request text.
  SentenceAnnotation flatten() const;
};

std::string encode_request(const Request& request);

/// Parses and validates one response line against the text that was sent.
/// Throws ProtocolError for malformed records and OffsetError for spans that
/// do not index into `request_text`.
Response decode_response(std::string_view line, std::string_view request_text);

/// Inverse of decode_response, used by tools and tests that play the server.
std::string encode_response(const Response& response);

// ---------------------------------------------------------------------------

class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void write_line(const std::string& line) = 0;
  /// nullopt on EOF; throws TimeoutError if nothing arrives in time.
  virtual std::optional<std::string> read_line(std::chrono::milliseconds timeout) = 0;
};

/// Spawns `command` through /bin/sh and talks to it over stdin/stdout.
std::unique_ptr<LineChannel> spawn_process(const std::string& command);

/// Connects to a Unix domain socket.
std::unique_ptr<LineChannel> connect_unix_socket(const std::filesystem::path& path);

class Client {
 public:
  explicit Client(std::unique_ptr<LineChannel> channel,
                  std::chrono::milliseconds timeout = std::chrono::seconds(60));

  /// Sends the whole batch, then collects one response per id. Results are
  /// returned in request order regardless of the order they arrive in.
  /// Batches from different threads are serialized.
  std::vector<Response> annotate(const std::vector<Request>& batch);

  std::size_t calls() const { return calls_; }

 private:
  std::unique_ptr<LineChannel> channel_;
  std::chrono::milliseconds timeout_;
  std::size_t calls_ = 0;
  std::mutex mu_;
};

/// Annotator backed by a sidecar. Each corpus sentence is sent as its own
/// request so sentence indices stay those of the corpus splitter.
class SidecarAnnotator final : public Annotator {
 public:
  SidecarAnnotator(std::shared_ptr<Client> client, std::string model_tag)
      : client_(std::move(client)), model_tag_(std::move(model_tag)) {}

  SentenceAnnotation annotate(std::string_view sentence, std::size_t sentence_index) const override;
  std::vector<SentenceAnnotation> annotate_document(
      const std::vector<std::string>& sentences) const override;
  std::string version() const override { return "sidecar/" + model_tag_; }

 private:
  std::shared_ptr<Client> client_;
  std::string model_tag_;
};

// ---------------------------------------------------------------------------
// Conformance checking against a golden file: one JSON object per line,
// {"request": {...}, "response": {...}}.

struct GoldenPair {
  Request request;
  std::string expected_response_line;
};

std::vector<GoldenPair> load_golden(const std::filesystem::path& path);

struct CheckOutcome {
  std::string id;
  bool ok = false;
  std::string detail;
};

/// Sends every golden request through `client` and checks the reply parses,
/// echoes the id, validates offsets, and carries the golden entity list.
std::vector<CheckOutcome> check_conformance(Client& client, const std::vector<GoldenPair>& golden);

}  // namespace haystack::sidecar
