#include "haystack/sidecar.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "haystack/text.hpp"

namespace haystack::sidecar {

using nlohmann::json;

SentenceAnnotation Response::flatten() const {
  SentenceAnnotation out;
  for (std::size_t s = 0; s < annotations.size(); ++s) {
    const auto base = sentences[s].start;
    const auto token_base = out.tokens.size();
    for (auto tok : annotations[s].tokens) {
      tok.start += base;
      tok.end += base;
      tok.head += token_base;
      out.tokens.push_back(std::move(tok));
    }
    for (auto ent : annotations[s].entities) {
      ent.start += base;
      ent.end += base;
      out.entities.push_back(std::move(ent));
    }
  }
  return out;
}

std::string encode_request(const Request& request) {
  return json{{"id", request.id}, {"text", request.text}}.dump();
}

namespace {

std::size_t as_index(const json& v, const char* what) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ProtocolError(std::string("field ") + what + " must be a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace

Response decode_response(std::string_view line, std::string_view request_text) {
  json rec;
  try {
    rec = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed response line: ") + e.what());
  }
  if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string())
    throw ProtocolError("response record lacks a string id");
  Response resp;
  resp.id = rec["id"].get<std::string>();
  if (rec.contains("error")) {
    resp.error = rec["error"].is_string() ? rec["error"].get<std::string>() : rec["error"].dump();
    return resp;
  }
  for (const char* key : {"sentences", "tokens", "entities"})
    if (!rec.contains(key) || !rec[key].is_array())
      throw ProtocolError(std::string("response ") + resp.id + " lacks array field " + key);

  const auto cps = text::decode_utf8(request_text);
  const auto slice = [&](std::size_t b, std::size_t e) {
    return text::encode_utf8(std::u32string_view(cps).substr(b, e - b));
  };

  for (const auto& s : rec["sentences"]) {
    if (!s.is_object() || !s.contains("start") || !s.contains("end"))
      throw ProtocolError("sentence record needs start and end");
    SentenceSpan span{as_index(s["start"], "start"), as_index(s["end"], "end")};
    if (span.start > span.end || span.end > cps.size())
      throw OffsetError("sentence span [" + std::to_string(span.start) + "," +
                        std::to_string(span.end) + ") outside text of length " +
                        std::to_string(cps.size()));
    resp.sentences.push_back(span);
  }
  resp.annotations.resize(resp.sentences.size());
  for (std::size_t s = 0; s < resp.annotations.size(); ++s) resp.annotations[s].sentence_index = s;

  // First pass: map global token index -> (sentence, local index).
  const auto& tokens = rec["tokens"];
  std::vector<std::pair<std::size_t, std::size_t>> where;
  where.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (!t.is_array() || t.size() != 8 || !t[3].is_string() || !t[4].is_string() ||
        !t[5].is_string() || !t[6].is_string())
      throw ProtocolError("token record must be [sent_idx, start, end, surface, lemma, pos, dep, head]");
    const auto sent = as_index(t[0], "sent_idx");
    if (sent >= resp.sentences.size()) throw ProtocolError("token sent_idx out of range");
    const auto start = as_index(t[1], "start");
    const auto end = as_index(t[2], "end");
    const auto& span = resp.sentences[sent];
    if (start >= end || end > cps.size())
      throw OffsetError("token span [" + std::to_string(start) + "," + std::to_string(end) +
                        ") outside text of length " + std::to_string(cps.size()));
    if (start < span.start || end > span.end) throw OffsetError("token span outside its sentence");
    if (slice(start, end) != t[3].get<std::string>())
      throw OffsetError("token surface does not match text slice");
    Token tok;
    tok.start = start - span.start;
    tok.end = end - span.start;
    tok.surface = t[3].get<std::string>();
    tok.lemma = t[4].get<std::string>();
    tok.pos = pos_from_string(t[5].get<std::string>());
    tok.dep = t[6].get<std::string>();
    where.emplace_back(sent, resp.annotations[sent].tokens.size());
    resp.annotations[sent].tokens.push_back(std::move(tok));
  }
  for (std::size_t g = 0; g < tokens.size(); ++g) {
    const auto head = as_index(tokens[g][7], "head");
    if (head >= tokens.size()) throw ProtocolError("token head out of range");
    const auto [sent, local] = where[g];
    const auto [head_sent, head_local] = where[head];
    // Cross-sentence heads cannot be represented per sentence; treat as self.
    resp.annotations[sent].tokens[local].head = head_sent == sent ? head_local : local;
  }

  for (const auto& e : rec["entities"]) {
    if (!e.is_array() || e.size() != 4 || !e[3].is_string())
      throw ProtocolError("entity record must be [sent_idx, start, end, label]");
    const auto sent = as_index(e[0], "sent_idx");
    if (sent >= resp.sentences.size()) throw ProtocolError("entity sent_idx out of range");
    const auto start = as_index(e[1], "start");
    const auto end = as_index(e[2], "end");
    const auto& span = resp.sentences[sent];
    if (start >= end || end > cps.size())
      throw OffsetError("entity span [" + std::to_string(start) + "," + std::to_string(end) +
                        ") outside text of length " + std::to_string(cps.size()));
    if (start < span.start || end > span.end) throw OffsetError("entity span outside its sentence");
    EntitySpan ent;
    ent.start = start - span.start;
    ent.end = end - span.start;
    ent.label = entity_label_from_string(e[3].get<std::string>());
    ent.text = slice(start, end);
    resp.raw_entity_labels.push_back(e[3].get<std::string>());
    resp.annotations[sent].entities.push_back(std::move(ent));
  }
  return resp;
}

std::string encode_response(const Response& response) {
  if (response.error) return json{{"id", response.id}, {"error", *response.error}}.dump();
  json sentences = json::array();
  json tokens = json::array();
  json entities = json::array();
  std::size_t label_idx = 0;
  for (std::size_t s = 0; s < response.sentences.size(); ++s) {
    const auto base = response.sentences[s].start;
    sentences.push_back({{"start", response.sentences[s].start}, {"end", response.sentences[s].end}});
    const auto token_base = tokens.size();
    for (const auto& t : response.annotations[s].tokens)
      tokens.push_back({s, t.start + base, t.end + base, t.surface, t.lemma,
                        std::string(to_string(t.pos)), t.dep, t.head + token_base});
    for (const auto& e : response.annotations[s].entities) {
      const std::string label = label_idx < response.raw_entity_labels.size()
                                    ? response.raw_entity_labels[label_idx]
                                    : std::string(to_string(e.label));
      ++label_idx;
      entities.push_back({s, e.start + base, e.end + base, label});
    }
  }
  return json{{"id", response.id}, {"sentences", sentences}, {"tokens", tokens}, {"entities", entities}}
      .dump();
}

// ---------------------------------------------------------------------------
// Channels

namespace {

class FdChannel : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd, pid_t child) : read_fd_(read_fd), write_fd_(write_fd), child_(child) {}

  ~FdChannel() override {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (child_ > 0) {
      int status = 0;
      // Closing stdin is the shutdown signal; give the child a moment.
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(child_, &status, WNOHANG) == child_) return;
        ::usleep(20000);
      }
      ::kill(child_, SIGTERM);
      ::waitpid(child_, &status, 0);
    }
  }

  void write_line(const std::string& line) override {
    std::string buf = line;
    buf.push_back('\n');
    std::size_t off = 0;
    while (off < buf.size()) {
      const auto n = ::write(write_fd_, buf.data() + off, buf.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("sidecar write failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::optional<std::string> read_line(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        auto line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      if (eof_) {
        if (buffer_.empty()) return std::nullopt;
        auto line = std::move(buffer_);
        buffer_.clear();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw TimeoutError("sidecar did not answer in time");
      pollfd pfd{read_fd_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) throw TimeoutError("sidecar did not answer in time");
      char chunk[65536];
      const auto n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("sidecar read failed: ") + std::strerror(errno));
      }
      if (n == 0) eof_ = true;
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int read_fd_;
  int write_fd_;
  pid_t child_;
  std::string buffer_;
  bool eof_ = false;
};

}  // namespace

std::unique_ptr<LineChannel> spawn_process(const std::string& command) {
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
    throw ProtocolError(std::string("pipe failed: ") + std::strerror(errno));
  const pid_t pid = ::fork();
  if (pid < 0) throw ProtocolError(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  ::signal(SIGPIPE, SIG_IGN);
  return std::make_unique<FdChannel>(from_child[0], to_child[1], pid);
}

std::unique_ptr<LineChannel> connect_unix_socket(const std::filesystem::path& path) {
  const int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
  if (fd < 0) throw ProtocolError(std::string("socket failed: ") + std::strerror(errno));
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  const auto p = path.string();
  if (p.size() >= sizeof addr.sun_path) {
    ::close(fd);
    throw ProtocolError("socket path too long: " + p);
  }
  std::memcpy(addr.sun_path, p.c_str(), p.size() + 1);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const std::string err = std::strerror(errno);
    ::close(fd);
    throw ProtocolError("cannot connect to " + p + ": " + err);
  }
  ::signal(SIGPIPE, SIG_IGN);
  return std::make_unique<FdChannel>(fd, fd, 0);
}

// ---------------------------------------------------------------------------

Client::Client(std::unique_ptr<LineChannel> channel, std::chrono::milliseconds timeout)
    : channel_(std::move(channel)), timeout_(timeout) {}

std::vector<Response> Client::annotate(const std::vector<Request>& batch) {
  if (batch.empty()) return {};
  std::lock_guard lock(mu_);
  std::map<std::string, std::size_t> pending;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (!pending.emplace(batch[k].id, k).second)
      throw ProtocolError("duplicate request id in batch: " + batch[k].id);
  }
  for (const auto& req : batch) channel_->write_line(encode_request(req));
  ++calls_;

  std::vector<std::optional<Response>> slots(batch.size());
  std::size_t remaining = batch.size();
  while (remaining > 0) {
    const auto line = channel_->read_line(timeout_);
    if (!line) throw ProtocolError("sidecar closed the stream with responses outstanding");
    if (text::trim(*line).empty()) continue;
    std::string id;
    try {
      const auto probe = json::parse(*line);
      id = probe.at("id").get<std::string>();
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("malformed response line: ") + e.what());
    }
    const auto it = pending.find(id);
    if (it == pending.end()) throw ProtocolError("response for unknown id " + id);
    slots[it->second] = decode_response(*line, batch[it->second].text);
    pending.erase(it);
    --remaining;
  }
  std::vector<Response> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

SentenceAnnotation SidecarAnnotator::annotate(std::string_view sentence,
                                              std::size_t sentence_index) const {
  auto responses = client_->annotate({Request{"s" + std::to_string(sentence_index), std::string(sentence)}});
  if (responses.front().error) throw ProtocolError("sidecar error: " + *responses.front().error);
  auto ann = responses.front().flatten();
  ann.sentence_index = sentence_index;
  return ann;
}

std::vector<SentenceAnnotation> SidecarAnnotator::annotate_document(
    const std::vector<std::string>& sentences) const {
  std::vector<Request> batch;
  batch.reserve(sentences.size());
  for (std::size_t k = 0; k < sentences.size(); ++k) batch.push_back({"s" + std::to_string(k), sentences[k]});
  const auto responses = client_->annotate(batch);
  std::vector<SentenceAnnotation> out;
  out.reserve(responses.size());
  for (std::size_t k = 0; k < responses.size(); ++k) {
    if (responses[k].error) throw ProtocolError("sidecar error: " + *responses[k].error);
    auto ann = responses[k].flatten();
    ann.sentence_index = k;
    out.push_back(std::move(ann));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<GoldenPair> load_golden(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open golden file " + path.string());
  std::vector<GoldenPair> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto rec = json::parse(line);
    GoldenPair pair;
    pair.request.id = rec.at("request").at("id").get<std::string>();
    pair.request.text = rec.at("request").at("text").get<std::string>();
    pair.expected_response_line = rec.at("response").dump();
    out.push_back(std::move(pair));
  }
  return out;
}

std::vector<CheckOutcome> check_conformance(Client& client, const std::vector<GoldenPair>& golden) {
  std::vector<Request> batch;
  batch.reserve(golden.size());
  for (const auto& g : golden) batch.push_back(g.request);
  std::vector<CheckOutcome> out;
  std::vector<Response> actual;
  try {
    actual = client.annotate(batch);
  } catch (const std::exception& e) {
    for (const auto& g : golden) out.push_back({g.request.id, false, e.what()});
    return out;
  }
  const auto entity_list = [](const Response& r) {
    std::vector<std::pair<std::string, std::string>> v;
    std::size_t k = 0;
    for (const auto& ann : r.annotations)
      for (const auto& e : ann.entities) {
        v.emplace_back(e.text, k < r.raw_entity_labels.size() ? r.raw_entity_labels[k] : "");
        ++k;
      }
    return v;
  };
  for (std::size_t k = 0; k < golden.size(); ++k) {
    CheckOutcome o{golden[k].request.id, false, ""};
    try {
      const auto expected = decode_response(golden[k].expected_response_line, golden[k].request.text);
      const auto& got = actual[k];
      if (got.error) {
        o.detail = "sidecar error: " + *got.error;
      } else if (entity_list(got) != entity_list(expected)) {
        o.detail = "entity list differs from golden";
      } else if (got.sentences.size() != expected.sentences.size()) {
        o.detail = "sentence count differs from golden";
      } else {
        o.ok = true;
        o.detail = "ok";
      }
    } catch (const std::exception& e) {
      o.detail = e.what();
    }
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace haystack::sidecar
