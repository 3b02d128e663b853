#include <doctest.h>

#include <deque>
#include <functional>
#include <set>

#include <nlohmann/json.hpp>

#include "haystack/perturb.hpp"
#include "haystack/sidecar.hpp"

using namespace haystack;
using namespace haystack::sidecar;
using nlohmann::json;

namespace {

const std::string kData = HAYSTACK_TEST_DATA;
const std::string kFake = HAYSTACK_FAKE_SIDECAR;

std::shared_ptr<Client> fake_client(const std::string& flags, std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
  return std::make_shared<Client>(spawn_process(kFake + " " + flags), timeout);
}

const std::string kCaesar = "Caesar was a Roman general.";

std::string caesar_response(const std::string& id) {
  return json{{"id", id},
              {"sentences", {{{"start", 0}, {"end", 27}}}},
              {"tokens",
               {{0, 0, 6, "Caesar", "Caesar", "PROPN", "nsubj", 1},
                {0, 7, 10, "was", "be", "AUX", "ROOT", 1},
                {0, 11, 12, "a", "a", "DET", "det", 4},
                {0, 13, 18, "Roman", "Roman", "ADJ", "amod", 4},
                {0, 19, 26, "general", "general", "NOUN", "attr", 1},
                {0, 26, 27, ".", ".", "PUNCT", "punct", 1}}},
              {"entities", {{0, 0, 6, "PERSON"}, {0, 13, 18, "NORP"}}}}
      .dump();
}

// In-memory channel: answers each written request from a callback.
class LoopChannel final : public LineChannel {
 public:
  explicit LoopChannel(std::function<std::vector<std::string>(const json&)> answer) : answer_(std::move(answer)) {}
  void write_line(const std::string& line) override {
    for (auto& l : answer_(json::parse(line))) out_.push_back(std::move(l));
  }
  std::optional<std::string> read_line(std::chrono::milliseconds) override {
    if (out_.empty()) return std::nullopt;
    auto l = out_.front();
    out_.pop_front();
    return l;
  }

 private:
  std::function<std::vector<std::string>(const json&)> answer_;
  std::deque<std::string> out_;
};

}  // namespace

TEST_SUITE("sidecar") {
  TEST_CASE("decode a response with global heads and offsets") {
    const auto r = decode_response(caesar_response("c"), kCaesar);
    CHECK(r.id == "c");
    REQUIRE(r.annotations.size() == 1);
    const auto& ann = r.annotations[0];
    REQUIRE(ann.root());
    CHECK(ann.tokens[*ann.root()].surface == "was");
    CHECK(ann.tokens[2].head == 4);
    CHECK(ann.entities[1].label == EntityLabel::Other);
    CHECK(r.raw_entity_labels == std::vector<std::string>{"PERSON", "NORP"});
    CHECK_FALSE(validate_annotation(kCaesar, ann));
    CHECK(decode_response(encode_response(r), kCaesar).raw_entity_labels == r.raw_entity_labels);
    CHECK(json::parse(encode_response(r)) == json::parse(caesar_response("c")));
  }

  TEST_CASE("multi-sentence offsets become sentence-relative") {
    const std::string text = "Zoë ran. São Paulo won.";
    const json resp = {{"id", "x"},
                       {"sentences", {{{"start", 0}, {"end", 8}}, {{"start", 9}, {"end", 23}}}},
                       {"tokens",
                        {{0, 0, 3, "Zoë", "Zoë", "PROPN", "nsubj", 1},
                         {0, 4, 7, "ran", "run", "VERB", "ROOT", 1},
                         {0, 7, 8, ".", ".", "PUNCT", "punct", 1},
                         {1, 9, 18, "São Paulo", "São Paulo", "PROPN", "nsubj", 4},
                         {1, 19, 22, "won", "win", "VERB", "ROOT", 4},
                         {1, 22, 23, ".", ".", "PUNCT", "punct", 4}}},
                       {"entities", {{0, 0, 3, "PERSON"}, {1, 9, 18, "GPE"}}}};
    const auto r = decode_response(resp.dump(), text);
    REQUIRE(r.annotations.size() == 2);
    CHECK(r.annotations[1].tokens[0].start == 0);
    CHECK(r.annotations[1].tokens[0].head == 1);
    CHECK(r.annotations[1].entities[0].text == "São Paulo");
    CHECK_FALSE(validate_annotation("São Paulo won.", r.annotations[1]));
    const auto flat = r.flatten();
    CHECK(flat.entities.size() == 2);
    CHECK(flat.entities[1].start == 9);
    CHECK(flat.tokens[4].head == 4);
  }

  TEST_CASE("malformed responses are rejected") {
    CHECK_THROWS_AS(decode_response("not json", kCaesar), ProtocolError);
    CHECK_THROWS_AS(decode_response(R"({"sentences": []})", kCaesar), ProtocolError);
    CHECK_THROWS_AS(decode_response(R"({"id": "a", "tokens": [], "entities": []})", kCaesar), ProtocolError);
    auto bad = json::parse(caesar_response("c"));
    bad["entities"][0][2] = 99;
    CHECK_THROWS_AS(decode_response(bad.dump(), kCaesar), OffsetError);
    bad = json::parse(caesar_response("c"));
    bad["tokens"][0][3] = "Cesar";
    CHECK_THROWS_AS(decode_response(bad.dump(), kCaesar), OffsetError);
    bad = json::parse(caesar_response("c"));
    bad["tokens"][0][7] = 40;
    CHECK_THROWS_AS(decode_response(bad.dump(), kCaesar), ProtocolError);
    bad = json::parse(caesar_response("c"));
    bad["tokens"][0][1] = -1;
    CHECK_THROWS_AS(decode_response(bad.dump(), kCaesar), ProtocolError);
    bad = json::parse(caesar_response("c"));
    bad["sentences"][0]["end"] = 28;
    CHECK_THROWS_AS(decode_response(bad.dump(), kCaesar), OffsetError);
    const auto err = decode_response(R"({"id": "a", "error": "model missing"})", kCaesar);
    CHECK(err.error == "model missing");
  }

  TEST_CASE("client reorders responses and rejects strangers") {
    Client client(std::make_unique<LoopChannel>([](const json& req) {
      return std::vector<std::string>{caesar_response(req["id"].get<std::string>())};
    }));
    const auto out = client.annotate({{"b", kCaesar}, {"a", kCaesar}});
    CHECK(out[0].id == "b");
    CHECK(out[1].id == "a");
    CHECK(client.calls() == 1);
    CHECK_THROWS_AS(client.annotate({{"a", kCaesar}, {"a", kCaesar}}), ProtocolError);
    CHECK(client.annotate({}).empty());

    Client liar(std::make_unique<LoopChannel>([](const json&) { return std::vector<std::string>{caesar_response("zzz")}; }));
    CHECK_THROWS_AS(liar.annotate({{"a", kCaesar}}), ProtocolError);
    Client mute(std::make_unique<LoopChannel>([](const json&) { return std::vector<std::string>{}; }));
    CHECK_THROWS_AS(mute.annotate({{"a", kCaesar}}), ProtocolError);
  }

  TEST_CASE("golden file passes against the fake sidecar") {
    const auto golden = load_golden(kData + "/sidecar_golden.jsonl");
    REQUIRE(golden.size() == 10);
    auto client = fake_client("--golden " + kData + "/sidecar_golden.jsonl --reverse-batch 5");
    const auto outcomes = check_conformance(*client, golden);
    REQUIRE(outcomes.size() == 10);
    for (const auto& o : outcomes) {
      INFO(o.id << ": " << o.detail);
      CHECK(o.ok);
    }
  }

  TEST_CASE("golden Cleopatra entity list") {
    const auto golden = load_golden(kData + "/sidecar_golden.jsonl");
    const auto& g = golden[0];
    REQUIRE(g.request.id == "cleopatra");
    const auto r = decode_response(g.expected_response_line, g.request.text);
    std::set<std::pair<std::string, EntityLabel>> distinct;
    for (const auto& ann : r.annotations)
      for (const auto& e : ann.entities) distinct.insert({e.text, e.label});
    CHECK(distinct.count({"Cleopatra", EntityLabel::Person}));
    CHECK(distinct.count({"Egypt", EntityLabel::Gpe}));
    CHECK(distinct.count({"Ptolemy I Soter", EntityLabel::Person}));
  }

  TEST_CASE("conformance failures are reported per request") {
    const auto golden = load_golden(kData + "/sidecar_golden.jsonl");
    {
      auto client = fake_client("--golden " + kData + "/sidecar_golden.jsonl --error-id caesar");
      const auto outcomes = check_conformance(*client, golden);
      int failed = 0;
      for (const auto& o : outcomes) failed += !o.ok;
      CHECK(failed == 1);
      CHECK_FALSE(outcomes[1].ok);
    }
    {
      auto client = fake_client("--golden " + kData + "/sidecar_golden.jsonl --corrupt-offsets");
      for (const auto& o : check_conformance(*client, golden)) CHECK_FALSE(o.ok);
    }
    {
      auto client = fake_client("--gazetteer /dev/null");
      int failed = 0;
      for (const auto& o : check_conformance(*client, golden)) failed += !o.ok;
      CHECK(failed > 0);
    }
  }

  TEST_CASE("a silent sidecar times out") {
    auto client = fake_client("--silent", std::chrono::milliseconds(200));
    CHECK_THROWS_AS(client->annotate({{"a", kCaesar}}), TimeoutError);
  }

  TEST_CASE("a dead sidecar closes the stream") {
    Client client(spawn_process("exit 0"), std::chrono::seconds(5));
    CHECK_THROWS(client.annotate({{"a", kCaesar}}));
  }

  TEST_CASE("sidecar-driven entity replacement on the Cleopatra document") {
    auto client = fake_client("--gazetteer " + kData + "/worked_gazetteer.jsonl");
    const SidecarAnnotator annotator(client, "fake");
    CHECK(annotator.version() == "sidecar/fake");
    CleanDocument doc;
    doc.id = "cleopatra";
    doc.sentences = {"Cleopatra was Queen of the Ptolemaic Kingdom of Egypt.",
                     "A member of the Ptolemaic dynasty, she was a descendant of its founder Ptolemy I Soter.",
                     "After her death, Egypt became a province of the Roman Empire."};
    const auto site = select_needle_site(doc, NeedleType::Ner, annotator, 0);
    REQUIRE(std::holds_alternative<NeedleSite>(site));
    CHECK(std::get<NeedleSite>(site).m == 2);
    CHECK(std::get<NeedleSite>(site).altered ==
          "A member of the Ptolemaic dynasty, she was a descendant of its founder Cleopatra.");
    const auto ann = annotator.annotate(doc.sentences[0], 0);
    CHECK(ann.entities.size() == 2);
    CHECK_FALSE(validate_annotation(doc.sentences[0], ann));
  }
}
