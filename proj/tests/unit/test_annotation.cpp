#include <doctest.h>

#include "haystack/annotation.hpp"
#include "haystack/text.hpp"
#include "synthetic.hpp"

using namespace haystack;

namespace {

Gazetteer worked() { return Gazetteer::load(std::string(HAYSTACK_TEST_DATA) + "/worked_gazetteer.jsonl"); }

std::vector<std::string> surfaces(const SentenceAnnotation& ann) {
  std::vector<std::string> out;
  for (const auto& e : ann.entities) out.push_back(e.text);
  return out;
}

}  // namespace

TEST_SUITE("annotation") {
  TEST_CASE("splitter keeps abbreviations and initials together") {
    SentenceSplitter s;
    const auto out = s.split("Dr. Smith went to Washington. He met John F. Kennedy there! Was it in the U.S. capital? Yes.");
    REQUIRE(out.size() == 4);
    CHECK(out[0] == "Dr. Smith went to Washington.");
    CHECK(out[1] == "He met John F. Kennedy there!");
    CHECK(out[2] == "Was it in the U.S. capital?");
    CHECK(out[3] == "Yes.");
  }

  TEST_CASE("splitter output joins back to the normalized input") {
    const std::string raw = "First one.  \"Quoted end.\" Then (a parenthetical.) And e.g. this one... Done";
    const auto out = SentenceSplitter().split(raw);
    CHECK(text::join(out, " ") == text::normalize_whitespace(raw));
    CHECK(out.back() == "Done");
  }

  TEST_CASE("splitter does not break before a lowercase word") {
    const auto out = SentenceSplitter().split("The value was approx. ten. the next part continues.");
    CHECK(out.size() == 1);
  }

  TEST_CASE("gazetteer parses, skips comments, and is case-sensitive") {
    const auto g = Gazetteer::parse(
        "# comment\n\n{\"surface\": \"New York City\", \"label\": \"GPE\"}\n{\"surface\": \"Ada\", \"label\": \"PERSON\"}\n");
    CHECK(g.size() == 2);
    CHECK(g.max_words() == 3);
    CHECK(g.lookup("Ada") == EntityLabel::Person);
    CHECK_FALSE(g.lookup("ada"));
    CHECK_THROWS(Gazetteer::parse("{not json}\n"));
    auto g2 = g;
    g2.add("Lima", EntityLabel::Gpe);
    CHECK(g.fingerprint() != g2.fingerprint());
  }

  TEST_CASE("builtin annotation satisfies the offset invariants") {
    const auto g = worked();
    const std::string s = "Zoë Kravitz flew from São Paulo to Lisbon in 2019 and she did not return.";
    const auto ann = annotate_builtin(s, g);
    CHECK_FALSE(validate_annotation(s, ann));
    CHECK(ann.root().has_value());
    CHECK(surfaces(ann) == std::vector<std::string>{"Zoë Kravitz", "São Paulo", "Lisbon", "2019"});
    CHECK(ann.entities[0].label == EntityLabel::Person);
    CHECK(ann.entities[1].start == 22);
  }

  TEST_CASE("longest gazetteer match wins") {
    const auto g = worked();
    const std::string s = "A member of the Ptolemaic dynasty, she was a descendant of its founder Ptolemy I Soter.";
    const auto ann = annotate_builtin(s, g);
    CHECK(surfaces(ann) == std::vector<std::string>{"the Ptolemaic dynasty", "Ptolemy I Soter"});
    CHECK(ann.entities[0].label == EntityLabel::Date);
  }

  TEST_CASE("root is the finite auxiliary or verb") {
    const std::string s = "Caesar crossed the river and marched on Rome.";
    const auto ann = annotate_builtin(s);
    REQUIRE(ann.root());
    CHECK(ann.tokens[*ann.root()].surface == "crossed");
    const auto ann2 = annotate_builtin("The airport is a hub for United.");
    CHECK(ann2.tokens[*ann2.root()].surface == "is");
  }

  TEST_CASE("negators are tagged") {
    const auto ann = annotate_builtin("He did not go and never came back.");
    int neg = 0;
    for (const auto& t : ann.tokens) neg += t.dep == "neg";
    CHECK(neg == 2);
  }

  TEST_CASE("validate_annotation reports violations") {
    const std::string s = "Ada wrote notes.";
    auto ann = annotate_builtin(s);
    REQUIRE_FALSE(validate_annotation(s, ann));
    auto bad = ann;
    bad.tokens[0].end = 99;
    CHECK(validate_annotation(s, bad));
    bad = ann;
    bad.tokens[1].surface = "read";
    CHECK(validate_annotation(s, bad));
    bad = ann;
    bad.tokens[1].dep = "ROOT";
    bad.tokens[0].dep = "ROOT";
    CHECK(validate_annotation(s, bad));
    bad = ann;
    bad.entities.push_back({0, 3, EntityLabel::Person, "Adx"});
    CHECK(validate_annotation(s, bad));
  }

  TEST_CASE("label names round trip and unknown labels collapse") {
    CHECK(entity_label_from_string("GPE") == EntityLabel::Gpe);
    CHECK(entity_label_from_string("ORG") == EntityLabel::Other);
    CHECK(to_string(EntityLabel::Language) == "LANGUAGE");
    CHECK_FALSE(is_needle_eligible(EntityLabel::Other));
    CHECK(is_needle_eligible(EntityLabel::Date));
    CHECK(pos_from_string("CCONJ") == Pos::Cconj);
    CHECK(pos_from_string("SYM") == Pos::Other);
  }

  TEST_CASE("synthetic documents annotate cleanly") {
    const BuiltinAnnotator a(testing::synthetic_gazetteer());
    SentenceSplitter sp;
    for (const auto& raw : testing::synthetic_documents(3, 11)) {
      for (const auto& s : sp.split(raw.text)) {
        const auto ann = a.annotate(s, 0);
        INFO(s);
        CHECK_FALSE(validate_annotation(s, ann));
      }
    }
  }

  TEST_CASE("annotator version tracks the gazetteer") {
    const BuiltinAnnotator a, b(worked());
    CHECK(a.version() != b.version());
    CHECK(a.version().rfind("builtin-1/", 0) == 0);
  }
}
