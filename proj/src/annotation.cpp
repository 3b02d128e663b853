#include "haystack/annotation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "haystack/random.hpp"
#include "haystack/text.hpp"

namespace haystack {

namespace {

constexpr std::pair<Pos, std::string_view> kPosNames[] = {
    {Pos::Verb, "VERB"},   {Pos::Aux, "AUX"},     {Pos::Noun, "NOUN"}, {Pos::Propn, "PROPN"},
    {Pos::Adj, "ADJ"},     {Pos::Adv, "ADV"},     {Pos::Cconj, "CCONJ"}, {Pos::Det, "DET"},
    {Pos::Part, "PART"},   {Pos::Punct, "PUNCT"}, {Pos::Other, "OTHER"},
};

constexpr std::pair<EntityLabel, std::string_view> kLabelNames[] = {
    {EntityLabel::Person, "PERSON"}, {EntityLabel::Gpe, "GPE"},     {EntityLabel::Loc, "LOC"},
    {EntityLabel::Language, "LANGUAGE"}, {EntityLabel::Date, "DATE"}, {EntityLabel::Other, "OTHER"},
};

}  // namespace

std::string_view to_string(Pos pos) {
  for (const auto& [p, name] : kPosNames)
    if (p == pos) return name;
  return "OTHER";
}

Pos pos_from_string(std::string_view tag) {
  for (const auto& [p, name] : kPosNames)
    if (name == tag) return p;
  return Pos::Other;
}

std::string_view to_string(EntityLabel label) {
  for (const auto& [l, name] : kLabelNames)
    if (l == label) return name;
  return "OTHER";
}

EntityLabel entity_label_from_string(std::string_view label) {
  for (const auto& [l, name] : kLabelNames)
    if (name == label) return l;
  return EntityLabel::Other;
}

bool is_needle_eligible(EntityLabel label) { return label != EntityLabel::Other; }

std::optional<std::size_t> SentenceAnnotation::root() const {
  std::optional<std::size_t> found;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t].dep != "ROOT") continue;
    if (found) return std::nullopt;
    found = t;
  }
  return found;
}

std::optional<std::string> validate_annotation(std::string_view sentence,
                                               const SentenceAnnotation& ann) {
  const auto cps = text::decode_utf8(sentence);
  const std::size_t len = cps.size();
  const auto slice = [&](std::size_t b, std::size_t e) {
    return text::encode_utf8(std::u32string_view(cps).substr(b, e - b));
  };
  std::size_t prev_end = 0;
  std::size_t roots = 0;
  for (std::size_t t = 0; t < ann.tokens.size(); ++t) {
    const auto& tok = ann.tokens[t];
    if (!(tok.start < tok.end && tok.end <= len)) return "token " + std::to_string(t) + " out of range";
    if (tok.start < prev_end) return "token " + std::to_string(t) + " overlaps its predecessor";
    if (slice(tok.start, tok.end) != tok.surface)
      return "token " + std::to_string(t) + " surface mismatch";
    if (tok.head >= ann.tokens.size()) return "token " + std::to_string(t) + " has invalid head";
    if (tok.dep == "ROOT") ++roots;
    prev_end = tok.end;
  }
  if (!ann.tokens.empty() && roots != 1) return "expected exactly one ROOT, found " + std::to_string(roots);
  prev_end = 0;
  for (std::size_t k = 0; k < ann.entities.size(); ++k) {
    const auto& ent = ann.entities[k];
    if (!(ent.start < ent.end && ent.end <= len)) return "entity " + std::to_string(k) + " out of range";
    if (ent.start < prev_end) return "entity " + std::to_string(k) + " overlaps its predecessor";
    if (slice(ent.start, ent.end) != ent.text) return "entity " + std::to_string(k) + " text mismatch";
    prev_end = ent.end;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Splitter

std::set<std::string> SplitterConfig::default_abbreviations() {
  return {"mr",  "mrs", "ms",   "dr",  "prof", "st",   "jr",  "sr",  "vs",  "etc",  "e.g",
          "i.e", "inc", "ltd",  "co",  "corp", "mt",   "no",  "gen", "col", "sgt",  "lt",
          "capt", "rev", "fig", "approx", "u.s", "u.k", "ca",  "cf",  "al",  "jan", "feb",
          "mar", "apr", "aug",  "sept", "oct", "nov",  "dec", "ft",  "vol", "ed",  "est"};
}

namespace {

bool is_terminal(char32_t c) { return c == U'.' || c == U'?' || c == U'!'; }

bool is_closer(char32_t c) {
  return c == U'"' || c == U'\'' || c == U')' || c == U']' || c == U'’' || c == U'”';
}

}  // namespace

std::vector<std::string> SentenceSplitter::split(std::string_view input) const {
  const auto cps = text::decode_utf8(text::normalize_whitespace(input));
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < cps.size()) {
    if (!is_terminal(cps[i])) {
      ++i;
      continue;
    }
    const std::size_t punct_begin = i;
    std::size_t e = i;
    bool only_periods = true;
    while (e < cps.size() && is_terminal(cps[e])) {
      if (cps[e] != U'.') only_periods = false;
      ++e;
    }
    while (e < cps.size() && is_closer(cps[e])) ++e;
    if (e >= cps.size()) break;
    if (cps[e] != U' ') {
      i = e;
      continue;
    }
    bool boundary = true;
    if (only_periods) {
      // Word immediately before the period, including internal periods ("e.g").
      std::size_t w = punct_begin;
      while (w > 0 && (text::is_word_char(cps[w - 1]) || cps[w - 1] == U'.')) --w;
      const auto word = text::encode_utf8(std::u32string_view(cps).substr(w, punct_begin - w));
      if (config_.abbreviations.count(text::to_lower_ascii(word))) boundary = false;
      if (config_.single_letter_abbreviations && punct_begin - w == 1 &&
          text::is_ascii_upper(cps[w]))
        boundary = false;
      if (e + 1 < cps.size() && text::is_ascii_lower(cps[e + 1])) boundary = false;
    }
    if (boundary) {
      out.push_back(text::encode_utf8(std::u32string_view(cps).substr(start, e - start)));
      start = e + 1;
    }
    i = e;
  }
  if (start < cps.size()) out.push_back(text::encode_utf8(std::u32string_view(cps).substr(start)));
  return out;
}

// ---------------------------------------------------------------------------
// Gazetteer

Gazetteer Gazetteer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open gazetteer " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

Gazetteer Gazetteer::parse(std::string_view contents) {
  Gazetteer g;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= contents.size()) {
    const auto nl = contents.find('\n', pos);
    const auto line = text::trim(contents.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    ++line_no;
    if (!line.empty() && line[0] != '#') {
      try {
        const auto rec = nlohmann::json::parse(line);
        g.add(rec.at("surface").get<std::string>(),
              entity_label_from_string(rec.at("label").get<std::string>()));
      } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("gazetteer line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return g;
}

void Gazetteer::add(std::string surface, EntityLabel label) {
  const auto words = static_cast<std::size_t>(std::count(surface.begin(), surface.end(), ' ')) + 1;
  max_words_ = std::max(max_words_, words);
  entries_[std::move(surface)] = label;
}

std::optional<EntityLabel> Gazetteer::lookup(std::string_view surface) const {
  const auto it = entries_.find(std::string(surface));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Gazetteer::fingerprint() const {
  std::uint64_t h = 0x67617a6574746565ULL;
  for (const auto& [surface, label] : entries_) h = hash_all(h, std::string_view(surface), to_string(label));
  return h;
}

// ---------------------------------------------------------------------------
// Built-in annotator

namespace {

struct Lex {
  Pos pos;
  std::string_view lemma;  // empty: lemma is the lowercased surface
};

const std::unordered_map<std::string_view, Lex>& lexicon() {
  static const std::unordered_map<std::string_view, Lex> lex = {
      // finite auxiliaries (root candidates)
      {"is", {Pos::Aux, "be"}}, {"are", {Pos::Aux, "be"}}, {"was", {Pos::Aux, "be"}},
      {"were", {Pos::Aux, "be"}}, {"am", {Pos::Aux, "be"}}, {"has", {Pos::Aux, "have"}},
      {"have", {Pos::Aux, "have"}}, {"had", {Pos::Aux, "have"}}, {"does", {Pos::Aux, "do"}},
      {"do", {Pos::Aux, "do"}}, {"did", {Pos::Aux, "do"}}, {"will", {Pos::Aux, ""}},
      {"would", {Pos::Aux, ""}}, {"shall", {Pos::Aux, ""}}, {"should", {Pos::Aux, ""}},
      {"can", {Pos::Aux, ""}}, {"could", {Pos::Aux, ""}}, {"may", {Pos::Aux, ""}},
      {"might", {Pos::Aux, ""}}, {"must", {Pos::Aux, ""}}, {"ca", {Pos::Aux, "can"}},
      {"wo", {Pos::Aux, "will"}},
      // non-finite forms of be
      {"be", {Pos::Aux, "be"}}, {"been", {Pos::Aux, "be"}}, {"being", {Pos::Aux, "be"}},
      // particles and negators
      {"not", {Pos::Part, "not"}}, {"n't", {Pos::Part, "not"}}, {"n’t", {Pos::Part, "not"}},
      {"to", {Pos::Part, ""}}, {"'s", {Pos::Part, "'s"}}, {"’s", {Pos::Part, "'s"}},
      {"never", {Pos::Adv, "never"}},
      // determiners
      {"a", {Pos::Det, ""}}, {"an", {Pos::Det, ""}}, {"the", {Pos::Det, ""}},
      {"this", {Pos::Det, ""}}, {"that", {Pos::Det, ""}}, {"these", {Pos::Det, ""}},
      {"those", {Pos::Det, ""}}, {"each", {Pos::Det, ""}}, {"every", {Pos::Det, ""}},
      {"some", {Pos::Det, ""}}, {"any", {Pos::Det, ""}}, {"no", {Pos::Det, "no"}},
      {"all", {Pos::Det, ""}}, {"both", {Pos::Det, ""}}, {"its", {Pos::Det, ""}},
      {"his", {Pos::Det, ""}}, {"her", {Pos::Det, ""}}, {"their", {Pos::Det, ""}},
      {"our", {Pos::Det, ""}}, {"my", {Pos::Det, ""}}, {"your", {Pos::Det, ""}},
      // coordinating conjunctions
      {"and", {Pos::Cconj, ""}}, {"or", {Pos::Cconj, ""}}, {"but", {Pos::Cconj, ""}},
      {"nor", {Pos::Cconj, ""}},
      // adverbs
      {"always", {Pos::Adv, ""}}, {"often", {Pos::Adv, ""}}, {"also", {Pos::Adv, ""}},
      {"very", {Pos::Adv, ""}}, {"too", {Pos::Adv, ""}}, {"still", {Pos::Adv, ""}},
      {"already", {Pos::Adv, ""}}, {"soon", {Pos::Adv, ""}}, {"then", {Pos::Adv, ""}},
      {"later", {Pos::Adv, ""}}, {"again", {Pos::Adv, ""}}, {"once", {Pos::Adv, ""}},
      // pronouns and prepositions stay OTHER
      {"he", {Pos::Other, ""}}, {"she", {Pos::Other, ""}}, {"it", {Pos::Other, ""}},
      {"they", {Pos::Other, ""}}, {"we", {Pos::Other, ""}}, {"i", {Pos::Other, ""}},
      {"you", {Pos::Other, ""}}, {"him", {Pos::Other, ""}}, {"them", {Pos::Other, ""}},
      {"who", {Pos::Other, ""}}, {"which", {Pos::Other, ""}}, {"there", {Pos::Other, ""}},
      {"of", {Pos::Other, ""}}, {"in", {Pos::Other, ""}}, {"on", {Pos::Other, ""}},
      {"at", {Pos::Other, ""}}, {"by", {Pos::Other, ""}}, {"for", {Pos::Other, ""}},
      {"with", {Pos::Other, ""}}, {"from", {Pos::Other, ""}}, {"than", {Pos::Other, ""}},
      {"as", {Pos::Other, ""}}, {"into", {Pos::Other, ""}}, {"after", {Pos::Other, ""}},
      {"before", {Pos::Other, ""}}, {"during", {Pos::Other, ""}}, {"under", {Pos::Other, ""}},
      {"over", {Pos::Other, ""}}, {"between", {Pos::Other, ""}}, {"through", {Pos::Other, ""}},
      {"about", {Pos::Other, ""}}, {"against", {Pos::Other, ""}}, {"near", {Pos::Other, ""}},
      // irregular finite verbs
      {"became", {Pos::Verb, "become"}}, {"began", {Pos::Verb, "begin"}},
      {"came", {Pos::Verb, "come"}}, {"went", {Pos::Verb, "go"}}, {"made", {Pos::Verb, "make"}},
      {"took", {Pos::Verb, "take"}}, {"gave", {Pos::Verb, "give"}}, {"found", {Pos::Verb, "find"}},
      {"saw", {Pos::Verb, "see"}}, {"said", {Pos::Verb, "say"}}, {"wrote", {Pos::Verb, "write"}},
      {"won", {Pos::Verb, "win"}}, {"led", {Pos::Verb, "lead"}}, {"held", {Pos::Verb, "hold"}},
      {"left", {Pos::Verb, "leave"}}, {"built", {Pos::Verb, "build"}}, {"grew", {Pos::Verb, "grow"}},
      {"knew", {Pos::Verb, "know"}}, {"ran", {Pos::Verb, "run"}}, {"sat", {Pos::Verb, "sit"}},
      {"stood", {Pos::Verb, "stand"}}, {"told", {Pos::Verb, "tell"}},
      {"thought", {Pos::Verb, "think"}}, {"brought", {Pos::Verb, "bring"}},
      {"fought", {Pos::Verb, "fight"}}, {"taught", {Pos::Verb, "teach"}},
      {"lost", {Pos::Verb, "lose"}}, {"met", {Pos::Verb, "meet"}}, {"paid", {Pos::Verb, "pay"}},
      {"sent", {Pos::Verb, "send"}}, {"spent", {Pos::Verb, "spend"}}, {"fell", {Pos::Verb, "fall"}},
      {"felt", {Pos::Verb, "feel"}}, {"kept", {Pos::Verb, "keep"}}, {"got", {Pos::Verb, "get"}},
      {"rose", {Pos::Verb, "rise"}}, {"flew", {Pos::Verb, "fly"}}, {"spoke", {Pos::Verb, "speak"}},
      {"chose", {Pos::Verb, "choose"}}, {"broke", {Pos::Verb, "break"}},
      // a few common present-tense verbs
      {"runs", {Pos::Verb, "run"}}, {"sleeps", {Pos::Verb, "sleep"}}, {"sleep", {Pos::Verb, "sleep"}},
      {"handle", {Pos::Verb, "handle"}}, {"handles", {Pos::Verb, "handle"}},
      {"land", {Pos::Verb, "land"}}, {"transfer", {Pos::Verb, "transfer"}},
      {"lives", {Pos::Verb, "live"}}, {"works", {Pos::Verb, "work"}},
      {"remains", {Pos::Verb, "remain"}}, {"contains", {Pos::Verb, "contain"}},
      {"includes", {Pos::Verb, "include"}}, {"shipped", {Pos::Verb, "ship"}},
  };
  return lex;
}

bool is_finite_root_candidate(const Token& tok) {
  if (tok.pos == Pos::Verb) return true;
  if (tok.pos != Pos::Aux) return false;
  const auto lower = text::to_lower_ascii(tok.surface);
  return lower != "be" && lower != "been" && lower != "being";
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

std::string verb_lemma(const std::string& lower) {
  if (ends_with(lower, "ied")) return lower.substr(0, lower.size() - 3) + "y";
  if (ends_with(lower, "ed")) {
    auto stem = lower.substr(0, lower.size() - 2);
    if (stem.size() >= 2 && stem.back() == stem[stem.size() - 2] && !is_vowel(stem.back()) &&
        stem.back() != 'l' && stem.back() != 's')
      stem.pop_back();
    else if (!stem.empty() && (stem.back() == 'v' || stem.back() == 'c' || stem.back() == 'z' ||
                               stem.back() == 'u'))
      stem.push_back('e');
    return stem;
  }
  if (ends_with(lower, "ing") && lower.size() > 5) return lower.substr(0, lower.size() - 3);
  return lower;
}

std::string noun_lemma(const std::string& lower) {
  if (lower.size() > 4 && ends_with(lower, "ies")) return lower.substr(0, lower.size() - 3) + "y";
  if (lower.size() > 4 && (ends_with(lower, "ches") || ends_with(lower, "shes") ||
                           ends_with(lower, "sses") || ends_with(lower, "xes")))
    return lower.substr(0, lower.size() - 2);
  if (lower.size() > 3 && ends_with(lower, "s") && !ends_with(lower, "ss") &&
      !ends_with(lower, "us") && !ends_with(lower, "is"))
    return lower.substr(0, lower.size() - 1);
  return lower;
}

bool looks_adjective(const std::string& lower) {
  static constexpr std::string_view kSuffixes[] = {"ous", "ful", "ive", "able", "ible", "ical",
                                                   "ish", "less", "ier",  "iest", "ent",  "ant"};
  if (lower.size() < 5) return false;
  return std::any_of(std::begin(kSuffixes), std::end(kSuffixes),
                     [&](std::string_view s) { return ends_with(lower, s); });
}

void tag(Token& tok, bool sentence_initial) {
  const auto lower = text::to_lower_ascii(tok.surface);
  const auto first = text::decode_utf8(tok.surface).front();
  if (!text::is_word_char(first)) {
    tok.pos = Pos::Punct;
    tok.lemma = tok.surface;
    return;
  }
  if (const auto it = lexicon().find(lower); it != lexicon().end()) {
    // Capitalized mid-sentence "May", "Will" are names, not modals.
    const bool capitalized_mid = !sentence_initial && text::is_ascii_upper(first);
    if (!(capitalized_mid && it->second.pos == Pos::Aux)) {
      tok.pos = it->second.pos;
      tok.lemma = it->second.lemma.empty() ? lower : std::string(it->second.lemma);
      return;
    }
  }
  if (text::is_ascii_digit(first)) {
    tok.pos = Pos::Other;
    tok.lemma = lower;
    return;
  }
  if (text::is_ascii_upper(first) || (first >= 0x80 && !sentence_initial)) {
    tok.pos = Pos::Propn;
    tok.lemma = tok.surface;
    return;
  }
  if (lower.size() >= 5 && ends_with(lower, "ed") && !ends_with(lower, "eed")) {
    tok.pos = Pos::Verb;
    tok.lemma = verb_lemma(lower);
    return;
  }
  if (lower.size() >= 5 && ends_with(lower, "ly")) {
    tok.pos = Pos::Adv;
    tok.lemma = lower;
    return;
  }
  if (looks_adjective(lower)) {
    tok.pos = Pos::Adj;
    tok.lemma = lower;
    return;
  }
  tok.pos = Pos::Noun;
  tok.lemma = noun_lemma(lower);
}

// Splits a sentence into surface tokens with code-point offsets.
std::vector<Token> tokenize(const std::u32string& cps) {
  std::vector<Token> out;
  const auto emit = [&](std::size_t b, std::size_t e) {
    Token t;
    t.start = b;
    t.end = e;
    t.surface = text::encode_utf8(std::u32string_view(cps).substr(b, e - b));
    out.push_back(std::move(t));
  };
  const SplitterConfig abbrev_cfg;
  std::size_t i = 0;
  while (i < cps.size()) {
    const char32_t c = cps[i];
    if (text::is_space(c)) {
      ++i;
      continue;
    }
    if (!text::is_word_char(c)) {
      std::size_t e = i + 1;
      if (c == U'.' || c == U'-')
        while (e < cps.size() && cps[e] == c) ++e;
      emit(i, e);
      i = e;
      continue;
    }
    // Word: letters/digits joined by internal apostrophes, hyphens, periods.
    std::size_t e = i;
    while (e < cps.size()) {
      if (text::is_word_char(cps[e])) {
        ++e;
        continue;
      }
      const bool joiner = text::is_apostrophe(cps[e]) || cps[e] == U'-' ||
                          (cps[e] == U'.' && e + 1 < cps.size() && text::is_word_char(cps[e + 1])) ||
                          (cps[e] == U',' && e > i && text::is_ascii_digit(cps[e - 1]) &&
                           e + 1 < cps.size() && text::is_ascii_digit(cps[e + 1]));
      if (joiner && e + 1 < cps.size() && text::is_word_char(cps[e + 1])) {
        ++e;
        continue;
      }
      break;
    }
    // Abbreviations and initials keep their period ("Dr.", "U.S.", "F.").
    if (e < cps.size() && cps[e] == U'.') {
      const auto word = text::encode_utf8(std::u32string_view(cps).substr(i, e - i));
      const bool initial = e - i == 1 && text::is_ascii_upper(cps[i]);
      const bool dotted = word.find('.') != std::string::npos;
      const bool sentence_final = e + 1 == cps.size();
      if (!sentence_final &&
          (initial || dotted || abbrev_cfg.abbreviations.count(text::to_lower_ascii(word))))
        ++e;
    }
    // Clitics: "didn't" -> "did" + "n't", "O'Hare's" -> "O'Hare" + "'s".
    const std::size_t len = e - i;
    const auto tail_is = [&](std::size_t n, std::u32string_view pat) {
      if (len <= n) return false;
      for (std::size_t k = 0; k < n; ++k) {
        char32_t ch = cps[e - n + k];
        if (text::is_apostrophe(ch)) ch = U'\'';
        if (ch >= U'A' && ch <= U'Z') ch = ch - U'A' + U'a';
        if (ch != pat[k]) return false;
      }
      return true;
    };
    if (tail_is(3, U"n't")) {
      emit(i, e - 3);
      emit(e - 3, e);
    } else if (tail_is(2, U"'s")) {
      emit(i, e - 2);
      emit(e - 2, e);
    } else {
      emit(i, e);
    }
    i = e;
  }
  return out;
}

}  // namespace

SentenceAnnotation annotate_builtin(std::string_view sentence, const Gazetteer& gazetteer) {
  const auto cps = text::decode_utf8(sentence);
  SentenceAnnotation ann;
  ann.tokens = tokenize(cps);
  for (std::size_t t = 0; t < ann.tokens.size(); ++t) tag(ann.tokens[t], t == 0);

  std::optional<std::size_t> root;
  for (std::size_t t = 0; t < ann.tokens.size() && !root; ++t)
    if (ann.tokens[t].pos == Pos::Aux && is_finite_root_candidate(ann.tokens[t])) root = t;
  for (std::size_t t = 0; t < ann.tokens.size() && !root; ++t)
    if (ann.tokens[t].pos == Pos::Verb) root = t;
  for (std::size_t t = 0; t < ann.tokens.size() && !root; ++t)
    if (ann.tokens[t].pos != Pos::Punct) root = t;
  if (!root && !ann.tokens.empty()) root = 0;

  for (std::size_t t = 0; t < ann.tokens.size(); ++t) {
    auto& tok = ann.tokens[t];
    tok.head = *root;
    if (t == *root) {
      tok.dep = "ROOT";
    } else if (tok.lemma == "not" || tok.lemma == "never") {
      tok.dep = "neg";
    } else {
      switch (tok.pos) {
        case Pos::Punct: tok.dep = "punct"; break;
        case Pos::Det: tok.dep = "det"; break;
        case Pos::Cconj: tok.dep = "cc"; break;
        case Pos::Aux: tok.dep = "aux"; break;
        case Pos::Adv: tok.dep = "advmod"; break;
        default: tok.dep = "dep"; break;
      }
    }
  }

  // Longest gazetteer match starting at each token, left to right.
  if (gazetteer.size() > 0) {
    const std::size_t max_span = gazetteer.max_words() * 3 + 2;
    std::size_t t = 0;
    while (t < ann.tokens.size()) {
      std::optional<std::pair<std::size_t, EntityLabel>> best;
      for (std::size_t u = t; u < ann.tokens.size() && u - t < max_span; ++u) {
        const auto surface = text::encode_utf8(
            std::u32string_view(cps).substr(ann.tokens[t].start, ann.tokens[u].end - ann.tokens[t].start));
        if (const auto label = gazetteer.lookup(surface)) best = {u, *label};
      }
      if (!best) {
        ++t;
        continue;
      }
      EntitySpan span;
      span.start = ann.tokens[t].start;
      span.end = ann.tokens[best->first].end;
      span.label = best->second;
      span.text = text::encode_utf8(std::u32string_view(cps).substr(span.start, span.end - span.start));
      ann.entities.push_back(std::move(span));
      t = best->first + 1;
    }
  }
  return ann;
}

SentenceAnnotation BuiltinAnnotator::annotate(std::string_view sentence,
                                              std::size_t sentence_index) const {
  auto ann = annotate_builtin(sentence, gazetteer_);
  ann.sentence_index = sentence_index;
  return ann;
}

std::string BuiltinAnnotator::version() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(gazetteer_.fingerprint()));
  return std::string("builtin-1/") + buf;
}

std::vector<SentenceAnnotation> Annotator::annotate_document(
    const std::vector<std::string>& sentences) const {
  std::vector<SentenceAnnotation> out;
  out.reserve(sentences.size());
  for (std::size_t k = 0; k < sentences.size(); ++k) out.push_back(annotate(sentences[k], k));
  return out;
}

}  // namespace haystack
