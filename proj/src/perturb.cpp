#include "haystack/perturb.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <stdexcept>
#include <tuple>

#include "haystack/random.hpp"
#include "haystack/text.hpp"

namespace haystack {

std::string_view to_string(SkipReason reason) {
  switch (reason) {
    case SkipReason::AlreadyNegated: return "already_negated";
    case SkipReason::NoRootVerb: return "no_root_verb";
    case SkipReason::NoConnective: return "no_connective";
    case SkipReason::NoEligible: return "no_eligible";
    case SkipReason::NoReplacement: return "no_replacement";
  }
  return "unknown";
}

std::vector<DocumentEntity> collect_entities(const std::vector<SentenceAnnotation>& doc_annotations) {
  std::vector<DocumentEntity> out;
  for (const auto& ann : doc_annotations)
    for (const auto& e : ann.entities) out.push_back({ann.sentence_index, e});
  return out;
}

namespace {

bool is_negator(std::string_view word) {
  const auto lower = text::to_lower_ascii(word);
  return lower == "not" || lower == "n't" || lower == "n’t" || lower == "never" || lower == "no";
}

// Replaces code-point spans [start, end) with the given strings; spans sorted
// and non-overlapping.
std::string splice(std::string_view sentence,
                   const std::vector<std::tuple<std::size_t, std::size_t, std::string>>& edits) {
  std::string out;
  std::size_t cursor = 0;  // bytes
  for (const auto& [start, end, replacement] : edits) {
    const auto b = text::byte_offset(sentence, start);
    const auto e = text::byte_offset(sentence, end);
    out.append(sentence.substr(cursor, b - cursor));
    out.append(replacement);
    cursor = e;
  }
  out.append(sentence.substr(cursor));
  return out;
}

std::string match_case(std::string_view source, std::string_view target_lower) {
  std::string out(target_lower);
  const bool all_upper = source.size() > 1 && std::all_of(source.begin(), source.end(), [](char c) {
                           return c >= 'A' && c <= 'Z';
                         });
  if (all_upper) {
    for (auto& c : out) c = static_cast<char>(c - 'a' + 'A');
  } else if (!source.empty() && source[0] >= 'A' && source[0] <= 'Z') {
    out[0] = static_cast<char>(out[0] - 'a' + 'A');
  }
  return out;
}

}  // namespace

EditResult negate(std::string_view sentence, const SentenceAnnotation& ann) {
  for (const auto& tok : ann.tokens) {
    if (tok.dep == "neg" || is_negator(tok.lemma) || is_negator(tok.surface))
      return Skip{SkipReason::AlreadyNegated};
  }
  const auto root = ann.root();
  if (!root) return Skip{SkipReason::NoRootVerb};
  const auto& tok = ann.tokens[*root];
  if (tok.pos != Pos::Verb && tok.pos != Pos::Aux) return Skip{SkipReason::NoRootVerb};
  const auto at = text::byte_offset(sentence, tok.end);
  std::string out;
  out.reserve(sentence.size() + 4);
  out.append(sentence.substr(0, at));
  out.append(" not");
  out.append(sentence.substr(at));
  return out;
}

EditResult conj_swap(std::string_view sentence, const SentenceAnnotation& ann) {
  std::vector<std::tuple<std::size_t, std::size_t, std::string>> edits;
  for (const auto& tok : ann.tokens) {
    const auto lower = text::to_lower_ascii(tok.surface);
    if (lower == "and") edits.emplace_back(tok.start, tok.end, match_case(tok.surface, "or"));
    else if (lower == "or") edits.emplace_back(tok.start, tok.end, match_case(tok.surface, "and"));
  }
  if (edits.empty()) return Skip{SkipReason::NoConnective};
  return splice(sentence, edits);
}

EditResult ner_replace(std::string_view sentence, const SentenceAnnotation& ann,
                       const std::vector<DocumentEntity>& doc_entities, std::uint64_t seed) {
  std::vector<const EntitySpan*> eligible;
  for (const auto& e : ann.entities)
    if (is_needle_eligible(e.label)) eligible.push_back(&e);
  if (eligible.empty()) return Skip{SkipReason::NoEligible};

  struct Viable {
    const EntitySpan* target;
    std::vector<std::string> candidates;
  };
  std::vector<Viable> viable;
  for (const auto* target : eligible) {
    Viable v{target, {}};
    std::set<std::string> seen;
    for (const auto& de : doc_entities) {
      if (de.sentence_index == ann.sentence_index) continue;
      if (de.span.label != target->label || de.span.text == target->text) continue;
      if (seen.insert(de.span.text).second) v.candidates.push_back(de.span.text);
    }
    if (!v.candidates.empty()) viable.push_back(std::move(v));
  }
  if (viable.empty()) return Skip{SkipReason::NoReplacement};

  CounterRng rng(seed);
  const auto& pick = viable[static_cast<std::size_t>(rng.below(viable.size()))];
  const auto& replacement = pick.candidates[static_cast<std::size_t>(rng.below(pick.candidates.size()))];
  return splice(sentence, {{pick.target->start, pick.target->end, replacement}});
}

EditResult apply_needle(NeedleType needle, std::string_view sentence, const SentenceAnnotation& ann,
                        const std::vector<DocumentEntity>& doc_entities, std::uint64_t seed) {
  switch (needle) {
    case NeedleType::Neg: return negate(sentence, ann);
    case NeedleType::Con: return conj_swap(sentence, ann);
    case NeedleType::Ner: return ner_replace(sentence, ann, doc_entities, seed);
    case NeedleType::None: break;
  }
  throw std::invalid_argument("apply_needle: the empty needle has no edit");
}

std::size_t middle_sentence(std::size_t length) { return (length + 1) / 2; }

std::vector<std::size_t> scan_order(std::size_t length, std::size_t radius) {
  std::vector<std::size_t> out;
  if (length == 0) return out;
  const auto m0 = static_cast<long long>(middle_sentence(length));
  const auto in_range = [&](long long m) { return m >= 1 && m <= static_cast<long long>(length); };
  out.push_back(static_cast<std::size_t>(m0));
  for (long long d = 1; d <= static_cast<long long>(radius); ++d) {
    if (in_range(m0 + d)) out.push_back(static_cast<std::size_t>(m0 + d));
    if (in_range(m0 - d)) out.push_back(static_cast<std::size_t>(m0 - d));
  }
  return out;
}

std::uint64_t needle_seed(std::uint64_t corpus_seed, std::string_view doc_id, NeedleType needle) {
  return hash_all(corpus_seed, doc_id, to_string(needle));
}

std::variant<NeedleSite, Discard> select_needle_site(const CleanDocument& doc, NeedleType needle,
                                                     const Annotator& annotator, std::uint64_t corpus_seed) {
  if (needle == NeedleType::None) throw std::invalid_argument("select_needle_site: needle must not be NONE");
  const auto seed = needle_seed(corpus_seed, doc.id, needle);

  std::vector<SentenceAnnotation> doc_annotations;
  std::vector<DocumentEntity> doc_entities;
  if (needle == NeedleType::Ner) {
    doc_annotations = annotator.annotate_document(doc.sentences);
    doc_entities = collect_entities(doc_annotations);
  }

  std::vector<std::pair<std::size_t, SkipReason>> skipped;
  for (const auto m : scan_order(doc.length())) {
    const auto& sentence = doc.sentences[m - 1];
    const auto ann = needle == NeedleType::Ner ? doc_annotations[m - 1] : annotator.annotate(sentence, m - 1);
    auto result = apply_needle(needle, sentence, ann, doc_entities, hash_combine(seed, static_cast<std::uint64_t>(m)));
    if (auto* altered = std::get_if<std::string>(&result)) {
      NeedleSite site;
      site.doc_id = doc.id;
      site.m = m;
      site.m0 = middle_sentence(doc.length());
      site.original = sentence;
      site.altered = std::move(*altered);
      site.needle = needle;
      site.rng_seed = seed;
      site.skipped = std::move(skipped);
      return site;
    }
    skipped.emplace_back(m, std::get<Skip>(result).reason);
  }
  return Discard{std::move(skipped)};
}

}  // namespace haystack
