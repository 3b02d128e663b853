#include "haystack/assemble.hpp"

#include "haystack/random.hpp"
#include "haystack/text.hpp"

namespace haystack {

std::string VariantDocument::render() const { return text::join(sentences, " "); }

HayChoice HayPicker::pick(std::string_view source_doc_id, Position position, std::size_t needle_index) const {
  const auto& docs = corpus_->documents();
  if (docs.size() < 2) throw HayTooShort("random hay needs at least two documents");
  const auto key = hash_all(corpus_->manifest().seed, fnv1a64("hay"), source_doc_id,
                            static_cast<std::uint64_t>(position.i), static_cast<std::uint64_t>(position.j));
  CounterRng rng(key);
  const auto needed_after = needle_index + static_cast<std::size_t>(position.j);
  for (std::size_t draw = 1; draw <= max_draws_; ++draw) {
    const auto& candidate = docs[static_cast<std::size_t>(rng.below(docs.size()))];
    if (candidate.id == source_doc_id) continue;
    if (needle_index > static_cast<std::size_t>(position.i) && candidate.length() >= needed_after)
      return {&candidate, draw};
  }
  throw HayTooShort("no hay document fits a window around sentence " + std::to_string(needle_index) +
                    " for " + std::string(source_doc_id));
}

VariantDocument build_variant(const CleanDocument& doc, const NeedleSite& site, HayType hay, Position pos,
                              bool use_altered, const HayPicker* hay_picker) {
  VariantDocument v;
  v.needle_offset = static_cast<std::size_t>(pos.i);
  v.provenance.source_doc_id = doc.id;
  v.provenance.position = pos;
  v.provenance.hay = hay;
  v.provenance.needle = use_altered ? site.needle : NeedleType::None;

  const CleanDocument* source = &doc;
  if (hay == HayType::Rand) {
    if (!hay_picker) throw std::invalid_argument("random hay requires a hay picker");
    const auto choice = hay_picker->pick(doc.id, pos, site.m);
    source = choice.doc;
    v.provenance.hay_doc_id = choice.doc->id;
    v.provenance.hay_draws = choice.draws;
  } else if (site.m <= static_cast<std::size_t>(pos.i) ||
             site.m + static_cast<std::size_t>(pos.j) > doc.length()) {
    throw HayTooShort("document " + doc.id + " cannot host position (" + std::to_string(pos.i) + "," +
                      std::to_string(pos.j) + ") around sentence " + std::to_string(site.m));
  }

  // 1-based window [m - i, m + j] of the hay source, needle in the middle.
  const auto m = site.m;
  v.sentences.reserve(static_cast<std::size_t>(pos.length()));
  for (std::size_t s = m - static_cast<std::size_t>(pos.i); s < m; ++s) v.sentences.push_back(source->sentences[s - 1]);
  v.sentences.push_back(use_altered ? site.altered : site.original);
  for (std::size_t s = m + 1; s <= m + static_cast<std::size_t>(pos.j); ++s)
    v.sentences.push_back(source->sentences[s - 1]);
  return v;
}

DocumentPair build_pair(const CleanDocument& doc, const NeedleSite& site, HayType hay, Position pos,
                        const HayPicker* hay_picker) {
  return {build_variant(doc, site, hay, pos, false, hay_picker),
          build_variant(doc, site, hay, pos, true, hay_picker)};
}

}  // namespace haystack
