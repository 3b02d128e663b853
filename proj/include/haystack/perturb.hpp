#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "haystack/annotation.hpp"
#include "haystack/corpus.hpp"
#include "haystack/types.hpp"

namespace haystack {

enum class SkipReason { AlreadyNegated, NoRootVerb, NoConnective, NoEligible, NoReplacement };

std::string_view to_string(SkipReason reason);

struct Skip {
  SkipReason reason;
};

/// Either the altered sentence or the reason the needle does not apply.
using EditResult = std::variant<std::string, Skip>;

inline bool applied(const EditResult& r) { return std::holds_alternative<std::string>(r); }

/// Entity found somewhere in a document, tagged with its sentence.
struct DocumentEntity {
  std::size_t sentence_index = 0;
  EntitySpan span;
};

std::vector<DocumentEntity> collect_entities(const std::vector<SentenceAnnotation>& doc_annotations);

/// Inserts "not" after the ROOT verb or auxiliary. Skips sentences that are
/// already negated (dep "neg", or lemma not / n't / never / no) and sentences
/// without a unique verbal root.
EditResult negate(std::string_view sentence, const SentenceAnnotation& ann);

/// Swaps every standalone "and" with "or" and vice versa in one pass, keeping
/// the case pattern of each token. Ampersands are left alone.
EditResult conj_swap(std::string_view sentence, const SentenceAnnotation& ann);

/// Replaces one eligible entity of the sentence with the text of a same-label
/// entity from another sentence of the document. Both choices are uniform
/// under `seed`; only entities that have a candidate with a different surface
/// are considered.
EditResult ner_replace(std::string_view sentence, const SentenceAnnotation& ann,
                       const std::vector<DocumentEntity>& doc_entities, std::uint64_t seed);

/// Dispatches on the needle type. Throws std::invalid_argument for NONE.
EditResult apply_needle(NeedleType needle, std::string_view sentence, const SentenceAnnotation& ann,
                        const std::vector<DocumentEntity>& doc_entities, std::uint64_t seed);

struct NeedleSite {
  std::string doc_id;
  std::size_t m = 0;  // 1-based sentence index
  std::size_t m0 = 0;
  std::string original;
  std::string altered;
  NeedleType needle = NeedleType::None;
  std::uint64_t rng_seed = 0;
  /// Skip reasons for the candidates tried before m, in scan order.
  std::vector<std::pair<std::size_t, SkipReason>> skipped;
};

struct Discard {
  std::vector<std::pair<std::size_t, SkipReason>> skipped;
};

inline constexpr std::size_t kFallbackScanRadius = 5;

/// ceil(L / 2).
std::size_t middle_sentence(std::size_t length);

/// Candidate order: m0, m0+1, m0-1, m0+2, m0-2, ... out to the scan radius,
/// dropping indices outside [1, length].
std::vector<std::size_t> scan_order(std::size_t length, std::size_t radius = kFallbackScanRadius);

/// Seed for every random needle choice on a document.
std::uint64_t needle_seed(std::uint64_t corpus_seed, std::string_view doc_id, NeedleType needle);

std::variant<NeedleSite, Discard> select_needle_site(const CleanDocument& doc, NeedleType needle,
                                                     const Annotator& annotator, std::uint64_t corpus_seed);

}  // namespace haystack
