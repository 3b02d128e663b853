#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "haystack/corpus.hpp"
#include "haystack/perturb.hpp"
#include "haystack/types.hpp"

namespace haystack {

struct HayTooShort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VariantProvenance {
  std::string source_doc_id;
  std::optional<std::string> hay_doc_id;  // RAND only
  std::size_t hay_draws = 0;              // RAND only: draws until a window fit
  Position position;
  HayType hay = HayType::Orig;
  NeedleType needle = NeedleType::None;
};

struct VariantDocument {
  std::vector<std::string> sentences;
  std::size_t needle_offset = 0;  // == position.i
  VariantProvenance provenance;

  /// Sentences joined with single spaces, as placed in the prompt.
  std::string render() const;
};

struct DocumentPair {
  VariantDocument baseline;  // needle NONE
  VariantDocument altered;
};

struct HayChoice {
  const CleanDocument* doc = nullptr;
  std::size_t draws = 0;
};

/// Picks the random-hay donor document for a (source document, position).
/// The choice depends only on (corpus seed, doc id, position) and the window
/// requirement, so every judge sees the same hay.
class HayPicker {
 public:
  explicit HayPicker(const Corpus& corpus, std::size_t max_draws = 10000)
      : corpus_(&corpus), max_draws_(max_draws) {}

  /// Draws documents (never the source itself) until one has at least
  /// `needle_index + j` sentences and `needle_index > i`. Throws HayTooShort
  /// after max_draws.
  HayChoice pick(std::string_view source_doc_id, Position position, std::size_t needle_index) const;

 private:
  const Corpus* corpus_;
  std::size_t max_draws_;
};

/// d(N, H, (i, j)): the needle sentence (original or altered) with i hay
/// sentences before it and j after it.
VariantDocument build_variant(const CleanDocument& doc, const NeedleSite& site, HayType hay, Position pos,
                              bool use_altered, const HayPicker* hay_picker);

DocumentPair build_pair(const CleanDocument& doc, const NeedleSite& site, HayType hay, Position pos,
                        const HayPicker* hay_picker);

}  // namespace haystack
