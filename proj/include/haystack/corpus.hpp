#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "haystack/annotation.hpp"
#include "haystack/types.hpp"

namespace haystack {

struct RawDocument {
  std::string id;
  std::string text;
};

struct CleanDocument {
  std::string id;
  std::vector<std::string> sentences;
  std::size_t char_count = 0;  // code points of text()

  std::size_t length() const { return sentences.size(); }
  /// Sentences joined by single spaces.
  std::string text() const;
};

enum class RejectReason { TooFewSentences, AvgLenLow, AvgLenHigh, EmptyAfterClean };

std::string_view to_string(RejectReason reason);

struct Rejected {
  RejectReason reason;
};

struct FilterLimits {
  std::size_t min_sentences = 40;
  std::size_t min_chars_per_sentence = 150;
  std::size_t max_chars_per_sentence = 2000;
};

/// Strips section headers, trailing appendix sections, tables and code/markup
/// blocks, and normalizes whitespace. Idempotent.
std::string clean_text(std::string_view raw);

/// Appendix section titles; a header (or a bare title line) matching one of
/// these, case-insensitively, drops it and everything after it.
const std::vector<std::string>& appendix_titles();

/// nullopt means accept. Both character bounds are inclusive.
std::optional<RejectReason> filter_document(const CleanDocument& doc, const FilterLimits& limits = {});

std::variant<CleanDocument, Rejected> clean_document(const RawDocument& raw,
                                                     const SentenceSplitter& splitter,
                                                     const FilterLimits& limits = {});

struct CorpusCounts {
  std::size_t raw = 0;
  std::size_t cleaned = 0;
  std::map<std::string, std::size_t> rejected;  // reason -> count
};

struct CorpusManifest {
  std::string corpus_id;
  std::vector<std::string> doc_ids;  // sorted
  std::uint64_t seed = 0;
  CorpusCounts counts;
};

/// Fisher-Yates over manifest.doc_ids driven by a counter generator keyed on
/// seed ^ hash(i, j). Same inputs, same order, everywhere.
std::vector<std::string> position_permutation(const CorpusManifest& manifest, Position position);

class Corpus {
 public:
  Corpus() = default;
  Corpus(CorpusManifest manifest, std::vector<CleanDocument> docs);

  const CorpusManifest& manifest() const { return manifest_; }
  const std::vector<CleanDocument>& documents() const { return docs_; }
  const CleanDocument& at(std::string_view id) const;
  const CleanDocument* find(std::string_view id) const;
  std::size_t size() const { return docs_.size(); }

 private:
  CorpusManifest manifest_;
  std::vector<CleanDocument> docs_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Cleans and filters every raw document; accepted documents are ordered by id.
/// Throws std::invalid_argument on duplicate ids or empty text.
Corpus build_corpus(const std::vector<RawDocument>& raws, std::uint64_t seed, std::string corpus_id,
                    const SentenceSplitter& splitter = {}, const FilterLimits& limits = {});

/// Every regular file in `dir` (sorted by name); id is the file stem.
std::vector<RawDocument> load_raw_directory(const std::filesystem::path& dir);
/// One {"id": ..., "text": ...} record per line.
std::vector<RawDocument> load_raw_jsonl(const std::filesystem::path& path);

/// Writes documents.jsonl ({id, sentences, char_count} per line) and manifest.json.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace haystack
