#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace haystack {

enum class Pos { Verb, Aux, Noun, Propn, Adj, Adv, Cconj, Det, Part, Punct, Other };

enum class EntityLabel { Person, Gpe, Loc, Language, Date, Other };

std::string_view to_string(Pos pos);
Pos pos_from_string(std::string_view tag);  // unknown tags -> Pos::Other

std::string_view to_string(EntityLabel label);
EntityLabel entity_label_from_string(std::string_view label);  // unknown -> Other

/// Labels a named-entity needle may act on.
bool is_needle_eligible(EntityLabel label);

struct Token {
  std::size_t start = 0;  // code points, end-exclusive, relative to the sentence
  std::size_t end = 0;
  std::string surface;
  std::string lemma;
  Pos pos = Pos::Other;
  std::string dep;
  std::size_t head = 0;
};

struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  EntityLabel label = EntityLabel::Other;
  std::string text;

  bool operator==(const EntitySpan&) const = default;
};

struct SentenceAnnotation {
  std::size_t sentence_index = 0;
  std::vector<Token> tokens;
  std::vector<EntitySpan> entities;

  /// Index of the unique ROOT token, or nullopt if there is none or several.
  std::optional<std::size_t> root() const;
};

/// Checks every offset/surface invariant against `sentence`; returns a
/// description of the first violation or nullopt.
std::optional<std::string> validate_annotation(std::string_view sentence,
                                               const SentenceAnnotation& ann);

// ---------------------------------------------------------------------------
// Sentence splitting

struct SplitterConfig {
  /// Words (without the trailing period, compared case-insensitively) after
  /// which a period never ends a sentence.
  std::set<std::string> abbreviations = default_abbreviations();
  /// Treat a single uppercase letter followed by "." as an initial ("John F.").
  bool single_letter_abbreviations = true;

  static std::set<std::string> default_abbreviations();
};

class SentenceSplitter {
 public:
  SentenceSplitter() = default;
  explicit SentenceSplitter(SplitterConfig config) : config_(std::move(config)) {}

  /// Splits whitespace-normalized text at terminal punctuation. Joining the
  /// result with single spaces reproduces the normalized input exactly.
  std::vector<std::string> split(std::string_view text) const;

  const SplitterConfig& config() const { return config_; }

 private:
  SplitterConfig config_;
};

// ---------------------------------------------------------------------------
// Gazetteer: exact, case-sensitive surface -> label map, longest match first.

class Gazetteer {
 public:
  Gazetteer() = default;

  /// One JSON record per line: {"surface": "...", "label": "PERSON"}.
  /// Blank lines and lines starting with '#' are skipped.
  static Gazetteer load(const std::filesystem::path& path);
  static Gazetteer parse(std::string_view contents);

  void add(std::string surface, EntityLabel label);
  std::optional<EntityLabel> lookup(std::string_view surface) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t max_words() const { return max_words_; }

  /// Stable digest of the contents; part of the annotator version.
  std::uint64_t fingerprint() const;

  const std::map<std::string, EntityLabel>& entries() const { return entries_; }

 private:
  std::map<std::string, EntityLabel> entries_;
  std::size_t max_words_ = 0;
};

// ---------------------------------------------------------------------------
// Annotators

class Annotator {
 public:
  virtual ~Annotator() = default;

  virtual SentenceAnnotation annotate(std::string_view sentence,
                                      std::size_t sentence_index) const = 0;

  /// Annotates each sentence of a document. The default calls annotate() per
  /// sentence; remote annotators override it to batch.
  virtual std::vector<SentenceAnnotation> annotate_document(
      const std::vector<std::string>& sentences) const;

  virtual std::string version() const = 0;
};

/// Heuristic tokenizer / tagger / gazetteer NER. Pure and thread-safe.
class BuiltinAnnotator final : public Annotator {
 public:
  BuiltinAnnotator() = default;
  explicit BuiltinAnnotator(Gazetteer gazetteer) : gazetteer_(std::move(gazetteer)) {}

  SentenceAnnotation annotate(std::string_view sentence,
                              std::size_t sentence_index = 0) const override;
  std::string version() const override;

  const Gazetteer& gazetteer() const { return gazetteer_; }

 private:
  Gazetteer gazetteer_;
};

SentenceAnnotation annotate_builtin(std::string_view sentence, const Gazetteer& gazetteer = {});

}  // namespace haystack
