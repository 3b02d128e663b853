#include "haystack/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "haystack/random.hpp"
#include "haystack/text.hpp"

namespace haystack {

using nlohmann::json;

std::string CleanDocument::text() const { return text::join(sentences, " "); }

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::TooFewSentences: return "too_few_sentences";
    case RejectReason::AvgLenLow: return "avg_len_low";
    case RejectReason::AvgLenHigh: return "avg_len_high";
    case RejectReason::EmptyAfterClean: return "empty_after_clean";
  }
  return "unknown";
}

const std::vector<std::string>& appendix_titles() {
  static const std::vector<std::string> titles = {"see also", "references",      "external links",
                                                  "further reading", "notes", "bibliography"};
  return titles;
}

namespace {

bool is_appendix_title(std::string_view title) {
  auto t = text::to_lower_ascii(text::normalize_whitespace(title));
  while (!t.empty() && (t.back() == ':' || t.back() == '.')) t.pop_back();
  const auto& titles = appendix_titles();
  return std::find(titles.begin(), titles.end(), t) != titles.end();
}

// "== Title ==" (any depth) or "# Title" (markdown). Returns the title.
std::optional<std::string> header_title(const std::string& line) {
  static const std::regex wiki(R"(^(=+)\s*([^=].*?)\s*\1$)");
  static const std::regex markdown(R"(^#{1,6}\s+(.*?)\s*#*$)");
  std::smatch m;
  if (std::regex_match(line, m, wiki)) return m[2].str();
  if (std::regex_match(line, m, markdown)) return m[1].str();
  return std::nullopt;
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

bool ends_with(std::string_view s, std::string_view p) {
  return s.size() >= p.size() && s.substr(s.size() - p.size()) == p;
}

constexpr std::string_view kBlockTags[] = {"pre", "code", "syntaxhighlight", "source", "math", "table"};

std::optional<std::string> opening_block_tag(std::string_view line) {
  for (auto tag : kBlockTags) {
    const std::string open = "<" + std::string(tag);
    if (starts_with(line, open) && line.size() > open.size() &&
        (line[open.size()] == '>' || line[open.size()] == ' '))
      return std::string(tag);
  }
  return std::nullopt;
}

bool is_table_row(std::string_view line) {
  if (starts_with(line, "|") || starts_with(line, "!")) return true;
  if (std::count(line.begin(), line.end(), '\t') >= 2) return true;
  return false;
}

}  // namespace

std::string clean_text(std::string_view raw) {
  static const std::regex inline_ref(R"(<ref[^>]*/>|<ref[^>]*>.*?</ref>)");
  static const std::regex inline_tag(R"(</?[A-Za-z][^<>]*>)");
  static const std::regex template_call(R"(\{\{[^{}]*\}\})");

  std::vector<std::string> kept;
  std::optional<std::string> fence;      // "```" or "~~~"
  std::optional<std::string> block_tag;  // inside <pre>...</pre> etc.
  int table_depth = 0;

  std::size_t pos = 0;
  while (pos <= raw.size()) {
    const auto nl = raw.find('\n', pos);
    const auto line = text::trim(raw.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? raw.size() + 1 : nl + 1;

    if (fence) {
      if (starts_with(line, *fence)) fence.reset();
      continue;
    }
    if (starts_with(line, "```") || starts_with(line, "~~~")) {
      fence = line.substr(0, 3);
      continue;
    }
    if (block_tag) {
      if (line.find("</" + *block_tag + ">") != std::string::npos) block_tag.reset();
      continue;
    }
    if (const auto tag = opening_block_tag(line)) {
      if (line.find("</" + *tag + ">") == std::string::npos) block_tag = tag;
      continue;
    }
    if (starts_with(line, "{|")) {
      ++table_depth;
      continue;
    }
    if (table_depth > 0) {
      if (starts_with(line, "|}")) --table_depth;
      continue;
    }
    if (line.empty()) continue;
    if (const auto title = header_title(line)) {
      if (is_appendix_title(*title)) break;
      continue;
    }
    if (is_appendix_title(line)) break;
    if (is_table_row(line)) continue;
    if (starts_with(line, "{{") && ends_with(line, "}}")) continue;

    auto cleaned = std::regex_replace(line, inline_ref, " ");
    cleaned = std::regex_replace(cleaned, template_call, " ");
    cleaned = std::regex_replace(cleaned, inline_tag, " ");
    cleaned = text::normalize_whitespace(cleaned);
    if (!cleaned.empty()) kept.push_back(std::move(cleaned));
  }
  return text::normalize_whitespace(text::join(kept, " "));
}

std::optional<RejectReason> filter_document(const CleanDocument& doc, const FilterLimits& limits) {
  const auto n = doc.length();
  if (n == 0) return RejectReason::EmptyAfterClean;
  if (n < limits.min_sentences) return RejectReason::TooFewSentences;
  if (doc.char_count < limits.min_chars_per_sentence * n) return RejectReason::AvgLenLow;
  if (doc.char_count > limits.max_chars_per_sentence * n) return RejectReason::AvgLenHigh;
  return std::nullopt;
}

std::variant<CleanDocument, Rejected> clean_document(const RawDocument& raw,
                                                     const SentenceSplitter& splitter,
                                                     const FilterLimits& limits) {
  const auto cleaned = clean_text(raw.text);
  if (cleaned.empty()) return Rejected{RejectReason::EmptyAfterClean};
  CleanDocument doc;
  doc.id = raw.id;
  doc.sentences = splitter.split(cleaned);
  doc.char_count = text::code_point_count(doc.text());
  if (const auto reason = filter_document(doc, limits)) return Rejected{*reason};
  return doc;
}

std::vector<std::string> position_permutation(const CorpusManifest& manifest, Position position) {
  std::vector<std::string> order = manifest.doc_ids;
  const auto key = manifest.seed ^ hash_all(fnv1a64("position"), static_cast<std::uint64_t>(position.i),
                                            static_cast<std::uint64_t>(position.j));
  CounterRng rng(key);
  for (std::size_t k = order.size(); k > 1; --k) {
    const auto r = static_cast<std::size_t>(rng.below(k));
    std::swap(order[k - 1], order[r]);
  }
  return order;
}

Corpus::Corpus(CorpusManifest manifest, std::vector<CleanDocument> docs)
    : manifest_(std::move(manifest)), docs_(std::move(docs)) {
  for (std::size_t k = 0; k < docs_.size(); ++k) {
    if (!index_.emplace(docs_[k].id, k).second)
      throw std::invalid_argument("duplicate document id: " + docs_[k].id);
  }
}

const CleanDocument& Corpus::at(std::string_view id) const {
  const auto* doc = find(id);
  if (!doc) throw std::out_of_range("no document with id " + std::string(id));
  return *doc;
}

const CleanDocument* Corpus::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &docs_[it->second];
}

Corpus build_corpus(const std::vector<RawDocument>& raws, std::uint64_t seed, std::string corpus_id,
                    const SentenceSplitter& splitter, const FilterLimits& limits) {
  std::set<std::string> seen;
  for (const auto& r : raws) {
    if (!seen.insert(r.id).second) throw std::invalid_argument("duplicate raw document id: " + r.id);
    if (r.text.empty()) throw std::invalid_argument("raw document " + r.id + " has empty text");
  }
  std::vector<const RawDocument*> ordered;
  ordered.reserve(raws.size());
  for (const auto& r : raws) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->id < b->id; });

  CorpusManifest manifest;
  manifest.corpus_id = std::move(corpus_id);
  manifest.seed = seed;
  manifest.counts.raw = raws.size();
  std::vector<CleanDocument> docs;
  for (const auto* raw : ordered) {
    auto result = clean_document(*raw, splitter, limits);
    if (auto* doc = std::get_if<CleanDocument>(&result)) {
      manifest.doc_ids.push_back(doc->id);
      docs.push_back(std::move(*doc));
    } else {
      ++manifest.counts.rejected[std::string(to_string(std::get<Rejected>(result).reason))];
    }
  }
  manifest.counts.cleaned = docs.size();
  return Corpus(std::move(manifest), std::move(docs));
}

std::vector<RawDocument> load_raw_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<RawDocument> out;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out.push_back({f.stem().string(), ss.str()});
  }
  return out;
}

std::vector<RawDocument> load_raw_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<RawDocument> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto rec = json::parse(line);
      out.push_back({rec.at("id").get<std::string>(), rec.at("text").get<std::string>()});
    } catch (const json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "documents.jsonl", std::ios::binary | std::ios::trunc);
    for (const auto& doc : corpus.documents())
      out << json{{"id", doc.id}, {"sentences", doc.sentences}, {"char_count", doc.char_count}}.dump()
          << '\n';
  }
  const auto& m = corpus.manifest();
  json manifest = {{"corpus_id", m.corpus_id},
                   {"seed", m.seed},
                   {"doc_ids", m.doc_ids},
                   {"counts", {{"raw", m.counts.raw}, {"cleaned", m.counts.cleaned}, {"rejected", m.counts.rejected}}}};
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << '\n';
}

Corpus load_corpus(const std::filesystem::path& dir) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw std::runtime_error("no corpus manifest in " + dir.string());
  const auto mj = json::parse(min);
  CorpusManifest manifest;
  manifest.corpus_id = mj.at("corpus_id").get<std::string>();
  manifest.seed = mj.at("seed").get<std::uint64_t>();
  manifest.doc_ids = mj.at("doc_ids").get<std::vector<std::string>>();
  manifest.counts.raw = mj.at("counts").at("raw").get<std::size_t>();
  manifest.counts.cleaned = mj.at("counts").at("cleaned").get<std::size_t>();
  manifest.counts.rejected = mj.at("counts").at("rejected").get<std::map<std::string, std::size_t>>();

  std::ifstream din(dir / "documents.jsonl");
  if (!din) throw std::runtime_error("no documents.jsonl in " + dir.string());
  std::vector<CleanDocument> docs;
  std::string line;
  while (std::getline(din, line)) {
    if (line.empty()) continue;
    const auto rec = json::parse(line);
    CleanDocument doc;
    doc.id = rec.at("id").get<std::string>();
    doc.sentences = rec.at("sentences").get<std::vector<std::string>>();
    doc.char_count = rec.at("char_count").get<std::size_t>();
    docs.push_back(std::move(doc));
  }
  std::vector<std::string> ids;
  for (const auto& d : docs) ids.push_back(d.id);
  if (ids != manifest.doc_ids) throw std::runtime_error("corpus manifest does not match documents.jsonl");
  return Corpus(std::move(manifest), std::move(docs));
}

}  // namespace haystack
