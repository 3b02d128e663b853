#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "haystack/assemble.hpp"
#include "haystack/corpus.hpp"
#include "haystack/judge.hpp"
#include "haystack/perturb.hpp"
#include "haystack/types.hpp"

namespace haystack {

// ---------------------------------------------------------------------------
// Stopping criterion

struct StopConfig {
  int n_min = 100;
  int w = 10;
  double t = 1.0;

  void validate() const;  // throws std::invalid_argument
};

/// True iff n = |scores| >= n_min and the prefix means s_a for a in
/// [n - w, n] all lie within t of each other.
bool stopping_reached(const std::vector<int>& scores, const StopConfig& cfg);

/// Smallest n for which the prefix of length n satisfies the criterion.
std::optional<std::size_t> n_doc(const std::vector<int>& scores, const StopConfig& cfg);

/// Incremental form of stopping_reached; same arithmetic, O(w) per score.
class StopTracker {
 public:
  explicit StopTracker(StopConfig cfg);

  /// Appends a score and reports whether the criterion holds at the new length.
  bool push(int score);
  std::size_t size() const { return prefix_.size() - 1; }
  std::optional<std::size_t> first_stop() const { return first_stop_; }

 private:
  StopConfig cfg_;
  std::vector<long long> prefix_{0};
  std::optional<std::size_t> first_stop_;
};

// ---------------------------------------------------------------------------
// Trial records

enum class TrialStatus { Scored, Discarded, Failed };

std::string_view to_string(TrialStatus s);
TrialStatus trial_status_from_string(std::string_view s);

struct TrialRecord {
  std::string judge;
  std::string model_version;
  NeedleType needle = NeedleType::Neg;
  HayType hay = HayType::Orig;
  Position position;
  std::size_t seq = 0;  // slot in the position's document permutation
  std::string doc_id;
  TrialStatus status = TrialStatus::Scored;
  std::optional<int> score;
  std::string raw_response;
  int attempts = 0;
  std::string prompt_hash;
  std::string timestamp;
  std::optional<std::string> hay_doc_id;
  std::size_t hay_draws = 0;
  std::optional<std::size_t> site_m;
  std::size_t site_m0 = 0;
  std::string original;
  std::string altered;
  std::vector<std::pair<std::size_t, std::string>> skipped;  // (m, reason)
  std::string error;  // discard or failure reason
};

nlohmann::json to_json(const TrialRecord& r);
TrialRecord trial_record_from_json(const nlohmann::json& j);

struct TripleKey {
  std::string judge;
  NeedleType needle = NeedleType::Neg;
  HayType hay = HayType::Orig;

  auto operator<=>(const TripleKey&) const = default;
  /// "<judge>__<needle>__<hay>"
  std::string stem() const;
};

/// Append-only JSONL store, one file per (judge, needle, hay) under `dir`.
class TrialStore {
 public:
  explicit TrialStore(std::filesystem::path dir);
  ~TrialStore();
  TrialStore(const TrialStore&) = delete;
  TrialStore& operator=(const TrialStore&) = delete;

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path file_for(const TripleKey& key) const;

  /// Records of one triple grouped by position, in append order. A truncated
  /// final line (interrupted write) is dropped and cut from the file.
  std::map<Position, std::vector<TrialRecord>> replay(const TripleKey& key);

  void append(const TripleKey& key, const TrialRecord& record);
  /// Flushes the triple's file to disk.
  void sync(const TripleKey& key);

  /// Every triple with a file in the store.
  std::vector<TripleKey> triples() const;
  bool has_records() const;

 private:
  int fd_for(const TripleKey& key);

  std::filesystem::path dir_;
  std::mutex mu_;
  std::map<std::string, int> fds_;
};

// ---------------------------------------------------------------------------
// Cells

/// Needle sites depend only on (document, needle), so every position and
/// judge shares one computation.
class SiteCache {
 public:
  explicit SiteCache(const Annotator& annotator, std::uint64_t corpus_seed)
      : annotator_(&annotator), seed_(corpus_seed) {}

  std::variant<NeedleSite, Discard> get(const CleanDocument& doc, NeedleType needle);

 private:
  const Annotator* annotator_;
  std::uint64_t seed_;
  std::mutex mu_;
  std::map<std::pair<std::string, NeedleType>, std::variant<NeedleSite, Discard>> cache_;
};

struct CellState {
  TripleKey triple;
  Position position;
  std::vector<int> scores;  // permutation order
  std::size_t slots = 0;    // permutation slots consumed
  std::size_t discards = 0;
  std::size_t failed = 0;
  std::optional<std::size_t> n_stop;  // nDoc from the stopping criterion
  bool exhausted = false;             // permutation ran out first

  std::size_t n() const { return scores.size(); }
};

struct CellContext {
  const Corpus* corpus = nullptr;
  const HayPicker* hay_picker = nullptr;
  Judge* judge = nullptr;
  TrialStore* store = nullptr;
  SiteCache* sites = nullptr;
  StopConfig stop;
  std::uint64_t config_hash = 0;
  const std::atomic<bool>* cancel = nullptr;
  std::function<std::string()> clock;  // timestamps; defaults to UTC now
};

/// Rebuilds a cell from its stored records.
CellState replay_cell(const TripleKey& triple, Position position, const std::vector<TrialRecord>& records,
                      const StopConfig& stop);

/// Continues a cell along its permutation. Without a target it stops at the
/// first n meeting the criterion; with one it stops at n == target. Discarded
/// and failed trials use a slot but add no score. Returns false if cancelled.
bool advance_cell(const CellContext& ctx, CellState& state, std::optional<std::size_t> target = std::nullopt);

/// Replay plus advance to the stopping point.
CellState run_cell(const CellContext& ctx, const TripleKey& triple, Position position);

/// Extends every cell to D = max nDoc and returns D.
std::size_t equalize(const CellContext& ctx, std::vector<CellState>& states);

// ---------------------------------------------------------------------------
// Experiment

struct ExperimentPlan {
  std::vector<Judge*> judges;
  std::vector<NeedleType> needles;
  std::vector<HayType> hays;
  int k_max = 9;
  StopConfig stop;
};

std::size_t cell_count(std::size_t judges, std::size_t needles, std::size_t hays, int k_max);

struct RunOptions {
  std::filesystem::path outdir;
  int workers = 1;
  std::uint64_t config_hash = 0;
  std::function<std::string()> clock;
};

struct TripleSummary {
  TripleKey key;
  std::size_t depth = 0;  // D after equalization
  std::size_t cells = 0;
  std::size_t exhausted_cells = 0;
  std::size_t scored = 0;
  std::size_t discards = 0;
  std::size_t failed = 0;
};

struct RunSummary {
  std::size_t settings = 0;
  std::vector<TripleSummary> triples;
  std::size_t trials = 0;
  std::size_t scored = 0;
  std::size_t discards = 0;
  std::size_t failed = 0;
  std::uint64_t requests = 0;
  std::uint64_t estimated_tokens = 0;

  nlohmann::json to_json() const;
};

/// Runs (or resumes) every configured triple; triples run in parallel on
/// `workers` threads, each triple's file written by one thread in a fixed
/// order. The first judge error stops the run and is rethrown after the store
/// is synced. The summary is written to <outdir>/run_summary.json.
RunSummary run_experiment(const Corpus& corpus, const Annotator& annotator, const ExperimentPlan& plan,
                          const RunOptions& options, Budget* budget);

std::string utc_timestamp();

}  // namespace haystack
