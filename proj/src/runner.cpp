#include "haystack/runner.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <ctime>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "haystack/random.hpp"

namespace haystack {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Stopping criterion

void StopConfig::validate() const {
  if (w < 1) throw std::invalid_argument("stop: w must be >= 1");
  if (n_min <= w) throw std::invalid_argument("stop: n_min must exceed w");
  if (!(t > 0.0)) throw std::invalid_argument("stop: t must be positive");
}

namespace {

// Spread of the prefix means s_a, a in [n - w, n]; prefix[a] = sum of the
// first a scores.
double window_spread(const std::vector<long long>& prefix, std::size_t n, int w) {
  double lo = 0.0, hi = 0.0;
  for (std::size_t a = n - static_cast<std::size_t>(w); a <= n; ++a) {
    const double m = static_cast<double>(prefix[a]) / static_cast<double>(a);
    if (a == n - static_cast<std::size_t>(w)) lo = hi = m;
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  return hi - lo;
}

}  // namespace

bool stopping_reached(const std::vector<int>& scores, const StopConfig& cfg) {
  cfg.validate();
  const auto n = scores.size();
  if (n < static_cast<std::size_t>(cfg.n_min)) return false;
  std::vector<long long> prefix(n + 1, 0);
  for (std::size_t a = 0; a < n; ++a) prefix[a + 1] = prefix[a] + scores[a];
  return window_spread(prefix, n, cfg.w) <= cfg.t;
}

std::optional<std::size_t> n_doc(const std::vector<int>& scores, const StopConfig& cfg) {
  StopTracker tracker(cfg);
  for (const int s : scores)
    if (tracker.push(s)) return tracker.size();
  return std::nullopt;
}

StopTracker::StopTracker(StopConfig cfg) : cfg_(cfg) { cfg_.validate(); }

bool StopTracker::push(int score) {
  prefix_.push_back(prefix_.back() + score);
  const auto n = size();
  if (n < static_cast<std::size_t>(cfg_.n_min)) return false;
  const bool reached = window_spread(prefix_, n, cfg_.w) <= cfg_.t;
  if (reached && !first_stop_) first_stop_ = n;
  return reached;
}

// ---------------------------------------------------------------------------
// Records

std::string_view to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::Scored: return "scored";
    case TrialStatus::Discarded: return "discarded";
    case TrialStatus::Failed: return "failed";
  }
  return "unknown";
}

TrialStatus trial_status_from_string(std::string_view s) {
  if (s == "scored") return TrialStatus::Scored;
  if (s == "discarded") return TrialStatus::Discarded;
  if (s == "failed") return TrialStatus::Failed;
  throw std::invalid_argument("unknown trial status: " + std::string(s));
}

json to_json(const TrialRecord& r) {
  json skipped = json::array();
  for (const auto& [m, reason] : r.skipped) skipped.push_back({{"m", m}, {"reason", reason}});
  json site = nullptr;
  if (r.site_m) site = {{"m", *r.site_m}, {"m0", r.site_m0}, {"original", r.original}, {"altered", r.altered}};
  return {{"judge", r.judge},
          {"model_version", r.model_version},
          {"needle", to_string(r.needle)},
          {"hay", to_string(r.hay)},
          {"i", r.position.i},
          {"j", r.position.j},
          {"seq", r.seq},
          {"doc_id", r.doc_id},
          {"status", to_string(r.status)},
          {"score", r.score ? json(*r.score) : json(nullptr)},
          {"raw_response", r.raw_response},
          {"attempts", r.attempts},
          {"prompt_hash", r.prompt_hash},
          {"timestamp", r.timestamp},
          {"hay_doc_id", r.hay_doc_id ? json(*r.hay_doc_id) : json(nullptr)},
          {"hay_draws", r.hay_draws},
          {"site", site},
          {"skipped", skipped},
          {"error", r.error}};
}

TrialRecord trial_record_from_json(const json& j) {
  TrialRecord r;
  r.judge = j.at("judge").get<std::string>();
  r.model_version = j.value("model_version", "");
  r.needle = needle_from_string(j.at("needle").get<std::string>());
  r.hay = hay_from_string(j.at("hay").get<std::string>());
  r.position = {j.at("i").get<int>(), j.at("j").get<int>()};
  r.seq = j.at("seq").get<std::size_t>();
  r.doc_id = j.at("doc_id").get<std::string>();
  r.status = trial_status_from_string(j.at("status").get<std::string>());
  if (j.contains("score") && !j["score"].is_null()) r.score = j["score"].get<int>();
  r.raw_response = j.value("raw_response", "");
  r.attempts = j.value("attempts", 0);
  r.prompt_hash = j.value("prompt_hash", "");
  r.timestamp = j.value("timestamp", "");
  if (j.contains("hay_doc_id") && !j["hay_doc_id"].is_null()) r.hay_doc_id = j["hay_doc_id"].get<std::string>();
  r.hay_draws = j.value("hay_draws", std::size_t{0});
  if (j.contains("site") && !j["site"].is_null()) {
    const auto& s = j["site"];
    r.site_m = s.at("m").get<std::size_t>();
    r.site_m0 = s.at("m0").get<std::size_t>();
    r.original = s.at("original").get<std::string>();
    r.altered = s.at("altered").get<std::string>();
  }
  if (j.contains("skipped"))
    for (const auto& s : j["skipped"]) r.skipped.emplace_back(s.at("m").get<std::size_t>(), s.at("reason").get<std::string>());
  r.error = j.value("error", "");
  if (r.status == TrialStatus::Scored && !r.score) throw std::invalid_argument("scored trial without a score");
  return r;
}

std::string TripleKey::stem() const {
  return judge + "__" + std::string(to_string(needle)) + "__" + std::string(to_string(hay));
}

// ---------------------------------------------------------------------------
// Store

TrialStore::TrialStore(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

TrialStore::~TrialStore() {
  for (const auto& [name, fd] : fds_) {
    ::fsync(fd);
    ::close(fd);
  }
}

fs::path TrialStore::file_for(const TripleKey& key) const { return dir_ / (key.stem() + ".jsonl"); }

int TrialStore::fd_for(const TripleKey& key) {
  const auto stem = key.stem();
  if (const auto it = fds_.find(stem); it != fds_.end()) return it->second;
  const auto path = file_for(key);
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw std::runtime_error("cannot open " + path.string() + ": " + std::strerror(errno));
  fds_.emplace(stem, fd);
  return fd;
}

std::map<Position, std::vector<TrialRecord>> TrialStore::replay(const TripleKey& key) {
  std::lock_guard lock(mu_);
  std::map<Position, std::vector<TrialRecord>> out;
  const auto path = file_for(key);
  if (!fs::exists(path)) return out;
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string content = buf.str();

  std::size_t pos = 0, good = 0, line_no = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    if (nl == std::string::npos) break;  // unterminated tail: interrupted write
    ++line_no;
    const auto line = std::string_view(content).substr(pos, nl - pos);
    if (!line.empty()) {
      try {
        auto rec = trial_record_from_json(json::parse(line));
        out[rec.position].push_back(std::move(rec));
      } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": bad record: " + e.what());
      }
    }
    pos = nl + 1;
    good = pos;
  }
  if (good < content.size()) fs::resize_file(path, good);
  return out;
}

void TrialStore::append(const TripleKey& key, const TrialRecord& record) {
  const std::string line = to_json(record).dump() + "\n";
  std::lock_guard lock(mu_);
  const int fd = fd_for(key);
  std::size_t done = 0;
  while (done < line.size()) {
    const auto n = ::write(fd, line.data() + done, line.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error("write to " + file_for(key).string() + " failed: " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

void TrialStore::sync(const TripleKey& key) {
  std::lock_guard lock(mu_);
  if (const auto it = fds_.find(key.stem()); it != fds_.end()) ::fsync(it->second);
}

std::vector<TripleKey> TrialStore::triples() const {
  std::vector<TripleKey> out;
  if (!fs::exists(dir_)) return out;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".jsonl") continue;
    const auto stem = entry.path().stem().string();
    const auto b = stem.rfind("__");
    if (b == std::string::npos || b == 0) continue;
    const auto a = stem.rfind("__", b - 1);
    if (a == std::string::npos) continue;
    try {
      out.push_back({stem.substr(0, a), needle_from_string(stem.substr(a + 2, b - a - 2)),
                     hay_from_string(stem.substr(b + 2))});
    } catch (const std::invalid_argument&) {
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool TrialStore::has_records() const {
  for (const auto& key : triples())
    if (fs::file_size(file_for(key)) > 0) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Cells

std::variant<NeedleSite, Discard> SiteCache::get(const CleanDocument& doc, NeedleType needle) {
  const auto key = std::make_pair(doc.id, needle);
  {
    std::lock_guard lock(mu_);
    if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  auto site = select_needle_site(doc, needle, *annotator_, seed_);
  std::lock_guard lock(mu_);
  return cache_.emplace(key, std::move(site)).first->second;
}

CellState replay_cell(const TripleKey& triple, Position position, const std::vector<TrialRecord>& records,
                      const StopConfig& stop) {
  CellState state;
  state.triple = triple;
  state.position = position;
  StopTracker tracker(stop);
  for (const auto& r : records) {
    if (r.seq != state.slots)
      throw std::runtime_error("trial store out of order for " + triple.stem() + " at (" +
                               std::to_string(position.i) + "," + std::to_string(position.j) + ")");
    ++state.slots;
    switch (r.status) {
      case TrialStatus::Scored:
        state.scores.push_back(*r.score);
        tracker.push(*r.score);
        break;
      case TrialStatus::Discarded: ++state.discards; break;
      case TrialStatus::Failed: ++state.failed; break;
    }
  }
  state.n_stop = tracker.first_stop();
  return state;
}

bool advance_cell(const CellContext& ctx, CellState& state, std::optional<std::size_t> target) {
  StopTracker tracker(ctx.stop);
  for (const int s : state.scores) tracker.push(s);
  state.n_stop = tracker.first_stop();

  const auto& triple = state.triple;
  const auto pos = state.position;
  const auto perm = position_permutation(ctx.corpus->manifest(), pos);
  const auto& judge_id = ctx.judge->id();

  while (true) {
    if (target ? state.n() >= *target : state.n_stop.has_value()) return true;
    if (ctx.cancel && ctx.cancel->load()) return false;
    if (state.slots >= perm.size()) {
      state.exhausted = true;
      return true;
    }
    const auto& doc = ctx.corpus->at(perm[state.slots]);

    TrialRecord rec;
    rec.judge = judge_id.name;
    rec.model_version = judge_id.model_version;
    rec.needle = triple.needle;
    rec.hay = triple.hay;
    rec.position = pos;
    rec.seq = state.slots;
    rec.doc_id = doc.id;

    const auto site = ctx.sites->get(doc, triple.needle);
    if (const auto* d = std::get_if<Discard>(&site)) {
      rec.status = TrialStatus::Discarded;
      rec.error = "no_needle_site";
      for (const auto& [m, reason] : d->skipped) rec.skipped.emplace_back(m, std::string(to_string(reason)));
    } else {
      const auto& s = std::get<NeedleSite>(site);
      rec.site_m = s.m;
      rec.site_m0 = s.m0;
      rec.original = s.original;
      rec.altered = s.altered;
      for (const auto& [m, reason] : s.skipped) rec.skipped.emplace_back(m, std::string(to_string(reason)));
      std::optional<DocumentPair> pair;
      try {
        pair = build_pair(doc, s, triple.hay, pos, ctx.hay_picker);
      } catch (const HayTooShort& e) {
        rec.status = TrialStatus::Discarded;
        rec.error = std::string("hay_too_short: ") + e.what();
      }
      if (pair) {
        rec.hay_doc_id = pair->altered.provenance.hay_doc_id;
        rec.hay_draws = pair->altered.provenance.hay_draws;
        const auto prompt = render_prompt(*pair);
        rec.prompt_hash = fmt::format("{:016x}", hash_combine(ctx.config_hash, prompt.hash()));
        const TrialKey key{judge_id.name, triple.needle, triple.hay, pos, doc.id};
        try {
          const auto reply = ctx.judge->score(key, prompt);
          rec.status = TrialStatus::Scored;
          rec.score = reply.score.value();
          rec.raw_response = reply.raw;
          rec.attempts = reply.attempts;
        } catch (const ParseError& e) {
          rec.status = TrialStatus::Failed;
          rec.error = e.what();
        }
      }
    }
    rec.timestamp = ctx.clock ? ctx.clock() : utc_timestamp();
    ctx.store->append(triple, rec);

    ++state.slots;
    if (rec.status == TrialStatus::Scored) {
      state.scores.push_back(*rec.score);
      tracker.push(*rec.score);
      if (!state.n_stop) state.n_stop = tracker.first_stop();
    } else if (rec.status == TrialStatus::Discarded) {
      ++state.discards;
    } else {
      ++state.failed;
    }
  }
}

CellState run_cell(const CellContext& ctx, const TripleKey& triple, Position position) {
  auto replayed = ctx.store->replay(triple);
  auto state = replay_cell(triple, position, replayed[position], ctx.stop);
  advance_cell(ctx, state);
  return state;
}

std::size_t equalize(const CellContext& ctx, std::vector<CellState>& states) {
  std::size_t depth = 0;
  for (const auto& s : states) depth = std::max(depth, s.n_stop.value_or(s.n()));
  for (auto& s : states)
    if (!advance_cell(ctx, s, depth)) break;
  return depth;
}

// ---------------------------------------------------------------------------
// Experiment

std::size_t cell_count(std::size_t judges, std::size_t needles, std::size_t hays, int k_max) {
  const auto side = static_cast<std::size_t>(k_max + 1);
  return judges * needles * hays * side * side;
}

json RunSummary::to_json() const {
  json rows = json::array();
  for (const auto& t : triples)
    rows.push_back({{"judge", t.key.judge},
                    {"needle", haystack::to_string(t.key.needle)},
                    {"hay", haystack::to_string(t.key.hay)},
                    {"depth", t.depth},
                    {"cells", t.cells},
                    {"exhausted_cells", t.exhausted_cells},
                    {"scored", t.scored},
                    {"discards", t.discards},
                    {"failed", t.failed}});
  return {{"settings", settings}, {"trials", trials},     {"scored", scored},
          {"discards", discards}, {"failed", failed},     {"requests", requests},
          {"estimated_tokens", estimated_tokens},         {"triples", rows}};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  return fmt::format("{}.{:03d}Z", buf, ms);
}

RunSummary run_experiment(const Corpus& corpus, const Annotator& annotator, const ExperimentPlan& plan,
                          const RunOptions& options, Budget* budget) {
  plan.stop.validate();
  if (plan.k_max < 0) throw std::invalid_argument("k_max must be >= 0");
  if (corpus.size() == 0) throw std::invalid_argument("corpus is empty");

  TrialStore store(options.outdir / "trials");
  HayPicker hay_picker(corpus);
  SiteCache sites(annotator, corpus.manifest().seed);

  std::vector<std::pair<Judge*, TripleKey>> work;
  for (auto* judge : plan.judges)
    for (const auto needle : plan.needles)
      for (const auto hay : plan.hays) work.push_back({judge, {judge->id().name, needle, hay}});

  std::vector<TripleSummary> results(work.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> cancel{false};
  std::mutex error_mu;
  std::exception_ptr error;

  const auto worker = [&] {
    while (!cancel.load()) {
      const auto idx = next.fetch_add(1);
      if (idx >= work.size()) return;
      const auto& [judge, triple] = work[idx];
      try {
        CellContext ctx{&corpus, &hay_picker, judge, &store, &sites, plan.stop, options.config_hash, &cancel,
                        options.clock};
        auto replayed = store.replay(triple);
        std::vector<CellState> states;
        for (const auto pos : all_positions(plan.k_max)) {
          states.push_back(replay_cell(triple, pos, replayed[pos], plan.stop));
          if (!advance_cell(ctx, states.back())) break;
        }
        if (cancel.load()) {
          store.sync(triple);
          return;
        }
        auto& summary = results[idx];
        summary.key = triple;
        summary.depth = equalize(ctx, states);
        store.sync(triple);
        summary.cells = states.size();
        for (const auto& s : states) {
          summary.exhausted_cells += s.exhausted ? 1 : 0;
          summary.scored += s.n();
          summary.discards += s.discards;
          summary.failed += s.failed;
        }
      } catch (...) {
        store.sync(triple);
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        cancel = true;
      }
    }
  };

  const auto n_workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, options.workers)), 1, std::max<std::size_t>(1, work.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_workers; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);

  RunSummary summary;
  summary.settings = cell_count(plan.judges.size(), plan.needles.size(), plan.hays.size(), plan.k_max);
  summary.triples = std::move(results);
  for (const auto& t : summary.triples) {
    summary.scored += t.scored;
    summary.discards += t.discards;
    summary.failed += t.failed;
  }
  summary.trials = summary.scored + summary.discards + summary.failed;
  if (budget) {
    summary.requests = budget->requests();
    summary.estimated_tokens = budget->tokens();
  }
  std::ofstream out(options.outdir / "run_summary.json");
  out << summary.to_json().dump(2) << "\n";
  return summary;
}

}  // namespace haystack
