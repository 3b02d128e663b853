// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <fmt/format.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "haystack/perturb.hpp"
#include "haystack/random.hpp"
#include "haystack/runner.hpp"
#include "haystack/stats.hpp"
#include "haystack/text.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace haystack;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kData = HAYSTACK_TEST_DATA;

struct Outcome {
  bool ok = true;
  std::string detail;
};

// Records the first failure; later checks still run.
struct Checker {
  Outcome out;
  int failures = 0;

  void expect(bool cond, const std::string& what) {
    if (cond) return;
    if (failures++ == 0) out.detail = what;
    out.ok = false;
  }
  Outcome done(std::string summary) {
    if (out.ok) out.detail = std::move(summary);
    else if (failures > 1) out.detail += fmt::format(" (+{} more)", failures - 1);
    return out;
  }
};

std::string edited(const EditResult& r) { return applied(r) ? std::get<std::string>(r) : std::string(); }

int count_not(std::string_view s) { return static_cast<int>(text::count_word(s, "not")); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

Outcome perturbations() {
  Checker c;
  const auto gaz = Gazetteer::load(kData + "/fixture_gazetteer.jsonl");
  struct Fixture {
    std::string doc, text;
    bool negated;
  };
  std::vector<Fixture> fixtures;
  {
    std::ifstream in(kData + "/perturbation_fixtures.jsonl");
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) {
        const auto j = json::parse(line);
        fixtures.push_back({j["doc"], j["text"], j["negated"]});
      }
  }
  c.expect(fixtures.size() == 200, fmt::format("expected 200 fixtures, found {}", fixtures.size()));

  std::map<std::string, std::vector<std::size_t>> docs;
  for (std::size_t k = 0; k < fixtures.size(); ++k) docs[fixtures[k].doc].push_back(k);

  int swapped = 0, negated = 0, negation_skips = 0, replaced = 0;
  for (const auto& [doc, members] : docs) {
    std::vector<SentenceAnnotation> anns;
    for (std::size_t s = 0; s < members.size(); ++s) {
      anns.push_back(annotate_builtin(fixtures[members[s]].text, gaz));
      anns.back().sentence_index = s;
    }
    const auto ents = collect_entities(anns);
    for (std::size_t s = 0; s < members.size(); ++s) {
      const auto& f = fixtures[members[s]];
      const auto& ann = anns[s];

      const auto once = conj_swap(f.text, ann);
      if (applied(once)) {
        ++swapped;
        const auto twice = edited(conj_swap(edited(once), annotate_builtin(edited(once), gaz)));
        c.expect(twice == f.text, "conj_swap twice changed: " + f.text);
      }

      const auto neg = negate(f.text, ann);
      if (f.negated) {
        c.expect(!applied(neg) && std::get<Skip>(neg).reason == SkipReason::AlreadyNegated,
                 "pre-negated fixture not skipped: " + f.text);
        negation_skips += !applied(neg);
      } else {
        c.expect(applied(neg), "negate skipped: " + f.text);
        if (applied(neg)) {
          ++negated;
          c.expect(count_not(edited(neg)) == count_not(f.text) + 1, "negate did not add one not: " + edited(neg));
        }
      }

      const auto ner = ner_replace(f.text, ann, ents, hash_combine(fnv1a64(f.doc), static_cast<std::uint64_t>(s)));
      if (!applied(ner)) continue;
      ++replaced;
      const auto out = edited(ner);
      bool one_span = false;
      for (const auto& e : ann.entities) {
        if (!is_needle_eligible(e.label)) continue;
        const auto pre = text::slice(f.text, 0, e.start);
        const auto post = text::slice(f.text, e.end, text::code_point_count(f.text));
        if (out.size() < pre.size() + post.size() || out.compare(0, pre.size(), pre) != 0 ||
            out.compare(out.size() - post.size(), post.size(), post) != 0)
          continue;
        const auto middle = out.substr(pre.size(), out.size() - pre.size() - post.size());
        for (const auto& de : ents)
          if (de.sentence_index != s && de.span.label == e.label && de.span.text == middle && middle != e.text)
            one_span = true;
      }
      c.expect(one_span, "entity replacement is not a single same-label span: " + out);
    }
  }
  c.expect(negation_skips == 20, fmt::format("{} of 20 pre-negated fixtures skipped", negation_skips));
  c.expect(swapped > 0 && replaced > 0, "fixtures exercise no swaps or replacements");

  // Worked examples.
  const auto worked = Gazetteer::load(kData + "/worked_gazetteer.jsonl");
  const BuiltinAnnotator worked_annotator(worked);
  const std::string caesar = "Caesar was a Roman general.";
  c.expect(edited(negate(caesar, annotate_builtin(caesar))) == "Caesar was not a Roman general.", "Caesar negation");

  CleanDocument ohare{"ohare",
                      {"Thousands of flights land in Chicago.", "Tons of passengers transfer at O'Hare.",
                       "O'Hare is larger and busier than Midway.", "Airport runways handle traffic all day.",
                       "United runs its busiest hub at O'Hare."},
                      0};
  const std::map<NeedleType, std::string> ohare_expected = {
      {NeedleType::Neg, "O'Hare is not larger and busier than Midway."},
      {NeedleType::Con, "O'Hare is larger or busier than Midway."},
      {NeedleType::Ner, "O'Hare is larger and busier than Chicago."}};
  for (const auto& [needle, expected] : ohare_expected) {
    const auto site = select_needle_site(ohare, needle, worked_annotator, 1);
    const auto* s = std::get_if<NeedleSite>(&site);
    c.expect(s && s->m == 3 && s->altered == expected, fmt::format("O'Hare {} example", to_string(needle)));
  }

  const std::vector<std::string> cleopatra = {
      "Cleopatra was Queen of the Ptolemaic Kingdom of Egypt.",
      "A member of the Ptolemaic dynasty, she was a descendant of its founder Ptolemy I Soter.",
      "After her death, Egypt became a province of the Roman Empire."};
  const auto canns = worked_annotator.annotate_document(cleopatra);
  c.expect(edited(ner_replace(cleopatra[1], canns[1], collect_entities(canns), 0)) ==
               "A member of the Ptolemaic dynasty, she was a descendant of its founder Cleopatra.",
           "Cleopatra example");

  return c.done(fmt::format("{} swaps, {} negations, {} skips, {} replacements, 4 worked examples", swapped, negated,
                            negation_skips, replaced));
}

// ---------------------------------------------------------------------------

Outcome stopping() {
  Checker c;
  const StopConfig cfg{100, 10, 1.0};
  CounterRng rng(fnv1a64("stopping streams"));
  std::size_t stopped = 0, checked_prefixes = 0;
  for (int stream = 0; stream < 1000; ++stream) {
    const auto length = 1 + rng.below(500);
    const double sd = std::array<double, 6>{0, 2, 5, 10, 20, 40}[rng.below(6)];
    const double center = static_cast<double>(rng.below(101));
    const double drift = rng.uniform() < 0.2 ? (rng.uniform() - 0.5) * 0.2 : 0.0;
    std::vector<int> scores;
    for (std::size_t k = 0; k < length; ++k) {
      const double v = center + drift * static_cast<double>(k) + sd * rng.gaussian();
      scores.push_back(static_cast<int>(std::lround(std::clamp(v, 0.0, 100.0))));
    }

    const auto expected = oracle::n_doc(scores, cfg.n_min, cfg.w, cfg.t);
    const auto got = n_doc(scores, cfg);
    c.expect(got == expected, fmt::format("stream {}: nDoc {} vs oracle {}", stream, got ? long(*got) : -1L,
                                          expected ? long(*expected) : -1L));
    stopped += expected.has_value();

    StopTracker tracker(cfg);
    for (const int s : scores) tracker.push(s);
    c.expect(tracker.first_stop() == expected, fmt::format("stream {}: tracker disagrees", stream));

    for (int probe = 0; probe < 3; ++probe) {
      const auto n = 1 + rng.below(length);
      const std::vector<int> prefix(scores.begin(), scores.begin() + static_cast<long>(n));
      c.expect(stopping_reached(prefix, cfg) == oracle::stopping(scores, n, cfg.n_min, cfg.w, cfg.t),
               fmt::format("stream {}: stopping_reached at n={}", stream, n));
      ++checked_prefixes;
    }
  }
  for (const int v : {0, 37, 100}) {
    const std::vector<int> flat(500, v);
    c.expect(n_doc(flat, cfg) == std::optional<std::size_t>(100), fmt::format("constant {} stream", v));
  }
  return c.done(fmt::format("1000 streams ({} stop), {} prefix probes, constant streams stop at 100", stopped,
                            checked_prefixes));
}

// ---------------------------------------------------------------------------

std::vector<int> random_sample(CounterRng& rng, std::size_t n, int lo = 0, int hi = 100) {
  std::vector<int> v;
  const int center = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
  const double sd = 1.0 + 30.0 * rng.uniform();
  for (std::size_t k = 0; k < n; ++k)
    v.push_back(std::clamp(static_cast<int>(std::lround(center + sd * rng.gaussian())), lo, hi));
  return v;
}

std::vector<double> as_doubles(const std::vector<int>& v) { return {v.begin(), v.end()}; }

Outcome statistics() {
  Checker c;
  CounterRng rng(fnv1a64("statistics pairs"));
  double worst_emd = 0.0, worst_p = 0.0, worst_centered = 0.0, max_centered = 0.0;
  for (int pair = 0; pair < 500; ++pair) {
    const auto a = random_sample(rng, 1 + rng.below(50));
    const auto b = random_sample(rng, 1 + rng.below(50));
    const ScoreSample sa(a), sb(b);

    const double e = emd(sa, sb);
    worst_emd = std::max(worst_emd, std::abs(e - oracle::transport_emd(as_doubles(a), as_doubles(b))));

    const auto t = ks_test(sa, sb);
    c.expect(t.statistic == oracle::ks_d(a, b), fmt::format("pair {}: KS D {} vs {}", pair, t.statistic,
                                                            oracle::ks_d(a, b)));
    const double ne = static_cast<double>(a.size() * b.size()) / static_cast<double>(a.size() + b.size());
    worst_p = std::max(worst_p, std::abs(t.p_value - oracle::kolmogorov_series(std::sqrt(ne) * t.statistic)));

    const double ce = centered_emd(sa, sb);
    max_centered = std::max(max_centered, ce);

    // Shift-only pair: b = a + shift, kept inside [0, 100].
    const auto base = random_sample(rng, 1 + rng.below(50), 0, 60);
    const int shift = static_cast<int>(rng.below(41));
    std::vector<int> moved;
    for (const int v : base) moved.push_back(v + shift);
    worst_centered = std::max(worst_centered, centered_emd(ScoreSample(base), ScoreSample(moved)));
  }
  // Extreme shapes for the bound.
  const std::vector<std::pair<std::vector<int>, std::vector<int>>> extremes = {
      {{0, 100}, {50}}, {{0, 0, 0, 100}, {100, 100, 100, 0}}, {{0, 100, 100}, {0, 0, 100}}, {{0}, {100}}};
  for (const auto& [a, b] : extremes) max_centered = std::max(max_centered, centered_emd(ScoreSample(a), ScoreSample(b)));

  c.expect(worst_emd <= 1e-9, fmt::format("EMD off by {:.3g}", worst_emd));
  c.expect(worst_p <= 1e-6, fmt::format("KS p off by {:.3g}", worst_p));
  c.expect(worst_centered <= 1e-9, fmt::format("centered EMD of shifted pair {:.3g}", worst_centered));
  c.expect(max_centered <= 50.0, fmt::format("centered EMD {:.6f} above 50", max_centered));
  return c.done(fmt::format("500 pairs: max |EMD err| {:.2g}, KS D exact, max |p err| {:.2g}, shifted centered "
                            "EMD {:.2g}, max centered EMD {:.3f}",
                            worst_emd, worst_p, worst_centered, max_centered));
}

// ---------------------------------------------------------------------------

PositionGrid mock_grid(const BiasProfile& profile, NeedleType needle, int k_max, int per_cell) {
  PositionGrid g(k_max);
  for (const auto p : all_positions(k_max)) {
    std::vector<int> v;
    for (int d = 0; d < per_cell; ++d)
      v.push_back(mock_score(profile, {"mock", needle, HayType::Orig, p, "doc-" + std::to_string(d)}).value());
    g.set(p, ScoreSample(std::move(v)));
  }
  return g;
}

Outcome epb_recovery() {
  Checker c;
  BiasProfile biased;
  biased.base = 70;
  biased.early_bias = 10;
  biased.noise_sd = 5;
  biased.seed = 4;
  const auto g = mock_grid(biased, NeedleType::Neg, 9, 100);
  const double e = early_positionality_bias(g);
  c.expect(std::abs(e - 20.0) <= 1.5, fmt::format("EPB {:.4f} outside 20 +- 1.5", e));
  const double et = early_positionality_bias(g.transposed());
  c.expect(et == -e, fmt::format("EPB of transpose {:.17g} is not -{:.17g}", et, e));

  BiasProfile flat = biased;
  flat.early_bias = 0;
  const double e0 = early_positionality_bias(mock_grid(flat, NeedleType::Neg, 9, 100));
  c.expect(std::abs(e0) <= 1.0, fmt::format("unbiased EPB {:.4f}", e0));
  return c.done(fmt::format("EPB {:.4f} (target 20 +- 1.5), unbiased {:.4f}, transpose exact", e, e0));
}

Outcome bipolarization() {
  Checker c;
  BiasProfile p;
  p.base = 50;
  p.noise_sd = 5;
  p.bipolar_prob = 0.66;
  p.k_low = 5;
  p.seed = 5;
  const auto pooled = mock_grid(p, NeedleType::Con, 9, 100).pooled();
  const double b5 = bipolarization_index(pooled, 5);
  const double target = 4 * 0.33 * 0.33;
  c.expect(std::abs(b5 - target) <= 0.1, fmt::format("B(5) {:.4f} outside {:.4f} +- 0.1", b5, target));
  const auto curve = bipolarization_curve(pooled, 25);
  c.expect(curve.size() == 26, "curve does not span k = 0..25");
  for (std::size_t k = 1; k < curve.size(); ++k)
    c.expect(curve[k].second >= curve[k - 1].second, fmt::format("curve decreases at k={}", curve[k].first));

  std::vector<int> split(50, 0);
  split.insert(split.end(), 50, 100);
  const double even = bipolarization_index(ScoreSample(split), 5);
  c.expect(even == 1.0, fmt::format("50/50 split gives {:.17g}", even));
  return c.done(fmt::format("B(5) {:.4f} (target {:.4f} +- 0.1), curve monotone, 50/50 split gives 1", b5, target));
}

Outcome hierarchy() {
  Checker c;
  BiasProfile p;
  p.base = 70;
  p.noise_sd = 5;
  p.needle_shift = {{NeedleType::Neg, 10}, {NeedleType::Ner, 5}, {NeedleType::Con, 0}};
  p.seed = 6;
  std::map<NeedleType, ScoreSample> samples;
  for (const auto n : kAllNeedles) samples.emplace(n, mock_grid(p, n, 9, 100).pooled());
  const auto h = needle_hierarchy(samples);
  const std::vector<NeedleType> expected{NeedleType::Neg, NeedleType::Ner, NeedleType::Con};
  c.expect(h.ranking == expected, "ranking is not neg, ner, con");
  double worst = 0.0;
  for (const auto& t : h.tests) {
    worst = std::max(worst, t.test.p_adjusted);
    c.expect(t.test.comparisons == 3, "tests are not corrected for three comparisons");
    c.expect(t.test.p_adjusted < 0.01, fmt::format("{} vs {} p_adj {:.3g}", to_string(t.a), to_string(t.b),
                                                   t.test.p_adjusted));
  }
  c.expect(h.tests.size() == 3, "expected three pairwise tests");
  return c.done(fmt::format("ranking neg > ner > con, largest adjusted p {:.3g}", worst));
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const auto cmd = fmt::format("\"{}\" {} > \"{}\" 2>&1", HAYSTACK_CLI, args, log.string());
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Store files with the timestamp field dropped from every record.
std::map<std::string, std::string> stripped_store(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path());
    std::string line, acc;
    while (std::getline(in, line)) {
      auto j = json::parse(line);
      j.erase("timestamp");
      acc += j.dump() + "\n";
    }
    out[e.path().filename().string()] = acc;
  }
  return out;
}

std::map<std::string, std::string> files_in(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

Outcome determinism() {
  Checker c;
  const auto root = testing::fresh_temp_dir("acceptance_e2e");
  testing::write_synthetic_corpus(root / "synthetic", 60, 7);
  std::vector<fs::path> outdirs;
  for (int run = 0; run < 2; ++run) {
    const auto outdir = root / fmt::format("run{}", run);
    const json config = {
        {"corpus", {{"inputs", {(root / "synthetic" / "raw").string()}}, {"format", "dir"}, {"corpus_id", "synthetic"}}},
        {"annotator", {{"kind", "builtin"}, {"gazetteer", (root / "synthetic" / "gazetteer.jsonl").string()}}},
        {"seed", 7},
        {"judges",
         {{{"name", "mock"},
           {"adapter", "mock"},
           {"mock",
            {{"base", 70}, {"early_bias", 8}, {"noise_sd", 6}, {"needle_shift", {{"neg", -10}, {"con", 4}}},
             {"hay_shift", {{"rand", -3}}}, {"bipolar_prob", 0.05}, {"k_low", 5}, {"seed", 3}}}}}},
        {"k_max", 3},
        {"stop", {{"n_min", 20}, {"w", 5}, {"t", 2.0}}},
        {"outdir", outdir.string()},
        {"workers", run == 0 ? 1 : 3}};
    const auto config_path = root / fmt::format("config{}.json", run);
    std::ofstream(config_path) << config.dump(2) << "\n";
    const auto cfg = "--config \"" + config_path.string() + "\"";
    for (const auto& step : {"clean " + cfg, "run " + cfg, "analyze " + cfg, "report " + cfg}) {
      const auto log = root / fmt::format("run{}.log", run);
      const int rc = run_cli(step, log);
      c.expect(rc == 0, fmt::format("`{}` exited {}: {}", step.substr(0, step.find(' ')), rc, slurp(log)));
      if (rc != 0) return c.done("");
    }
    outdirs.push_back(outdir);
  }

  const auto store_a = stripped_store(outdirs[0] / "trials");
  c.expect(store_a.size() == 6, fmt::format("expected 6 trial files, found {}", store_a.size()));
  c.expect(store_a == stripped_store(outdirs[1] / "trials"), "trial stores differ");
  std::size_t records = 0;
  for (const auto& [name, body] : store_a) records += static_cast<std::size_t>(std::count(body.begin(), body.end(), '\n'));

  const auto analysis_a = files_in(outdirs[0] / "analysis");
  const auto figures_a = files_in(outdirs[0] / "figures");
  c.expect(analysis_a == files_in(outdirs[1] / "analysis"), "analysis files differ");
  c.expect(figures_a == files_in(outdirs[1] / "figures"), "figure files differ");
  c.expect(slurp(outdirs[0] / "corpus" / "documents.jsonl") == slurp(outdirs[1] / "corpus" / "documents.jsonl"),
           "cleaned corpora differ");

  const auto report = json::parse(analysis_a.at("report.json"));
  c.expect(report["triples"].size() == 6, "report does not cover 6 triples");
  for (const auto& t : report["triples"]) {
    c.expect(t["cells"].size() == 16, "triple without 16 cells");
    c.expect(t["complete"] == true, "incomplete triple");
  }
  return c.done(fmt::format("2 runs (1 and 3 workers): {} records, {} analysis files, {} figure files identical",
                            records, analysis_a.size(), figures_a.size()));
}

Outcome grid_accounting() {
  Checker c;
  const auto root = testing::fresh_temp_dir("acceptance_dry_run");
  const auto log = root / "dry_run.log";
  const int rc = run_cli(fmt::format("run --config \"{}/default_grid.json\" --dry-run", HAYSTACK_CONFIG_DIR), log);
  const auto out = slurp(log);
  c.expect(rc == 0, fmt::format("dry run exited {}: {}", rc, out));
  c.expect(out.find("cells: 3000\n") != std::string::npos, "output lacks 'cells: 3000'");
  c.expect(out.find("positions per triple: 100\n") != std::string::npos, "output lacks 'positions per triple: 100'");
  c.expect(out.find("triples: 30\n") != std::string::npos, "output lacks 'triples: 30'");
  return c.done("3000 cells, 30 triples of 100 positions");
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    double limit_s;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria = {
      {"AC1", "perturbation correctness", 5, perturbations},
      {"AC2", "stopping criterion matches oracle", 10, stopping},
      {"AC3", "statistics match oracles", 30, statistics},
      {"AC4", "early positionality bias recovery", 60, epb_recovery},
      {"AC5", "bipolarization recovery", 30, bipolarization},
      {"AC6", "needle hierarchy recovery", 60, hierarchy},
      {"AC7", "end-to-end determinism", 120, determinism},
      {"AC8", "grid accounting", 10, grid_accounting},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.ok && s > cr.limit_s) o = {false, fmt::format("too slow ({:.2f} s)", s)};
    fmt::print("{} {} {}: {} [{:.2f} s, limit {:.0f} s]\n", cr.id, o.ok ? "PASS" : "FAIL", cr.name, o.detail, s,
               cr.limit_s);
    std::fflush(stdout);
    failed += o.ok ? 0 : 1;
  }
  fmt::print("{}/{} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
