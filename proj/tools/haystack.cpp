#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "haystack/analysis.hpp"
#include "haystack/config.hpp"
#include "haystack/report.hpp"
#include "haystack/runner.hpp"
#include "haystack/sidecar.hpp"

namespace fs = std::filesystem;
using namespace haystack;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitBudget = 3;
constexpr int kExitTransport = 4;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> judges, needles, hays;
  std::optional<int> k_max;
  std::optional<std::uint64_t> max_trials;
  std::optional<int> workers;
  std::string outdir;
};

void add_common(CLI::App* cmd, Overrides& o, bool config_required) {
  auto* opt = cmd->add_option("--config", o.config, "Run config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--outdir", o.outdir, "Output directory (overrides the config)");
}

void add_run_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Corpus and sampling seed");
  cmd->add_option("--judges", o.judges, "Subset of configured judges")->delimiter(',');
  cmd->add_option("--needles", o.needles, "Needle types (neg,con,ner)")->delimiter(',');
  cmd->add_option("--hays", o.hays, "Hay types (orig,rand)")->delimiter(',');
  cmd->add_option("--k-max", o.k_max, "Largest i and j");
  cmd->add_option("--max-trials", o.max_trials, "Request cap for the run");
  cmd->add_option("--workers", o.workers, "Triples run in parallel");
}

RunConfig resolve_config(const Overrides& o) {
  auto c = load_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (!o.judges.empty()) {
    std::vector<JudgeConfig> keep;
    for (const auto& name : o.judges) {
      const auto it = std::find_if(c.judges.begin(), c.judges.end(), [&](const auto& j) { return j.name == name; });
      if (it == c.judges.end()) throw ConfigError("judge " + name + " is not in the config");
      keep.push_back(*it);
    }
    c.judges = std::move(keep);
  }
  if (!o.needles.empty()) {
    c.needles.clear();
    for (const auto& n : o.needles) c.needles.push_back(needle_from_string(n));
  }
  if (!o.hays.empty()) {
    c.hays.clear();
    for (const auto& h : o.hays) c.hays.push_back(hay_from_string(h));
  }
  if (o.k_max) c.k_max = *o.k_max;
  if (o.max_trials) c.max_trials = *o.max_trials;
  if (o.workers) c.workers = *o.workers;
  if (!o.outdir.empty()) c.outdir = o.outdir;
  c.validate();
  return c;
}

fs::path outdir_of(const Overrides& o) {
  if (!o.outdir.empty()) return o.outdir;
  if (!o.config.empty()) return load_run_config(o.config).outdir;
  throw ConfigError("give --outdir or --config");
}

Corpus obtain_corpus(const RunConfig& c) {
  const auto dir = c.outdir / "corpus";
  if (fs::exists(dir / "manifest.json")) {
    auto corpus = load_corpus(dir);
    if (corpus.manifest().seed != c.seed)
      throw ConfigError(fmt::format("corpus in {} was built with seed {}, config says {}", dir.string(),
                                    corpus.manifest().seed, c.seed));
    return corpus;
  }
  auto corpus = build_corpus_from_config(c);
  save_corpus(corpus, dir);
  return corpus;
}

int cmd_clean(const Overrides& o) {
  auto c = resolve_config(o);
  auto corpus = build_corpus_from_config(c);
  save_corpus(corpus, c.outdir / "corpus");
  const auto& counts = corpus.manifest().counts;
  fmt::print("raw documents: {}\nkept: {}\n", counts.raw, counts.cleaned);
  for (const auto& [reason, n] : counts.rejected) fmt::print("rejected {}: {}\n", reason, n);
  fmt::print("corpus written to {}\n", (c.outdir / "corpus").string());
  return 0;
}

int cmd_run(const Overrides& o, bool dry_run, bool resume) {
  auto c = resolve_config(o);
  const auto positions = static_cast<std::size_t>((c.k_max + 1) * (c.k_max + 1));
  if (dry_run) {
    fmt::print("triples: {}\npositions per triple: {}\ncells: {}\n", c.judges.size() * c.needles.size() * c.hays.size(),
               positions, c.cells());
    for (const auto& j : c.judges)
      for (const auto n : c.needles)
        for (const auto h : c.hays) fmt::print("  {} {} {} x {} positions\n", j.name, to_string(n), to_string(h), positions);
    return 0;
  }

  {
    TrialStore probe(c.outdir / "trials");
    if (probe.has_records() && !resume) {
      fmt::print(stderr, "error: {} already holds trials; pass --resume to continue it\n", (c.outdir / "trials").string());
      return kExitUsage;
    }
  }
  const auto corpus = obtain_corpus(c);
  {
    std::ofstream out(c.outdir / "run_config.json");
    out << to_json(c).dump(2) << "\n";
  }
  auto annotator = make_annotator(c.annotator);
  Budget budget(c.max_trials, c.max_tokens);
  std::vector<std::unique_ptr<Judge>> judges;
  ExperimentPlan plan;
  for (const auto& jc : c.judges) {
    judges.push_back(make_judge(jc, &budget));
    plan.judges.push_back(judges.back().get());
  }
  plan.needles = c.needles;
  plan.hays = c.hays;
  plan.k_max = c.k_max;
  plan.stop = c.stop;
  RunOptions options{c.outdir, c.workers, c.hash(), {}};

  const auto summary = run_experiment(corpus, *annotator, plan, options, &budget);
  fmt::print("settings: {}\ntrials: {}\nscored: {}\ndiscards: {}\nfailed: {}\nrequests: {}\nestimated tokens: {}\n",
             summary.settings, summary.trials, summary.scored, summary.discards, summary.failed, summary.requests,
             summary.estimated_tokens);
  for (const auto& t : summary.triples)
    if (t.exhausted_cells > 0)
      fmt::print(stderr, "warning: {} has {} cells that ran out of documents\n", t.key.stem(), t.exhausted_cells);
  return 0;
}

int cmd_analyze(const Overrides& o, int pooled_comparisons, int pair_comparisons) {
  const auto dir = outdir_of(o);
  TrialStore store(dir / "trials");
  const auto grids = load_grids(store);
  if (grids.empty()) {
    fmt::print(stderr, "error: no scored trials under {}\n", (dir / "trials").string());
    return 1;
  }
  AnalysisOptions options;
  options.pooled_comparisons = pooled_comparisons;
  options.pair_comparisons = pair_comparisons;
  write_analysis(analyze(grids, options), dir / "analysis");
  fmt::print("analysis of {} triples written to {}\n", grids.size(), (dir / "analysis").string());
  return 0;
}

int cmd_report(const Overrides& o) {
  const auto dir = outdir_of(o);
  std::ifstream in(dir / "analysis" / "report.json");
  if (!in) {
    fmt::print(stderr, "error: run analyze first ({} missing)\n", (dir / "analysis" / "report.json").string());
    return 1;
  }
  const auto report = nlohmann::json::parse(in);
  const auto files = emit_figures(report, dir / "figures");
  fmt::print("{} files written to {}\n", files.size(), (dir / "figures").string());
  return 0;
}

int cmd_sidecar_check(const std::string& golden, const std::string& command, const std::string& socket,
                      int timeout_ms) {
  if (command.empty() == socket.empty()) throw ConfigError("give exactly one of --command or --socket");
  auto channel = socket.empty() ? sidecar::spawn_process(command) : sidecar::connect_unix_socket(socket);
  sidecar::Client client(std::move(channel), std::chrono::milliseconds(timeout_ms));
  const auto outcomes = sidecar::check_conformance(client, sidecar::load_golden(golden));
  std::size_t failed = 0;
  for (const auto& o : outcomes) {
    fmt::print("{} {}{}\n", o.ok ? "PASS" : "FAIL", o.id, o.detail.empty() ? "" : ": " + o.detail);
    failed += o.ok ? 0 : 1;
  }
  fmt::print("{}/{} pairs conform\n", outcomes.size() - failed, outcomes.size());
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Needle-in-a-haystack audit harness for LLM similarity judges"};
  app.require_subcommand(1);

  Overrides o;
  bool dry_run = false, resume = false;
  int pooled_comparisons = 0, pair_comparisons = 1;
  std::string golden, command, socket;
  int timeout_ms = 60000;

  auto* clean = app.add_subcommand("clean", "Clean and filter raw documents into a corpus");
  add_common(clean, o, true);
  add_run_flags(clean, o);

  auto* run = app.add_subcommand("run", "Run or resume the trial grid");
  add_common(run, o, true);
  add_run_flags(run, o);
  run->add_flag("--dry-run", dry_run, "Print the cell count and exit");
  run->add_flag("--resume", resume, "Continue an existing trial store");

  auto* analyze_cmd = app.add_subcommand("analyze", "Compute statistics from a trial store");
  add_common(analyze_cmd, o, false);
  analyze_cmd->add_option("--pooled-comparisons", pooled_comparisons,
                          "Bonferroni family size for first/second-half tests (0: number of triples)");
  analyze_cmd->add_option("--pair-comparisons", pair_comparisons, "Bonferroni family size for position-pair tests");

  auto* report = app.add_subcommand("report", "Render figures and tables from an analysis");
  add_common(report, o, false);

  auto* check = app.add_subcommand("sidecar-check", "Check an annotation sidecar against a golden file");
  check->add_option("--golden", golden, "Golden request/response file")->required();
  check->add_option("--command", command, "Command that starts the sidecar on stdio");
  check->add_option("--socket", socket, "Unix socket of a running sidecar");
  check->add_option("--timeout-ms", timeout_ms, "Per-response timeout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*clean) return cmd_clean(o);
    if (*run) return cmd_run(o, dry_run, resume);
    if (*analyze_cmd) return cmd_analyze(o, pooled_comparisons, pair_comparisons);
    if (*report) return cmd_report(o);
    if (*check) return cmd_sidecar_check(golden, command, socket, timeout_ms);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitUsage;
  } catch (const BudgetExceeded& e) {
    fmt::print(stderr, "budget exhausted: {} (rerun with --resume after raising the cap)\n", e.what());
    return kExitBudget;
  } catch (const TransportError& e) {
    fmt::print(stderr, "judge unreachable: {} (rerun with --resume)\n", e.what());
    return kExitTransport;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
