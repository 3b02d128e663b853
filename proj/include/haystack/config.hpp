#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "haystack/annotation.hpp"
#include "haystack/corpus.hpp"
#include "haystack/judge.hpp"
#include "haystack/runner.hpp"
#include "haystack/types.hpp"

namespace haystack {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct JudgeConfig {
  std::string name;
  std::string adapter = "mock";  // "mock" | "http"
  std::string model_version;
  BiasProfile mock;
  HttpJudgeConfig http;
};

struct CorpusConfig {
  std::vector<std::filesystem::path> inputs;
  std::string format = "dir";  // "dir" (one file per document) | "jsonl"
  std::string corpus_id = "corpus";
  FilterLimits limits;
};

struct AnnotatorConfig {
  std::string kind = "builtin";  // "builtin" | "sidecar"
  std::optional<std::filesystem::path> gazetteer;
  std::string command;    // sidecar: spawned with /bin/sh -c
  std::string socket;     // sidecar: unix socket path instead of command
  std::string model_tag;  // sidecar model name recorded in the annotator version
  int timeout_ms = 60000;
};

struct RunConfig {
  CorpusConfig corpus;
  AnnotatorConfig annotator;
  std::uint64_t seed = 0;
  std::vector<JudgeConfig> judges;
  std::vector<NeedleType> needles{std::begin(kAllNeedles), std::end(kAllNeedles)};
  std::vector<HayType> hays{std::begin(kAllHays), std::end(kAllHays)};
  int k_max = 9;
  StopConfig stop;
  std::optional<std::uint64_t> max_trials;
  std::optional<std::uint64_t> max_tokens;
  std::filesystem::path outdir = "run";
  int workers = 1;

  /// Throws ConfigError.
  void validate() const;
  /// Digest of every field that affects trial content (not paths, budget or
  /// worker count). Folded into each record's prompt_hash.
  std::uint64_t hash() const;
  std::size_t cells() const { return cell_count(judges.size(), needles.size(), hays.size(), k_max); }
};

/// Relative paths inside the file resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

BiasProfile parse_bias_profile(const nlohmann::json& j);
nlohmann::json to_json(const BiasProfile& profile);

std::unique_ptr<Annotator> make_annotator(const AnnotatorConfig& config);
std::unique_ptr<Judge> make_judge(const JudgeConfig& config, Budget* budget);

/// Loads the raw inputs and cleans them into a corpus.
Corpus build_corpus_from_config(const RunConfig& config);

}  // namespace haystack
