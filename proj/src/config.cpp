#include "haystack/config.hpp"

#include <fstream>
#include <regex>
#include <set>

#include "haystack/random.hpp"
#include "haystack/sidecar.hpp"

namespace haystack {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError(std::string(where) + ": unknown key \"" + key + "\"");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for \"") + key + "\": " + e.what());
  }
}

std::optional<std::uint64_t> get_cap(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return get_or<std::uint64_t>(j, key, 0);
}

HttpJudgeConfig parse_http(const json& j) {
  check_keys(j, "judge.http",
             {"api_style", "endpoint", "path", "model", "api_key_env", "auth_header", "timeout_ms", "max_retries",
              "backoff_base_ms", "backoff_max_ms", "reasks", "max_tokens"});
  HttpJudgeConfig c;
  c.api_style = get_or<std::string>(j, "api_style", c.api_style);
  c.endpoint = get_or<std::string>(j, "endpoint", "");
  c.path = get_or<std::string>(j, "path", "");
  c.model = get_or<std::string>(j, "model", "");
  c.api_key_env = get_or<std::string>(j, "api_key_env", "");
  c.auth_header = get_or<std::string>(j, "auth_header", "");
  c.timeout = std::chrono::milliseconds(get_or<long long>(j, "timeout_ms", c.timeout.count()));
  c.retry.max_retries = get_or<int>(j, "max_retries", c.retry.max_retries);
  c.retry.backoff_base = std::chrono::milliseconds(get_or<long long>(j, "backoff_base_ms", c.retry.backoff_base.count()));
  c.retry.backoff_max = std::chrono::milliseconds(get_or<long long>(j, "backoff_max_ms", c.retry.backoff_max.count()));
  c.reasks = get_or<int>(j, "reasks", c.reasks);
  c.max_tokens = get_or<int>(j, "max_tokens", c.max_tokens);
  return c;
}

json http_to_json(const HttpJudgeConfig& c) {
  return {{"api_style", c.api_style},
          {"endpoint", c.endpoint},
          {"path", c.path},
          {"model", c.model},
          {"api_key_env", c.api_key_env},
          {"auth_header", c.auth_header},
          {"timeout_ms", c.timeout.count()},
          {"max_retries", c.retry.max_retries},
          {"backoff_base_ms", c.retry.backoff_base.count()},
          {"backoff_max_ms", c.retry.backoff_max.count()},
          {"reasks", c.reasks},
          {"max_tokens", c.max_tokens}};
}

json judge_to_json(const JudgeConfig& c) {
  json j = {{"name", c.name}, {"adapter", c.adapter}, {"model_version", c.model_version}};
  if (c.adapter == "mock") j["mock"] = to_json(c.mock);
  else j["http"] = http_to_json(c.http);
  return j;
}

}  // namespace

BiasProfile parse_bias_profile(const json& j) {
  check_keys(j, "judge.mock",
             {"base", "early_bias", "needle_shift", "hay_shift", "bipolar_prob", "k_low", "noise_sd", "seed"});
  BiasProfile p;
  p.base = get_or<double>(j, "base", p.base);
  p.early_bias = get_or<double>(j, "early_bias", p.early_bias);
  if (j.contains("needle_shift"))
    for (const auto& [k, v] : j["needle_shift"].items()) p.needle_shift[needle_from_string(k)] = v.get<double>();
  if (j.contains("hay_shift"))
    for (const auto& [k, v] : j["hay_shift"].items()) p.hay_shift[hay_from_string(k)] = v.get<double>();
  p.bipolar_prob = get_or<double>(j, "bipolar_prob", p.bipolar_prob);
  p.k_low = get_or<int>(j, "k_low", p.k_low);
  p.noise_sd = get_or<double>(j, "noise_sd", p.noise_sd);
  p.seed = get_or<std::uint64_t>(j, "seed", p.seed);
  if (p.bipolar_prob < 0.0 || p.bipolar_prob > 1.0) throw ConfigError("mock bipolar_prob must be in [0, 1]");
  if (p.k_low < 0 || p.k_low > 49) throw ConfigError("mock k_low must be in [0, 49]");
  if (p.noise_sd < 0.0) throw ConfigError("mock noise_sd must be >= 0");
  return p;
}

json to_json(const BiasProfile& p) {
  json needle = json::object(), hay = json::object();
  for (const auto& [k, v] : p.needle_shift) needle[std::string(to_string(k))] = v;
  for (const auto& [k, v] : p.hay_shift) hay[std::string(to_string(k))] = v;
  return {{"base", p.base},         {"early_bias", p.early_bias}, {"needle_shift", needle},
          {"hay_shift", hay},       {"bipolar_prob", p.bipolar_prob}, {"k_low", p.k_low},
          {"noise_sd", p.noise_sd}, {"seed", p.seed}};
}

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
  try {
    check_keys(j, "config",
               {"corpus", "annotator", "seed", "judges", "needles", "hays", "k_max", "stop", "budget", "outdir",
                "workers"});
    RunConfig c;
    if (j.contains("corpus")) {
      const auto& cj = j["corpus"];
      check_keys(cj, "corpus",
                 {"inputs", "format", "corpus_id", "min_sentences", "min_chars_per_sentence", "max_chars_per_sentence"});
      for (const auto& p : get_or<std::vector<std::string>>(cj, "inputs", {}))
        c.corpus.inputs.push_back(resolve(base_dir, p));
      c.corpus.format = get_or<std::string>(cj, "format", c.corpus.format);
      c.corpus.corpus_id = get_or<std::string>(cj, "corpus_id", c.corpus.corpus_id);
      auto& lim = c.corpus.limits;
      lim.min_sentences = get_or<std::size_t>(cj, "min_sentences", lim.min_sentences);
      lim.min_chars_per_sentence = get_or<std::size_t>(cj, "min_chars_per_sentence", lim.min_chars_per_sentence);
      lim.max_chars_per_sentence = get_or<std::size_t>(cj, "max_chars_per_sentence", lim.max_chars_per_sentence);
    }
    if (j.contains("annotator")) {
      const auto& aj = j["annotator"];
      check_keys(aj, "annotator", {"kind", "gazetteer", "command", "socket", "model_tag", "timeout_ms"});
      c.annotator.kind = get_or<std::string>(aj, "kind", c.annotator.kind);
      if (aj.contains("gazetteer") && !aj["gazetteer"].is_null())
        c.annotator.gazetteer = resolve(base_dir, aj["gazetteer"].get<std::string>());
      c.annotator.command = get_or<std::string>(aj, "command", "");
      c.annotator.socket = get_or<std::string>(aj, "socket", "");
      c.annotator.model_tag = get_or<std::string>(aj, "model_tag", "");
      c.annotator.timeout_ms = get_or<int>(aj, "timeout_ms", c.annotator.timeout_ms);
    }
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    if (j.contains("judges")) {
      for (const auto& jj : j["judges"]) {
        check_keys(jj, "judge", {"name", "adapter", "model_version", "mock", "http"});
        JudgeConfig judge;
        judge.name = get_or<std::string>(jj, "name", "");
        judge.adapter = get_or<std::string>(jj, "adapter", judge.adapter);
        if (jj.contains("mock")) judge.mock = parse_bias_profile(jj["mock"]);
        if (jj.contains("http")) judge.http = parse_http(jj["http"]);
        judge.model_version = get_or<std::string>(jj, "model_version", judge.adapter == "http" ? judge.http.model : "mock");
        c.judges.push_back(std::move(judge));
      }
    }
    if (j.contains("needles")) {
      c.needles.clear();
      for (const auto& n : j["needles"]) c.needles.push_back(needle_from_string(n.get<std::string>()));
    }
    if (j.contains("hays")) {
      c.hays.clear();
      for (const auto& h : j["hays"]) c.hays.push_back(hay_from_string(h.get<std::string>()));
    }
    c.k_max = get_or<int>(j, "k_max", c.k_max);
    if (j.contains("stop")) {
      const auto& sj = j["stop"];
      check_keys(sj, "stop", {"n_min", "w", "t"});
      c.stop.n_min = get_or<int>(sj, "n_min", c.stop.n_min);
      c.stop.w = get_or<int>(sj, "w", c.stop.w);
      c.stop.t = get_or<double>(sj, "t", c.stop.t);
    }
    if (j.contains("budget")) {
      const auto& bj = j["budget"];
      check_keys(bj, "budget", {"max_trials", "max_tokens"});
      c.max_trials = get_cap(bj, "max_trials");
      c.max_tokens = get_cap(bj, "max_tokens");
    }
    if (j.contains("outdir")) c.outdir = resolve(base_dir, j["outdir"].get<std::string>());
    c.workers = get_or<int>(j, "workers", c.workers);
    c.validate();
    return c;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

void RunConfig::validate() const {
  if (judges.empty()) throw ConfigError("config lists no judges");
  if (needles.empty()) throw ConfigError("config lists no needles");
  if (hays.empty()) throw ConfigError("config lists no hays");
  if (k_max < 0 || k_max > 50) throw ConfigError("k_max must be in [0, 50]");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  try {
    stop.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (const auto n : needles)
    if (n == NeedleType::None) throw ConfigError("needle \"none\" is the baseline, not a treatment");
  if (std::set<NeedleType>(needles.begin(), needles.end()).size() != needles.size())
    throw ConfigError("duplicate needle");
  if (std::set<HayType>(hays.begin(), hays.end()).size() != hays.size()) throw ConfigError("duplicate hay");

  static const std::regex name_re("[A-Za-z0-9][A-Za-z0-9._-]*");
  std::set<std::string> names;
  for (const auto& judge : judges) {
    if (!std::regex_match(judge.name, name_re)) throw ConfigError("bad judge name \"" + judge.name + "\"");
    if (judge.name.find("__") != std::string::npos) throw ConfigError("judge names may not contain \"__\"");
    if (!names.insert(judge.name).second) throw ConfigError("duplicate judge " + judge.name);
    if (judge.adapter == "http") {
      if (judge.http.endpoint.empty()) throw ConfigError("judge " + judge.name + ": http endpoint missing");
      if (judge.http.model.empty()) throw ConfigError("judge " + judge.name + ": http model missing");
      if (judge.http.api_style != "openai" && judge.http.api_style != "anthropic")
        throw ConfigError("judge " + judge.name + ": api_style must be openai or anthropic");
    } else if (judge.adapter != "mock") {
      throw ConfigError("judge " + judge.name + ": unknown adapter " + judge.adapter);
    }
  }
  if (corpus.format != "dir" && corpus.format != "jsonl") throw ConfigError("corpus format must be dir or jsonl");
  if (annotator.kind == "sidecar") {
    if (annotator.command.empty() == annotator.socket.empty())
      throw ConfigError("sidecar annotator needs exactly one of command or socket");
  } else if (annotator.kind != "builtin") {
    throw ConfigError("unknown annotator kind " + annotator.kind);
  }
}

std::uint64_t RunConfig::hash() const {
  json j = to_json(*this);
  j.erase("outdir");
  j.erase("workers");
  j.erase("budget");
  j["corpus"].erase("inputs");
  j["annotator"].erase("gazetteer");
  for (auto& judge : j["judges"])
    if (judge.contains("http")) {
      for (const auto* k : {"endpoint", "api_key_env", "timeout_ms", "max_retries", "backoff_base_ms", "backoff_max_ms"})
        judge["http"].erase(k);
    }
  return fnv1a64(j.dump());
}

json to_json(const RunConfig& c) {
  json inputs = json::array();
  for (const auto& p : c.corpus.inputs) inputs.push_back(p.string());
  json judges = json::array();
  for (const auto& judge : c.judges) judges.push_back(judge_to_json(judge));
  json needles = json::array(), hays = json::array();
  for (const auto n : c.needles) needles.push_back(to_string(n));
  for (const auto h : c.hays) hays.push_back(to_string(h));
  json annotator = {{"kind", c.annotator.kind},
                    {"gazetteer", c.annotator.gazetteer ? json(c.annotator.gazetteer->string()) : json(nullptr)},
                    {"command", c.annotator.command},
                    {"socket", c.annotator.socket},
                    {"model_tag", c.annotator.model_tag},
                    {"timeout_ms", c.annotator.timeout_ms}};
  return {{"corpus",
           {{"inputs", inputs},
            {"format", c.corpus.format},
            {"corpus_id", c.corpus.corpus_id},
            {"min_sentences", c.corpus.limits.min_sentences},
            {"min_chars_per_sentence", c.corpus.limits.min_chars_per_sentence},
            {"max_chars_per_sentence", c.corpus.limits.max_chars_per_sentence}}},
          {"annotator", annotator},
          {"seed", c.seed},
          {"judges", judges},
          {"needles", needles},
          {"hays", hays},
          {"k_max", c.k_max},
          {"stop", {{"n_min", c.stop.n_min}, {"w", c.stop.w}, {"t", c.stop.t}}},
          {"budget",
           {{"max_trials", c.max_trials ? json(*c.max_trials) : json(nullptr)},
            {"max_tokens", c.max_tokens ? json(*c.max_tokens) : json(nullptr)}}},
          {"outdir", c.outdir.string()},
          {"workers", c.workers}};
}

std::unique_ptr<Annotator> make_annotator(const AnnotatorConfig& config) {
  if (config.kind == "builtin") {
    Gazetteer gazetteer;
    if (config.gazetteer) gazetteer = Gazetteer::load(*config.gazetteer);
    return std::make_unique<BuiltinAnnotator>(std::move(gazetteer));
  }
  auto channel = config.socket.empty() ? sidecar::spawn_process(config.command)
                                       : sidecar::connect_unix_socket(config.socket);
  auto client = std::make_shared<sidecar::Client>(std::move(channel), std::chrono::milliseconds(config.timeout_ms));
  return std::make_unique<sidecar::SidecarAnnotator>(std::move(client), config.model_tag);
}

std::unique_ptr<Judge> make_judge(const JudgeConfig& config, Budget* budget) {
  JudgeId id{config.name, config.adapter, config.model_version};
  if (config.adapter == "mock") return std::make_unique<MockJudge>(std::move(id), config.mock, budget);
  return std::make_unique<HttpJudge>(std::move(id), config.http, make_httplib_transport(config.http.endpoint), budget);
}

Corpus build_corpus_from_config(const RunConfig& config) {
  if (config.corpus.inputs.empty()) throw ConfigError("config lists no corpus inputs");
  std::vector<RawDocument> raws;
  for (const auto& input : config.corpus.inputs) {
    auto docs = config.corpus.format == "jsonl" ? load_raw_jsonl(input) : load_raw_directory(input);
    raws.insert(raws.end(), std::make_move_iterator(docs.begin()), std::make_move_iterator(docs.end()));
  }
  return build_corpus(raws, config.seed, config.corpus.corpus_id, SentenceSplitter{}, config.corpus.limits);
}

}  // namespace haystack
