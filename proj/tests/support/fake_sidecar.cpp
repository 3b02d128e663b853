// Stand-in annotation sidecar for tests. Speaks the line protocol on stdio,
// answering from a golden file when the request text is known and from the
// built-in annotator otherwise. Flags make it misbehave on purpose.
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "haystack/annotation.hpp"
#include "haystack/sidecar.hpp"
#include "haystack/text.hpp"

using namespace haystack;
using nlohmann::json;

namespace {

std::string builtin_response(const std::string& id, const std::string& input, const Gazetteer& gazetteer) {
  sidecar::Response resp;
  resp.id = id;
  const auto sentences = SentenceSplitter{}.split(text::normalize_whitespace(input));
  const auto cps = text::decode_utf8(input);
  std::size_t cursor = 0;
  for (const auto& s : sentences) {
    const auto scp = text::decode_utf8(s);
    const auto at = std::u32string_view(cps).find(scp, cursor);
    if (at == std::u32string_view::npos) continue;  // whitespace differs; skip
    resp.sentences.push_back({at, at + scp.size()});
    auto ann = annotate_builtin(s, gazetteer);
    ann.sentence_index = resp.annotations.size();
    for (const auto& e : ann.entities) resp.raw_entity_labels.emplace_back(to_string(e.label));
    resp.annotations.push_back(std::move(ann));
    cursor = at + scp.size();
  }
  return sidecar::encode_response(resp);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fake annotation sidecar"};
  std::string golden_path, gazetteer_path;
  bool emit_golden = false, corrupt = false, silent = false;
  std::size_t batch = 1;
  int delay_ms = 0;
  std::string error_id;
  app.add_option("--golden", golden_path);
  app.add_option("--gazetteer", gazetteer_path);
  app.add_flag("--emit-golden", emit_golden, "Write {request, response} pairs instead of responses");
  app.add_option("--reverse-batch", batch, "Collect this many requests and answer them in reverse");
  app.add_flag("--corrupt-offsets", corrupt);
  app.add_flag("--silent", silent);
  app.add_option("--delay-ms", delay_ms);
  app.add_option("--error-id", error_id);
  CLI11_PARSE(app, argc, argv);

  Gazetteer gazetteer;
  if (!gazetteer_path.empty()) gazetteer = Gazetteer::load(gazetteer_path);
  std::map<std::string, json> golden;  // text -> response
  if (!golden_path.empty()) {
    std::ifstream in(golden_path);
    std::string line;
    while (std::getline(in, line))
      if (!text::trim(line).empty()) {
        const auto rec = json::parse(line);
        golden[rec["request"]["text"].get<std::string>()] = rec["response"];
      }
  }

  std::vector<std::string> pending;
  std::string line;
  while (std::getline(std::cin, line)) {
    if (silent) continue;
    const auto req = json::parse(line);
    const auto id = req.at("id").get<std::string>();
    const auto input = req.at("text").get<std::string>();
    std::string out;
    if (id == error_id) {
      out = json{{"id", id}, {"error", "requested failure"}}.dump();
    } else if (const auto it = golden.find(input); it != golden.end()) {
      auto resp = it->second;
      resp["id"] = id;
      out = resp.dump();
    } else {
      out = builtin_response(id, input, gazetteer);
    }
    if (corrupt) {
      auto resp = json::parse(out);
      if (resp.contains("entities") && !resp["entities"].empty()) resp["entities"][0][2] = 100000;
      else if (resp.contains("tokens") && !resp["tokens"].empty()) resp["tokens"][0][2] = 100000;
      out = resp.dump();
    }
    if (emit_golden) out = json{{"request", req}, {"response", json::parse(out)}}.dump();
    pending.push_back(out);
    if (pending.size() >= batch) {
      if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      for (auto r = pending.rbegin(); r != pending.rend(); ++r) std::cout << *r << "\n";
      std::cout.flush();
      pending.clear();
    }
  }
  for (auto r = pending.rbegin(); r != pending.rend(); ++r) std::cout << *r << "\n";
  return 0;
}
