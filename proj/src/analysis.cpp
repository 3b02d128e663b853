#include "haystack/analysis.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

namespace haystack {

using nlohmann::json;
namespace fs = std::filesystem;

std::map<TripleKey, PositionGrid> load_grids(TrialStore& store) {
  std::map<TripleKey, PositionGrid> out;
  for (const auto& key : store.triples()) {
    const auto cells = store.replay(key);
    int k_max = 0;
    for (const auto& [pos, records] : cells) k_max = std::max({k_max, pos.i, pos.j});
    PositionGrid grid(k_max);
    for (const auto& [pos, records] : cells) {
      std::vector<int> scores;
      for (const auto& r : records)
        if (r.status == TrialStatus::Scored) scores.push_back(*r.score);
      if (!scores.empty()) grid.set(pos, ScoreSample(std::move(scores)));
    }
    if (!grid.cells().empty()) out.emplace(key, std::move(grid));
  }
  return out;
}

std::string format_number(double v) {
  if (v == 0.0) v = 0.0;  // no "-0.000000"
  auto s = fmt::format("{:.6f}", v);
  return s == "-0.000000" ? "0.000000" : s;
}

namespace {

json test_json(const TestResult& t) {
  return {{"D", t.statistic}, {"p", t.p_value},   {"p_adjusted", t.p_adjusted},
          {"n1", t.n1},       {"n2", t.n2},       {"comparisons", t.comparisons}};
}

json kde_json(const KdeCurve& c) {
  return {{"bandwidth", c.bandwidth}, {"degenerate", c.degenerate}, {"spike_at", c.spike_at}, {"density", c.density}};
}

json triple_header(const TripleKey& key) {
  return {{"judge", key.judge}, {"needle", to_string(key.needle)}, {"hay", to_string(key.hay)}};
}

bool complete(const PositionGrid& grid) {
  return grid.cells().size() == static_cast<std::size_t>((grid.k_max() + 1) * (grid.k_max() + 1));
}

}  // namespace

json analyze(const std::map<TripleKey, PositionGrid>& grids, const AnalysisOptions& options) {
  const int pooled_comparisons =
      options.pooled_comparisons > 0 ? options.pooled_comparisons : std::max<int>(1, static_cast<int>(grids.size()));

  json triples = json::array();
  std::map<std::pair<std::string, HayType>, std::map<NeedleType, ScoreSample>> by_judge_hay;
  std::vector<double> kde_x;

  for (const auto& [key, grid] : grids) {
    json t = triple_header(key);
    t["k_max"] = grid.k_max();
    t["complete"] = complete(grid);
    std::size_t depth_min = SIZE_MAX, depth_max = 0;
    json cells = json::array();
    for (const auto& [pos, sample] : grid.cells()) {
      depth_min = std::min(depth_min, sample.size());
      depth_max = std::max(depth_max, sample.size());
      const auto curve = kde(sample, options.kde_step);
      if (kde_x.empty()) kde_x = curve.x;
      cells.push_back({{"i", pos.i},
                       {"j", pos.j},
                       {"n", sample.size()},
                       {"mean", sample.mean()},
                       {"std", sample.stddev()},
                       {"kde", kde_json(curve)}});
    }
    t["depth_min"] = depth_min;
    t["depth_max"] = depth_max;
    t["cells"] = cells;
    by_judge_hay[{key.judge, key.hay}].emplace(key.needle, grid.pooled());

    if (complete(grid)) {
      t["epb"] = early_positionality_bias(grid);
      json emd_rows = json::array(), pair_rows = json::array();
      for (int i = 0; i <= grid.k_max(); ++i)
        for (int j = i + 1; j <= grid.k_max(); ++j)
          emd_rows.push_back({{"i", i}, {"j", j}, {"emd", emd(grid.at({i, j}), grid.at({j, i}))}});
      for (int i = 0; i <= grid.k_max(); ++i)
        for (int j = 0; j < i; ++j) {
          auto row = test_json(pair_test(grid, {i, j}, options.pair_comparisons));
          row["i"] = i;
          row["j"] = j;
          pair_rows.push_back(row);
        }
      t["emd_grid"] = emd_rows;
      t["pair_tests"] = pair_rows;
      t["pooled_half_test"] = grid.k_max() > 0 ? test_json(pooled_half_test(grid, pooled_comparisons)) : json(nullptr);
      json length = json::array();
      for (const auto& p : length_curves(grid))
        length.push_back({{"k", p.k}, {"n", p.n}, {"mean", p.mean}, {"std", p.stddev}, {"reference", p.reference}});
      t["length_curve"] = length;
    }
    triples.push_back(t);
  }

  json needle_tests = json::array(), centered = json::array(), fingerprints = json::array();
  std::map<std::string, std::map<HayType, std::vector<const ScoreSample*>>> by_judge;
  for (const auto& [jh, samples] : by_judge_hay) {
    const auto& [judge, hay] = jh;
    json head = {{"judge", judge}, {"hay", to_string(hay)}};
    for (const auto& [needle, sample] : samples) {
      auto row = head;
      row["needle"] = to_string(needle);
      row["n"] = sample.size();
      row["mean"] = sample.mean();
      row["std"] = sample.stddev();
      row["kde"] = kde_json(kde(sample, options.kde_step));
      fingerprints.push_back(row);
      by_judge[judge][hay].push_back(&sample);
    }
    for (auto a = samples.begin(); a != samples.end(); ++a)
      for (auto b = std::next(a); b != samples.end(); ++b) {
        auto row = head;
        row["a"] = to_string(a->first);
        row["b"] = to_string(b->first);
        row["emd"] = emd(a->second, b->second);
        row["centered_emd"] = centered_emd(a->second, b->second);
        row["mean_shift"] = a->second.mean() - b->second.mean();
        centered.push_back(row);
      }
    if (samples.size() == 3) {
      const auto h = needle_hierarchy(samples);
      auto row = head;
      row["ranking"] = json::array();
      for (const auto n : h.ranking) row["ranking"].push_back(to_string(n));
      row["means"] = json::object();
      for (const auto& [n, m] : h.means) row["means"][std::string(to_string(n))] = m;
      row["tests"] = json::array();
      for (const auto& c : h.tests) {
        auto tj = test_json(c.test);
        tj["a"] = to_string(c.a);
        tj["b"] = to_string(c.b);
        row["tests"].push_back(tj);
      }
      needle_tests.push_back(row);
    }
  }

  json bipolar = json::array();
  for (const auto& [judge, hays] : by_judge)
    for (const auto& [hay, samples] : hays) {
      const auto pooled = pool(samples);
      json curve = json::array();
      for (const auto& [k, b] : bipolarization_curve(pooled, options.bipolar_k_max)) curve.push_back({{"k", k}, {"B", b}});
      bipolar.push_back({{"judge", judge},
                         {"hay", to_string(hay)},
                         {"n", pooled.size()},
                         {"curve", curve},
                         {"kde", kde_json(kde(pooled, options.kde_step))}});
    }

  if (kde_x.empty()) kde_x = kde(ScoreSample({0, 100}), options.kde_step).x;
  return {{"meta",
           {{"triples", grids.size()},
            {"pooled_comparisons", pooled_comparisons},
            {"pair_comparisons", options.pair_comparisons},
            {"bipolar_k_max", options.bipolar_k_max},
            {"kde_step", options.kde_step},
            {"kde_kernel", "gaussian"},
            {"kde_bandwidth", "silverman, floor 0.5"},
            {"kde_x", kde_x}}},
          {"triples", triples},
          {"needle_tests", needle_tests},
          {"centered_emd", centered},
          {"fingerprints", fingerprints},
          {"bipolarization", bipolar}};
}

namespace {

class Csv {
 public:
  Csv(const fs::path& path, std::initializer_list<std::string_view> header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    bool first = true;
    for (const auto h : header) {
      out_ << (first ? "" : ",") << h;
      first = false;
    }
    out_ << "\n";
  }

  Csv& field(const std::string& s) {
    sep();
    if (s.find_first_of(",\"\n") != std::string::npos) {
      out_ << '"';
      for (const char c : s) out_ << (c == '"' ? "\"\"" : std::string(1, c));
      out_ << '"';
    } else {
      out_ << s;
    }
    return *this;
  }
  Csv& num(double v) {
    sep();
    out_ << format_number(v);
    return *this;
  }
  Csv& integer(long long v) {
    sep();
    out_ << v;
    return *this;
  }
  void end() {
    out_ << "\n";
    fresh_ = true;
  }

 private:
  void sep() {
    if (!fresh_) out_ << ",";
    fresh_ = false;
  }
  std::ofstream out_;
  bool fresh_ = true;
};

void test_fields(Csv& csv, const json& t) {
  csv.num(t["D"]).num(t["p"]).num(t["p_adjusted"]).integer(t["n1"]).integer(t["n2"]).integer(t["comparisons"]);
}

}  // namespace

void write_analysis(const json& report, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "report.json");
    out << report.dump(1) << "\n";
  }
  const auto& x = report["meta"]["kde_x"];

  Csv epb(dir / "epb.csv", {"judge", "needle", "hay", "epb"});
  Csv pooled(dir / "pooled_half_tests.csv", {"judge", "needle", "hay", "D", "p", "p_adjusted", "n1", "n2", "comparisons"});
  Csv pairs(dir / "position_pair_tests.csv",
            {"judge", "needle", "hay", "i", "j", "D", "p", "p_adjusted", "n1", "n2", "comparisons"});
  Csv emd_grid(dir / "emd_grid.csv", {"judge", "needle", "hay", "i", "j", "emd"});
  Csv cells(dir / "cells.csv", {"judge", "needle", "hay", "i", "j", "n", "mean", "std", "bandwidth"});
  Csv cell_kde(dir / "cell_kde.csv", {"judge", "needle", "hay", "i", "j", "x", "density"});
  Csv length(dir / "length_curves.csv", {"judge", "needle", "hay", "k", "n", "mean", "std", "reference"});

  for (const auto& t : report["triples"]) {
    const std::string judge = t["judge"], needle = t["needle"], hay = t["hay"];
    const auto head = [&](Csv& c) -> Csv& { return c.field(judge).field(needle).field(hay); };
    for (const auto& c : t["cells"]) {
      head(cells).integer(c["i"]).integer(c["j"]).integer(c["n"]).num(c["mean"]).num(c["std"]).num(c["kde"]["bandwidth"]);
      cells.end();
      const auto& d = c["kde"]["density"];
      for (std::size_t k = 0; k < d.size(); ++k) {
        head(cell_kde).integer(c["i"]).integer(c["j"]).num(x[k]).num(d[k]);
        cell_kde.end();
      }
    }
    if (!t.contains("epb")) continue;
    head(epb).num(t["epb"]);
    epb.end();
    if (!t["pooled_half_test"].is_null()) {
      head(pooled);
      test_fields(pooled, t["pooled_half_test"]);
      pooled.end();
    }
    for (const auto& p : t["pair_tests"]) {
      head(pairs).integer(p["i"]).integer(p["j"]);
      test_fields(pairs, p);
      pairs.end();
    }
    for (const auto& e : t["emd_grid"]) {
      head(emd_grid).integer(e["i"]).integer(e["j"]).num(e["emd"]);
      emd_grid.end();
    }
    for (const auto& p : t["length_curve"]) {
      head(length).integer(p["k"]).integer(p["n"]).num(p["mean"]).num(p["std"]).num(p["reference"]);
      length.end();
    }
  }

  Csv needles(dir / "needle_tests.csv",
              {"judge", "hay", "ranking", "a", "b", "D", "p", "p_adjusted", "n1", "n2", "comparisons"});
  for (const auto& row : report["needle_tests"]) {
    std::string ranking;
    for (const auto& n : row["ranking"]) ranking += (ranking.empty() ? "" : ">") + n.get<std::string>();
    for (const auto& t : row["tests"]) {
      needles.field(row["judge"]).field(row["hay"]).field(ranking).field(t["a"]).field(t["b"]);
      test_fields(needles, t);
      needles.end();
    }
  }

  Csv centered(dir / "centered_emd.csv", {"judge", "hay", "a", "b", "emd", "centered_emd", "mean_shift"});
  for (const auto& row : report["centered_emd"]) {
    centered.field(row["judge"]).field(row["hay"]).field(row["a"]).field(row["b"]);
    centered.num(row["emd"]).num(row["centered_emd"]).num(row["mean_shift"]);
    centered.end();
  }

  Csv fingerprints(dir / "fingerprints.csv", {"judge", "hay", "needle", "x", "density"});
  for (const auto& row : report["fingerprints"]) {
    const auto& d = row["kde"]["density"];
    for (std::size_t k = 0; k < d.size(); ++k) {
      fingerprints.field(row["judge"]).field(row["hay"]).field(row["needle"]).num(x[k]).num(d[k]);
      fingerprints.end();
    }
  }

  Csv bipolar(dir / "bipolarization.csv", {"judge", "hay", "k", "B"});
  Csv bipolar_kde(dir / "bipolarization_kde.csv", {"judge", "hay", "x", "density"});
  for (const auto& row : report["bipolarization"]) {
    for (const auto& p : row["curve"]) {
      bipolar.field(row["judge"]).field(row["hay"]).integer(p["k"]).num(p["B"]);
      bipolar.end();
    }
    const auto& d = row["kde"]["density"];
    for (std::size_t k = 0; k < d.size(); ++k) {
      bipolar_kde.field(row["judge"]).field(row["hay"]).num(x[k]).num(d[k]);
      bipolar_kde.end();
    }
  }
}

}  // namespace haystack
