#pragma once

#include <filesystem>
#include <map>

#include <nlohmann/json.hpp>

#include "haystack/runner.hpp"
#include "haystack/stats.hpp"

namespace haystack {

/// Scored trials of every triple in a store, as position grids. k_max is the
/// largest i or j seen in the triple.
std::map<TripleKey, PositionGrid> load_grids(TrialStore& store);

struct AnalysisOptions {
  int pooled_comparisons = 0;  // 0: number of triples analyzed
  int pair_comparisons = 1;    // per-position-pair tests
  int bipolar_k_max = 25;
  double kde_step = 0.5;
};

/// The full report as one JSON document: per-triple EPB, tests, EMD grid,
/// cell densities and length curves; per-(judge, hay) needle hierarchy,
/// centered EMD, fingerprints and bipolarization.
nlohmann::json analyze(const std::map<TripleKey, PositionGrid>& grids, const AnalysisOptions& options = {});

/// Writes report.json plus one CSV per table into `dir`.
void write_analysis(const nlohmann::json& report, const std::filesystem::path& dir);

/// Fixed six-decimal rendering used in every CSV.
std::string format_number(double v);

}  // namespace haystack
