#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "haystack/types.hpp"

namespace haystack {

struct EmptySample : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct MissingCell : std::out_of_range {
  using std::out_of_range::out_of_range;
};
struct MissingSample : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// Multiset of integer scores in [0, 100]; never empty.
class ScoreSample {
 public:
  explicit ScoreSample(std::vector<int> values);

  const std::vector<int>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double mean() const;
  /// Unbiased standard deviation; 0 for a single value.
  double stddev() const;

 private:
  std::vector<int> values_;
};

ScoreSample pool(const std::vector<const ScoreSample*>& samples);

/// Score samples for every (i, j) of one (judge, needle, hay).
class PositionGrid {
 public:
  PositionGrid() = default;
  explicit PositionGrid(int k_max) : k_max_(k_max) {}

  int k_max() const { return k_max_; }
  void set(Position p, ScoreSample s);
  bool contains(Position p) const { return cells_.count(p) > 0; }
  const ScoreSample& at(Position p) const;  // throws MissingCell
  const std::map<Position, ScoreSample>& cells() const { return cells_; }
  PositionGrid transposed() const;
  ScoreSample pooled() const;

 private:
  int k_max_ = 0;
  std::map<Position, ScoreSample> cells_;
};

struct TestResult {
  double statistic = 0.0;  // KS D
  double p_value = 1.0;
  double p_adjusted = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  int comparisons = 1;
};

/// 1-Wasserstein distance between two empirical distributions of reals,
/// integrated exactly between CDF breakpoints.
double wasserstein1(std::vector<double> a, std::vector<double> b);

double emd(const ScoreSample& a, const ScoreSample& b);
double centered_emd(const ScoreSample& a, const ScoreSample& b);

double ks_statistic(const ScoreSample& a, const ScoreSample& b);
/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_sf(double lambda);
/// p from the asymptotic distribution at lambda = sqrt(n1 n2 / (n1 + n2)) D.
TestResult ks_test(const ScoreSample& a, const ScoreSample& b, int comparisons = 1);

struct KdeCurve {
  std::vector<double> x;
  std::vector<double> density;
  double bandwidth = 0.0;
  bool degenerate = false;  // all values equal: a single spike
  double spike_at = 0.0;
};

inline constexpr double kKdeMinBandwidth = 0.5;

double silverman_bandwidth(const ScoreSample& s);
/// Gaussian KDE on [0, 100]. A sample with one distinct value comes back as a
/// spike holding all the mass in the grid bin nearest to it.
KdeCurve kde(const ScoreSample& s, double grid_step = 0.5);

/// Mean over i > j of mean(grid[i, j]) - mean(grid[j, i]).
double early_positionality_bias(const PositionGrid& grid);

/// 4 P(X <= k) P(X >= 100 - k).
double bipolarization_index(const ScoreSample& s, int k);
std::vector<std::pair<int, double>> bipolarization_curve(const ScoreSample& s, int k_max = 25);

struct LengthPoint {
  int k = 0;  // document length i + j + 1
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double reference = 0.0;  // 100 (k - 1) / k
};

std::vector<LengthPoint> length_curves(const PositionGrid& grid);

/// Scores with i > j against scores with i < j.
TestResult pooled_half_test(const PositionGrid& grid, int comparisons = 1);
/// grid[i, j] against grid[j, i].
TestResult pair_test(const PositionGrid& grid, Position p, int comparisons = 1);

struct NeedleComparison {
  NeedleType a = NeedleType::None;
  NeedleType b = NeedleType::None;
  TestResult test;
};

struct NeedleHierarchy {
  std::vector<NeedleType> ranking;  // by mean, descending
  std::map<NeedleType, double> means;
  std::vector<NeedleComparison> tests;
};

/// Needs neg, con and ner; tests use three comparisons.
NeedleHierarchy needle_hierarchy(const std::map<NeedleType, ScoreSample>& samples);

}  // namespace haystack
