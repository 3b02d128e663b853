#include "haystack/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace haystack {

ScoreSample::ScoreSample(std::vector<int> values) : values_(std::move(values)) {
  if (values_.empty()) throw EmptySample("score sample is empty");
  for (const int v : values_)
    if (v < 0 || v > 100) throw std::invalid_argument("score outside [0, 100]: " + std::to_string(v));
}

double ScoreSample::mean() const {
  const long long sum = std::accumulate(values_.begin(), values_.end(), 0LL);
  return static_cast<double>(sum) / static_cast<double>(values_.size());
}

double ScoreSample::stddev() const {
  if (values_.size() < 2) return 0.0;
  const double m = mean();
  double ss = 0.0;
  for (const int v : values_) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values_.size() - 1));
}

ScoreSample pool(const std::vector<const ScoreSample*>& samples) {
  std::vector<int> all;
  for (const auto* s : samples) all.insert(all.end(), s->values().begin(), s->values().end());
  return ScoreSample(std::move(all));
}

void PositionGrid::set(Position p, ScoreSample s) {
  if (p.i < 0 || p.j < 0 || p.i > k_max_ || p.j > k_max_)
    throw std::out_of_range("position outside grid");
  cells_.insert_or_assign(p, std::move(s));
}

const ScoreSample& PositionGrid::at(Position p) const {
  const auto it = cells_.find(p);
  if (it == cells_.end())
    throw MissingCell("grid has no cell (" + std::to_string(p.i) + ", " + std::to_string(p.j) + ")");
  return it->second;
}

PositionGrid PositionGrid::transposed() const {
  PositionGrid out(k_max_);
  for (const auto& [p, s] : cells_) out.set({p.j, p.i}, s);
  return out;
}

ScoreSample PositionGrid::pooled() const {
  std::vector<const ScoreSample*> all;
  for (const auto& [p, s] : cells_) all.push_back(&s);
  if (all.empty()) throw EmptySample("grid is empty");
  return pool(all);
}

// ---------------------------------------------------------------------------
// Distances

double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw EmptySample("wasserstein1: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> xs;
  xs.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(xs));
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t ia = 0, ib = 0;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
    while (ia < a.size() && a[ia] <= xs[k]) ++ia;
    while (ib < b.size() && b[ib] <= xs[k]) ++ib;
    total += std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb) * (xs[k + 1] - xs[k]);
  }
  return total;
}

namespace {

std::vector<double> as_reals(const ScoreSample& s, double shift = 0.0) {
  std::vector<double> out;
  out.reserve(s.size());
  for (const int v : s.values()) out.push_back(static_cast<double>(v) - shift);
  return out;
}

}  // namespace

double emd(const ScoreSample& a, const ScoreSample& b) { return wasserstein1(as_reals(a), as_reals(b)); }

double centered_emd(const ScoreSample& a, const ScoreSample& b) {
  return wasserstein1(as_reals(a, a.mean()), as_reals(b, b.mean()));
}

double ks_statistic(const ScoreSample& a, const ScoreSample& b) {
  std::vector<int> xa = a.values(), xb = b.values();
  std::sort(xa.begin(), xa.end());
  std::sort(xb.begin(), xb.end());
  const auto n1 = static_cast<long long>(xa.size());
  const auto n2 = static_cast<long long>(xb.size());
  // Compare counts scaled to a common denominator so D is one exact division.
  long long best = 0;
  std::size_t ia = 0, ib = 0;
  while (ia < xa.size() || ib < xb.size()) {
    int x;
    if (ib >= xb.size() || (ia < xa.size() && xa[ia] <= xb[ib])) x = xa[ia];
    else x = xb[ib];
    while (ia < xa.size() && xa[ia] == x) ++ia;
    while (ib < xb.size() && xb[ib] == x) ++ib;
    best = std::max(best, std::llabs(static_cast<long long>(ia) * n2 - static_cast<long long>(ib) * n1));
  }
  return static_cast<double>(best) / static_cast<double>(n1 * n2);
}

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double p;
  if (lambda < 1.0) {
    // Jacobi theta form; the alternating series converges slowly here.
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double sum = 0.0;
    for (int k = 1; k < 200; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(-odd * odd * c);
      sum += term;
      if (term < 1e-18) break;
    }
    p = 1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * sum;
  } else {
    double sum = 0.0;
    for (int k = 1; k < 200; ++k) {
      const double term = std::exp(-2.0 * k * k * lambda * lambda);
      sum += (k % 2 == 1) ? term : -term;
      if (term < 1e-18) break;
    }
    p = 2.0 * sum;
  }
  return std::clamp(p, 0.0, 1.0);
}

TestResult ks_test(const ScoreSample& a, const ScoreSample& b, int comparisons) {
  if (comparisons < 1) throw std::invalid_argument("ks_test: comparisons must be >= 1");
  TestResult r;
  r.n1 = a.size();
  r.n2 = b.size();
  r.comparisons = comparisons;
  r.statistic = ks_statistic(a, b);
  const double ne = static_cast<double>(r.n1) * static_cast<double>(r.n2) / static_cast<double>(r.n1 + r.n2);
  r.p_value = kolmogorov_sf(std::sqrt(ne) * r.statistic);
  r.p_adjusted = std::min(1.0, r.p_value * comparisons);
  return r;
}

// ---------------------------------------------------------------------------
// Density

namespace {

double quantile(const std::vector<int>& sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

double silverman_bandwidth(const ScoreSample& s) {
  std::vector<int> sorted = s.values();
  std::sort(sorted.begin(), sorted.end());
  const double sd = s.stddev();
  const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  const double h = 0.9 * spread * std::pow(static_cast<double>(s.size()), -0.2);
  return std::max(h, kKdeMinBandwidth);
}

KdeCurve kde(const ScoreSample& s, double grid_step) {
  if (!(grid_step > 0.0)) throw std::invalid_argument("kde: grid step must be positive");
  KdeCurve c;
  const auto points = static_cast<std::size_t>(std::llround(100.0 / grid_step)) + 1;
  c.x.resize(points);
  for (std::size_t k = 0; k < points; ++k) c.x[k] = static_cast<double>(k) * grid_step;
  c.density.assign(points, 0.0);

  const auto [lo, hi] = std::minmax_element(s.values().begin(), s.values().end());
  if (*lo == *hi) {
    c.degenerate = true;
    c.spike_at = *lo;
    const auto k = static_cast<std::size_t>(std::llround(*lo / grid_step));
    c.density[std::min(k, points - 1)] = 1.0 / grid_step;
    return c;
  }

  c.bandwidth = silverman_bandwidth(s);
  const double h = c.bandwidth;
  const double norm = 1.0 / (static_cast<double>(s.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t k = 0; k < points; ++k) {
    double sum = 0.0;
    for (const int v : s.values()) {
      const double z = (c.x[k] - v) / h;
      sum += std::exp(-0.5 * z * z);
    }
    c.density[k] = sum * norm;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Bias indices

double early_positionality_bias(const PositionGrid& grid) {
  double total = 0.0;
  int pairs = 0;
  for (int i = 0; i <= grid.k_max(); ++i)
    for (int j = 0; j < i; ++j) {
      total += grid.at({i, j}).mean() - grid.at({j, i}).mean();
      ++pairs;
    }
  return pairs == 0 ? 0.0 : total / pairs;
}

double bipolarization_index(const ScoreSample& s, int k) {
  if (k < 0 || k > 49) throw std::invalid_argument("bipolarization_index: k must be in [0, 49]");
  std::size_t low = 0, high = 0;
  for (const int v : s.values()) {
    if (v <= k) ++low;
    if (v >= 100 - k) ++high;
  }
  const double n = static_cast<double>(s.size());
  return 4.0 * (static_cast<double>(low) / n) * (static_cast<double>(high) / n);
}

std::vector<std::pair<int, double>> bipolarization_curve(const ScoreSample& s, int k_max) {
  std::vector<std::pair<int, double>> out;
  for (int k = 0; k <= k_max; ++k) out.emplace_back(k, bipolarization_index(s, k));
  return out;
}

std::vector<LengthPoint> length_curves(const PositionGrid& grid) {
  std::vector<LengthPoint> out;
  for (int k = 1; k <= 2 * grid.k_max() + 1; ++k) {
    std::vector<const ScoreSample*> cells;
    for (int i = 0; i <= grid.k_max(); ++i) {
      const int j = k - 1 - i;
      if (j < 0 || j > grid.k_max()) continue;
      cells.push_back(&grid.at({i, j}));
    }
    const auto pooled = pool(cells);
    out.push_back({k, pooled.size(), pooled.mean(), pooled.stddev(), 100.0 * (k - 1) / k});
  }
  return out;
}

TestResult pooled_half_test(const PositionGrid& grid, int comparisons) {
  std::vector<const ScoreSample*> early, late;
  for (int i = 0; i <= grid.k_max(); ++i)
    for (int j = 0; j <= grid.k_max(); ++j) {
      if (i > j) early.push_back(&grid.at({i, j}));
      else if (i < j) late.push_back(&grid.at({i, j}));
    }
  if (early.empty()) throw MissingCell("pooled_half_test: grid has no off-diagonal cells");
  return ks_test(pool(early), pool(late), comparisons);
}

TestResult pair_test(const PositionGrid& grid, Position p, int comparisons) {
  return ks_test(grid.at(p), grid.at({p.j, p.i}), comparisons);
}

NeedleHierarchy needle_hierarchy(const std::map<NeedleType, ScoreSample>& samples) {
  NeedleHierarchy h;
  for (const auto n : kAllNeedles) {
    const auto it = samples.find(n);
    if (it == samples.end()) throw MissingSample("needle_hierarchy: no sample for " + std::string(to_string(n)));
    h.ranking.push_back(n);
    h.means[n] = it->second.mean();
  }
  std::stable_sort(h.ranking.begin(), h.ranking.end(),
                   [&](NeedleType a, NeedleType b) { return h.means[a] > h.means[b]; });
  for (std::size_t a = 0; a < h.ranking.size(); ++a)
    for (std::size_t b = a + 1; b < h.ranking.size(); ++b) {
      const auto na = h.ranking[a], nb = h.ranking[b];
      h.tests.push_back({na, nb, ks_test(samples.at(na), samples.at(nb), 3)});
    }
  return h;
}

}  // namespace haystack
