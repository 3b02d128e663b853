#pragma once

// Brute-force reference implementations. Deliberately naive: they share no
// code with the library and trade speed for obviousness.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <vector>

namespace haystack::oracle {

/// Mean of the first a scores, summed from scratch.
inline double prefix_mean(const std::vector<int>& scores, std::size_t a) {
  long long sum = 0;
  for (std::size_t k = 0; k < a; ++k) sum += scores[k];
  return static_cast<double>(sum) / static_cast<double>(a);
}

inline bool stopping(const std::vector<int>& scores, std::size_t n, int n_min, int w, double t) {
  if (n < static_cast<std::size_t>(n_min)) return false;
  std::vector<double> means;
  for (std::size_t a = n - w; a <= n; ++a) means.push_back(prefix_mean(scores, a));
  double worst = 0.0;
  for (const double x : means)
    for (const double y : means) worst = std::max(worst, std::abs(x - y));
  return worst <= t;
}

inline std::optional<std::size_t> n_doc(const std::vector<int>& scores, int n_min, int w, double t) {
  for (std::size_t n = 1; n <= scores.size(); ++n)
    if (stopping(scores, n, n_min, w, t)) return n;
  return std::nullopt;
}

/// Earth mover's distance by explicit transport: sorted samples, masses of
/// nb units per point of a and na units per point of b, filled northwest
/// corner first (the monotone coupling, optimal on the line).
inline double transport_emd(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const long long na = static_cast<long long>(a.size()), nb = static_cast<long long>(b.size());
  std::vector<long long> supply(a.size(), nb), demand(b.size(), na);
  std::size_t i = 0, j = 0;
  long double cost = 0.0L;
  while (i < a.size() && j < b.size()) {
    const long long moved = std::min(supply[i], demand[j]);
    cost += static_cast<long double>(moved) * std::fabs(static_cast<long double>(a[i]) - b[j]);
    supply[i] -= moved;
    demand[j] -= moved;
    if (supply[i] == 0) ++i;
    if (demand[j] == 0) ++j;
  }
  return static_cast<double>(cost / static_cast<long double>(na * nb));
}

/// Equal-size samples only: minimum over every assignment.
inline double assignment_emd(const std::vector<double>& a, std::vector<double> b) {
  std::sort(b.begin(), b.end());
  double best = INFINITY;
  do {
    double c = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) c += std::fabs(a[k] - b[k]);
    best = std::min(best, c / static_cast<double>(a.size()));
  } while (std::next_permutation(b.begin(), b.end()));
  return best;
}

/// sup |F_a - F_b| by counting at every sample point.
inline double ks_d(const std::vector<int>& a, const std::vector<int>& b) {
  long long best = 0;
  const long long na = static_cast<long long>(a.size()), nb = static_cast<long long>(b.size());
  std::vector<int> points(a);
  points.insert(points.end(), b.begin(), b.end());
  for (const int x : points) {
    long long ca = 0, cb = 0;
    for (const int v : a) ca += v <= x;
    for (const int v : b) cb += v <= x;
    best = std::max(best, std::llabs(ca * nb - cb * na));
  }
  return static_cast<double>(best) / static_cast<double>(na * nb);
}

/// Kolmogorov survival function summed term by term.
inline double kolmogorov_series(double lambda) {
  if (lambda <= 0.0) return 1.0;
  long double sum = 0.0L;
  for (long k = 1; k < 2000000; ++k) {
    const long double term = std::exp(-2.0L * k * k * lambda * lambda);
    sum += (k % 2 == 1) ? term : -term;
    if (term < 1e-30L) break;
  }
  return std::clamp(static_cast<double>(2.0L * sum), 0.0, 1.0);
}

}  // namespace haystack::oracle
