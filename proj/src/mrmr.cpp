#include "stepnav/mrmr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace stepnav {

std::vector<int> equal_frequency_bins(const VectorX& values, int bins) {
  if (bins < 1) throw ValidationError("bin count must be >= 1");
  const auto n = static_cast<std::size_t>(values.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values(static_cast<Eigen::Index>(a)) < values(static_cast<Eigen::Index>(b)); });
  std::vector<int> out(n, 0);
  for (std::size_t r = 0; r < n;) {
    const double v = values(static_cast<Eigen::Index>(order[r]));
    const int bin = static_cast<int>(r * static_cast<std::size_t>(bins) / n);
    for (; r < n && values(static_cast<Eigen::Index>(order[r])) == v; ++r) out[order[r]] = bin;
  }
  return out;
}

double mutual_information(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ValidationError("mutual_information: lengths differ");
  if (a.empty()) return 0.0;
  std::map<int, double> pa, pb;
  std::map<std::pair<int, int>, double> pab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1.0;
    pb[b[i]] += 1.0;
    pab[{a[i], b[i]}] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  double mi = 0.0;
  for (const auto& [key, c] : pab) {
    mi += c / n * std::log(c * n / (pa[key.first] * pb[key.second]));
  }
  return std::max(0.0, mi);
}

std::vector<MrmrEntry> mrmr_rank(const MatrixX& X, const std::vector<int>& labels, int bins) {
  const auto d = static_cast<int>(X.cols());
  if (d < 2) throw ValidationError("MRMR needs at least two features");
  if (static_cast<std::size_t>(X.rows()) != labels.size()) throw ValidationError("MRMR: row/label mismatch");
  std::vector<int> distinct = labels;
  std::sort(distinct.begin(), distinct.end());
  if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() < 2) {
    throw ValidationError("MRMR needs at least two classes");
  }

  std::vector<std::vector<int>> binned(static_cast<std::size_t>(d));
  std::vector<double> relevance(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    binned[static_cast<std::size_t>(j)] = equal_frequency_bins(X.col(j), bins);
    relevance[static_cast<std::size_t>(j)] = mutual_information(binned[static_cast<std::size_t>(j)], labels);
  }

  std::vector<MrmrEntry> ranked;
  std::vector<bool> taken(static_cast<std::size_t>(d), false);
  std::vector<double> redundancy(static_cast<std::size_t>(d), 0.0);  // running sums
  for (int step = 0; step < d; ++step) {
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < d; ++j) {
      const auto u = static_cast<std::size_t>(j);
      if (taken[u]) continue;
      const double score = relevance[u] - (step == 0 ? 0.0 : redundancy[u] / step);
      if (score > best_score) best = j, best_score = score;
    }
    const auto b = static_cast<std::size_t>(best);
    taken[b] = true;
    ranked.push_back({best, relevance[b], best_score});
    for (int j = 0; j < d; ++j) {
      const auto u = static_cast<std::size_t>(j);
      if (!taken[u]) redundancy[u] += mutual_information(binned[u], binned[b]);
    }
  }
  return ranked;
}

}  // namespace stepnav
