// Independent reference implementations used only by tests. Everything here
// is deliberately naive (triple loops, exhaustive enumeration) so the fast
// library paths are checked against unoptimized definitions.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "attloc/numerics.hpp"

namespace oracle {

inline attloc::Matrix naive_matmul(const attloc::Matrix& a, const attloc::Matrix& b) {
  attloc::Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

inline attloc::Matrix random_matrix(attloc::Rng& rng, std::size_t rows, std::size_t cols,
                                    double lo = -1.0, double hi = 1.0) {
  attloc::Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

// EER by exhaustive threshold-midpoint enumeration: direct counting at every
// candidate threshold, then the interpolated FPR/FNR crossing.
inline std::optional<double> brute_eer(const std::vector<std::pair<double, int>>& items) {
  std::size_t pos = 0, neg = 0;
  for (const auto& [s, t] : items) (t ? pos : neg) += 1;
  if (pos == 0 || neg == 0) return std::nullopt;

  std::vector<double> scores;
  for (const auto& [s, t] : items) scores.push_back(s);
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

  // One threshold above everything, then one midpoint-equivalent per distinct
  // score, descending (classify positive when score >= threshold).
  std::vector<double> thresholds;
  thresholds.push_back(scores.back() + 1.0);
  for (std::size_t i = scores.size(); i-- > 0;) thresholds.push_back(scores[i]);

  std::vector<std::pair<double, double>> pts;
  for (double th : thresholds) {
    std::size_t fp = 0, fn = 0;
    for (const auto& [s, t] : items) {
      if (t == 0 && s >= th) ++fp;
      if (t == 1 && s < th) ++fn;
    }
    pts.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                     static_cast<double>(fn) / static_cast<double>(pos));
  }

  double best = 2.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = pts[i].first - pts[i].second;
    if (d == 0.0) best = std::min(best, pts[i].first);
    if (i + 1 < pts.size()) {
      const double dn = pts[i + 1].first - pts[i + 1].second;
      if (d < 0.0 && dn > 0.0) {
        const double s = -d / ((pts[i + 1].first - pts[i].first) - (pts[i + 1].second - pts[i].second));
        best = std::min(best, pts[i].first + s * (pts[i + 1].first - pts[i].first));
      }
    }
  }
  return best;
}

// ROC AUC by comparing every positive/negative pair.
inline std::optional<double> allpairs_auc(const std::vector<double>& scores,
                                          const std::vector<int>& truth) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!truth[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (truth[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  if (pairs == 0) return std::nullopt;
  return wins / static_cast<double>(pairs);
}

}  // namespace oracle
