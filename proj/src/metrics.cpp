#include "attloc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "attloc/errors.hpp"

namespace attloc {

std::optional<double> eer(const std::vector<std::pair<double, int>>& scored) {
  std::size_t pos = 0, neg = 0;
  for (const auto& [score, truth] : scored) {
    (truth ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0) return std::nullopt;

  // Sort by score descending; sweep thresholds so that items with
  // score >= threshold are classified positive.
  std::vector<std::pair<double, int>> sorted = scored;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  // Operating points, starting above the max score (FPR 0, FNR 1), then one
  // per distinct score. FPR is non-decreasing, FNR non-increasing, so
  // FPR - FNR is monotone and the sign change is a single crossing.
  std::vector<std::pair<double, double>> points;  // (FPR, FNR)
  points.emplace_back(0.0, 1.0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double score = sorted[i].first;
    for (; i < sorted.size() && sorted[i].first == score; ++i) {
      (sorted[i].second ? tp : fp) += 1;
    }
    points.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                        static_cast<double>(pos - tp) / static_cast<double>(pos));
  }

  double best = 1.0;
  bool found = false;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double diff = points[i].first - points[i].second;
    if (diff == 0.0) {
      best = found ? std::min(best, points[i].first) : points[i].first;
      found = true;
    } else if (i + 1 < points.size()) {
      const double next = points[i + 1].first - points[i + 1].second;
      if (diff < 0.0 && next > 0.0) {
        const double dfpr = points[i + 1].first - points[i].first;
        const double dfnr = points[i + 1].second - points[i].second;
        const double s = -diff / (dfpr - dfnr);
        const double value = points[i].first + s * dfpr;
        best = found ? std::min(best, value) : value;
        found = true;
      }
    }
  }
  // The sweep runs from (0,1) to (1,0); a crossing always exists.
  return best;
}

std::optional<double> eer(const ScoredSet& scores, int tag) {
  return eer(scores.items[static_cast<std::size_t>(tag)]);
}

double eer_average(const std::array<std::optional<double>, kNumTags>& per_tag) {
  double sum = 0.0;
  int defined = 0;
  for (const auto& v : per_tag) {
    if (v) {
      sum += *v;
      ++defined;
    }
  }
  if (defined == 0) throw NumericError("eer_average: no tag has a defined EER");
  return sum / defined;
}

std::optional<double> roc_auc(const std::vector<double>& scores, const std::vector<int>& truth) {
  if (scores.size() != truth.size()) {
    throw std::invalid_argument("roc_auc: size mismatch");
  }
  std::size_t pos = 0, neg = 0;
  for (int t : truth) (t ? pos : neg) += 1;
  if (pos == 0 || neg == 0) return std::nullopt;

  // Rank statistic with average ranks over ties.
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j + 1);  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (truth[order[k]]) pos_rank_sum += avg_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

std::array<std::optional<double>, kNumTags> localization_auc(
    const Matrix& masked_loc, const std::vector<TruthInterval>& truth) {
  if (masked_loc.cols() != static_cast<std::size_t>(kNumTags)) {
    throw std::invalid_argument("localization_auc: trace must have 7 columns");
  }
  const std::size_t frames = masked_loc.rows();

  std::array<std::optional<double>, kNumTags> out;
  for (int e = 0; e < kNumTags; ++e) {
    std::vector<int> in_interval(frames, 0);
    bool present = false;
    for (const TruthInterval& iv : truth) {
      if (iv.event != e) continue;
      present = true;
      for (int t = std::max(0, iv.start_frame);
           t < std::min<int>(static_cast<int>(frames), iv.end_frame); ++t) {
        in_interval[static_cast<std::size_t>(t)] = 1;
      }
    }
    if (!present) continue;
    std::vector<double> scores(frames);
    for (std::size_t t = 0; t < frames; ++t) scores[t] = masked_loc(t, static_cast<std::size_t>(e));
    out[static_cast<std::size_t>(e)] = roc_auc(scores, in_interval);
  }
  return out;
}

}  // namespace attloc
