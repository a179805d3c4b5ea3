#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "attloc/data.hpp"
#include "attloc/numerics.hpp"
#include "attloc/tags.hpp"

namespace attloc {

// One (score, truth) observation per evaluated chunk, per tag.
struct ScoredSet {
  std::array<std::vector<std::pair<double, int>>, kNumTags> items;

  void add(int tag, double score, bool truth) {
    items[static_cast<std::size_t>(tag)].emplace_back(score, truth ? 1 : 0);
  }
};

// Equal error rate from a threshold sweep over all distinct scores, linearly
// interpolated where FPR - FNR changes sign; ties resolve toward the lower
// value. Undefined (nullopt) when either class is absent.
std::optional<double> eer(const std::vector<std::pair<double, int>>& scored);
std::optional<double> eer(const ScoredSet& scores, int tag);

// Unweighted mean over the defined tags. Errors if none are defined.
double eer_average(const std::array<std::optional<double>, kNumTags>& per_tag);

// ROC AUC of scores against binary truth (ties get half credit).
// Undefined when either class is absent.
std::optional<double> roc_auc(const std::vector<double>& scores, const std::vector<int>& truth);

// Frame-level localization quality: per event, AUC of the attention-masked
// localization score (column e of `masked_loc`, a T x 7 matrix of
// z_att(t) * z_loc_e(t)) against in-interval/out-of-interval frame labels.
// Events with no truth interval are undefined.
std::array<std::optional<double>, kNumTags> localization_auc(
    const Matrix& masked_loc, const std::vector<TruthInterval>& truth);

}  // namespace attloc
