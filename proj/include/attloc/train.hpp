#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "attloc/data.hpp"
#include "attloc/metrics.hpp"
#include "attloc/model.hpp"
#include "attloc/numerics.hpp"
#include "attloc/tags.hpp"

namespace attloc {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool shuffle = true;
  bool clip_gradients = false;  // L2-norm clip at 5.0 when enabled
  int threads = 0;              // 0 = one per hardware thread, capped at 8
};

void validate(const TrainConfig& config);  // throws std::invalid_argument

// Same tensor layout and shapes as the parameters they differentiate.
using Gradients = ModelParams;

struct AdamState {
  Gradients m, v;
  long step = 0;
};
AdamState zero_adam_state();

// Binary cross-entropy of one chunk posterior against its reference label;
// posteriors are clamped to [1e-12, 1 - 1e-12] inside the logs.
double bce_loss(const std::array<double, kNumTags>& posterior, const TagLabel& label);

struct BackwardResult {
  double loss = 0.0;
  Gradients grads;
};

// Exact gradients of bce_loss(forward(...)) for every parameter tensor.
// Baseline mode leaves the att/loc tensors identically zero.
BackwardResult backward(const MelChunk& mel, const TagLabel& label, const ModelParams& params,
                        ModelMode mode);
BackwardResult backward_from_trace(const ForwardTrace& trace, const TagLabel& label,
                                   const ModelParams& params);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double finite_diff = 0.0;
  std::size_t coords_checked = 0;
};

// Central finite differences against supplied gradients, over a deterministic
// stratified subsample of at most `per_tensor` coordinates per tensor.
// rel_err = |ga - gf| / max(1e-8, |ga| + |gf|).
GradCheckReport verify_gradients(const Gradients& grads, const ModelParams& params,
                                 const MelChunk& mel, const TagLabel& label, ModelMode mode,
                                 double eps = 1e-5, int per_tensor = 200);
GradCheckReport grad_check(const ModelParams& params, const MelChunk& mel, const TagLabel& label,
                           ModelMode mode, double eps = 1e-5, int per_tensor = 200);

// m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;  bias-corrected step.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               const TrainConfig& config);

struct EvalResult {
  double loss_mean = 0.0;
  ScoredSet scores;
  std::array<std::optional<double>, kNumTags> eer_per_tag;
  double eer_avg = 0.0;  // NaN when no tag has both classes
};

// Forward every chunk, score o'' against the labels, per-tag EER + average.
EvalResult evaluate(const ModelParams& params, const std::vector<LabeledChunk>& dataset,
                    ModelMode mode, int threads = 0);

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::array<std::optional<double>, kNumTags> val_eer;
  double val_eer_avg = 0.0;
};

struct TrainResult {
  ModelParams params;  // best validation EER snapshot
  std::vector<EpochStats> log;
  int best_epoch = 0;  // 1-based; 0 when epochs == 0
};

using EpochCallback = std::function<void(int epoch, const EpochStats&)>;

// Shuffled mini-batches, batch-mean gradients, Adam updates; deterministic
// for a fixed seed regardless of thread count (accumulation in chunk order).
TrainResult train(const std::vector<LabeledChunk>& train_set,
                  const std::vector<LabeledChunk>& val_set, const TrainConfig& config,
                  ModelMode mode, const EpochCallback& on_epoch = {});

}  // namespace attloc
