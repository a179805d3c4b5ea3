#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "attloc/features.hpp"
#include "attloc/numerics.hpp"
#include "attloc/tags.hpp"

namespace attloc {

inline constexpr int kCnnFilters = 128;
inline constexpr int kCnnKernel = 30;
inline constexpr int kCnnPositions = kMelBands - kCnnKernel + 1;  // 11
inline constexpr int kGruLayers = 3;
inline constexpr int kGruHidden = 128;
inline constexpr int kGruOut = 2 * kGruHidden;  // fwd + bwd concatenated
inline constexpr int kFnnUnits = 500;

// BASELINE_CGRNN runs the plain trunk (attention fixed at 1, plain frame
// average); ATT_LOC adds the attention gate and localization-weighted average.
enum class ModelMode { kBaseline, kAttLoc };

std::string to_string(ModelMode mode);
ModelMode mode_from_string(const std::string& s);

// One GRU direction: gate weights against the input (w*), the recurrent
// state (u*), and biases. Update/reset/candidate order is z, r, h.
struct GruDirParams {
  Matrix wz, wr, wh;  // 128 x in
  Matrix uz, ur, uh;  // 128 x 128
  Matrix bz, br, bh;  // 1 x 128
};

using GruLayerParams = std::array<GruDirParams, 2>;  // [fwd, bwd]

struct ModelParams {
  Matrix cnn_w;  // 128 x 30
  Matrix cnn_b;  // 1 x 128
  std::array<GruLayerParams, kGruLayers> gru;
  Matrix fnn_w;  // 500 x 256
  Matrix fnn_b;  // 1 x 500
  Matrix out_w;  // 7 x 500
  Matrix out_b;  // 1 x 7
  Matrix att_w;  // 1 x 40
  Matrix att_b;  // 1 x 1
  Matrix loc_w;  // 7 x 40
  Matrix loc_b;  // 1 x 7
};

inline constexpr std::size_t kParamCount = 925039;

enum class TensorKind { kWeight, kBias };

// Visit every tensor in a fixed order with a stable name; the same traversal
// backs initialization, Adam updates, checkpoints, and gradient checking.
template <typename Params, typename Fn>
void visit_tensors(Params& p, Fn&& fn) {
  fn("cnn_w", p.cnn_w, TensorKind::kWeight);
  fn("cnn_b", p.cnn_b, TensorKind::kBias);
  for (int layer = 0; layer < kGruLayers; ++layer) {
    for (int dir = 0; dir < 2; ++dir) {
      auto& g = p.gru[static_cast<std::size_t>(layer)][static_cast<std::size_t>(dir)];
      const std::string prefix =
          "gru" + std::to_string(layer + 1) + (dir == 0 ? "_fwd_" : "_bwd_");
      fn(prefix + "wz", g.wz, TensorKind::kWeight);
      fn(prefix + "wr", g.wr, TensorKind::kWeight);
      fn(prefix + "wh", g.wh, TensorKind::kWeight);
      fn(prefix + "uz", g.uz, TensorKind::kWeight);
      fn(prefix + "ur", g.ur, TensorKind::kWeight);
      fn(prefix + "uh", g.uh, TensorKind::kWeight);
      fn(prefix + "bz", g.bz, TensorKind::kBias);
      fn(prefix + "br", g.br, TensorKind::kBias);
      fn(prefix + "bh", g.bh, TensorKind::kBias);
    }
  }
  fn("fnn_w", p.fnn_w, TensorKind::kWeight);
  fn("fnn_b", p.fnn_b, TensorKind::kBias);
  fn("out_w", p.out_w, TensorKind::kWeight);
  fn("out_b", p.out_b, TensorKind::kBias);
  fn("att_w", p.att_w, TensorKind::kWeight);
  fn("att_b", p.att_b, TensorKind::kBias);
  fn("loc_w", p.loc_w, TensorKind::kWeight);
  fn("loc_b", p.loc_b, TensorKind::kBias);
}

// All tensors allocated to their fixed shapes, zero-filled.
ModelParams zero_params();

// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out)), fan_in = cols,
// fan_out = rows), zero biases. Same seed gives identical parameters.
ModelParams init_params(Rng& rng);

// Saved per-direction GRU activations, one row per frame (in the direction's
// own time order): post-step state h and the z/r/candidate gate values.
struct GruDirCache {
  Matrix h, z, r, hc;  // each T x 128
};

// Everything the backward pass and the trace export need.
struct ForwardTrace {
  ModelMode mode = ModelMode::kAttLoc;
  Matrix x;                     // T x 40 input frames
  Matrix y_cnn;                 // T x 128
  std::vector<int> cnn_argmax;  // T*128 winning conv positions
  std::vector<double> z_att;    // T (1.0 in baseline mode)
  Matrix y_gated;               // T x 128, z_att(t) * y_cnn(t)
  std::array<std::array<GruDirCache, 2>, kGruLayers> gru;
  std::array<Matrix, kGruLayers> gru_out;  // T x 256 each
  Matrix fnn;                   // T x 500, post-ReLU
  Matrix s;                     // T x 7, linear output
  Matrix o;                     // T x 7, sigmoid(s)
  Matrix z_loc;                 // T x 7, softmax rows
  Matrix o_gated;               // T x 7, z_att(t) * o(t) . z_loc(t)
  std::array<double, kNumTags> loc_sum{};  // per-event sum of z_loc over frames
  std::array<double, kNumTags> o_final{};  // chunk-level posterior

  std::size_t frames() const { return x.rows(); }
};

// Per-frame CNN: valid 1-D convolution of the 30-wide kernel along the 40 mel
// bins (11 positions), bias, ReLU, max over positions per filter.
std::array<double, kCnnFilters> cnn_frame(std::span<const double> frame,
                                          const ModelParams& params);

// sigmoid(att_w . x + att_b), the frame's global importance in (0,1).
double attention_gate(std::span<const double> frame, const ModelParams& params);

// softmax(loc_w . x + loc_b), the frame's per-event posterior (sums to 1).
std::array<double, kNumTags> localize_frame(std::span<const double> frame,
                                            const ModelParams& params);

// One bidirectional layer: forward and reversed passes from zero state,
// outputs concatenated as [h_fwd ; h_bwd] per frame.
Matrix bigru_layer(const Matrix& seq, const GruLayerParams& layer);

ForwardTrace forward(const MelChunk& mel, const ModelParams& params, ModelMode mode);

}  // namespace attloc
