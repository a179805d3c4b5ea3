#include "attloc/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "attloc/errors.hpp"

namespace attloc {

std::string to_string(ModelMode mode) {
  return mode == ModelMode::kBaseline ? "baseline" : "attloc";
}

ModelMode mode_from_string(const std::string& s) {
  if (s == "baseline") return ModelMode::kBaseline;
  if (s == "attloc") return ModelMode::kAttLoc;
  throw DataError("unknown mode '" + s + "', expected baseline or attloc");
}

ModelParams zero_params() {
  ModelParams p;
  p.cnn_w = Matrix(kCnnFilters, kCnnKernel);
  p.cnn_b = Matrix(1, kCnnFilters);
  for (int layer = 0; layer < kGruLayers; ++layer) {
    const std::size_t in = (layer == 0) ? kCnnFilters : kGruOut;
    for (auto& dir : p.gru[static_cast<std::size_t>(layer)]) {
      dir.wz = Matrix(kGruHidden, in);
      dir.wr = Matrix(kGruHidden, in);
      dir.wh = Matrix(kGruHidden, in);
      dir.uz = Matrix(kGruHidden, kGruHidden);
      dir.ur = Matrix(kGruHidden, kGruHidden);
      dir.uh = Matrix(kGruHidden, kGruHidden);
      dir.bz = Matrix(1, kGruHidden);
      dir.br = Matrix(1, kGruHidden);
      dir.bh = Matrix(1, kGruHidden);
    }
  }
  p.fnn_w = Matrix(kFnnUnits, kGruOut);
  p.fnn_b = Matrix(1, kFnnUnits);
  p.out_w = Matrix(kNumTags, kFnnUnits);
  p.out_b = Matrix(1, kNumTags);
  p.att_w = Matrix(1, kMelBands);
  p.att_b = Matrix(1, 1);
  p.loc_w = Matrix(kNumTags, kMelBands);
  p.loc_b = Matrix(1, kNumTags);
  return p;
}

ModelParams init_params(Rng& rng) {
  ModelParams p = zero_params();
  visit_tensors(p, [&](const std::string&, Matrix& t, TensorKind kind) {
    if (kind != TensorKind::kWeight) return;  // biases stay zero
    const double bound =
        std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-bound, bound);
  });
  return p;
}

namespace {

void check_stage(const Matrix& m, const char* stage) {
  if (!m.all_finite()) {
    throw NumericError(std::string("forward: non-finite value at stage ") + stage);
  }
}

// A * W^T + b, with b broadcast over rows.
Matrix affine_nt(const Matrix& a, const Matrix& w, const Matrix& b) {
  Matrix out = matmul_nt(a, w);
  for (std::size_t t = 0; t < out.rows(); ++t) {
    double* row = out.row(t);
    const double* bias = b.row(0);
    for (std::size_t j = 0; j < out.cols(); ++j) row[j] += bias[j];
  }
  return out;
}

void cnn_frame_into(const double* x, const ModelParams& params, double* out, int* argmax) {
  for (int f = 0; f < kCnnFilters; ++f) {
    const double* w = params.cnn_w.row(static_cast<std::size_t>(f));
    const double bias = params.cnn_b(0, static_cast<std::size_t>(f));
    double best = -std::numeric_limits<double>::infinity();
    int best_pos = 0;
    for (int p = 0; p < kCnnPositions; ++p) {
      const double acc = bias + dot(w, x + p, kCnnKernel);
      if (acc > best) {
        best = acc;
        best_pos = p;
      }
    }
    out[f] = best > 0.0 ? best : 0.0;
    if (argmax) argmax[f] = best_pos;
  }
}

// One GRU direction over `input` in its given time order, from zero state:
//   z_t = sigmoid(Wz x_t + Uz h_{t-1} + bz)
//   r_t = sigmoid(Wr x_t + Ur h_{t-1} + br)
//   hc_t = tanh(Wh x_t + Uh (r_t . h_{t-1}) + bh)
//   h_t = (1 - z_t) . h_{t-1} + z_t . hc_t
void gru_dir_forward(const Matrix& input, const GruDirParams& p, GruDirCache& cache) {
  const std::size_t frames = input.rows();
  cache.h = Matrix(frames, kGruHidden);
  cache.z = Matrix(frames, kGruHidden);
  cache.r = Matrix(frames, kGruHidden);
  cache.hc = Matrix(frames, kGruHidden);

  // Input-side projections for the whole sequence at once.
  const Matrix az = affine_nt(input, p.wz, p.bz);
  const Matrix ar = affine_nt(input, p.wr, p.br);
  const Matrix ah = affine_nt(input, p.wh, p.bh);

  std::vector<double> h_prev(kGruHidden, 0.0);
  std::vector<double> rh(kGruHidden);
  for (std::size_t t = 0; t < frames; ++t) {
    double* z = cache.z.row(t);
    double* r = cache.r.row(t);
    double* hc = cache.hc.row(t);
    double* h = cache.h.row(t);

    matvec(p.uz, h_prev.data(), z);
    matvec(p.ur, h_prev.data(), r);
    for (int i = 0; i < kGruHidden; ++i) {
      z[i] = sigmoid(az(t, static_cast<std::size_t>(i)) + z[i]);
      r[i] = sigmoid(ar(t, static_cast<std::size_t>(i)) + r[i]);
      rh[static_cast<std::size_t>(i)] = r[i] * h_prev[static_cast<std::size_t>(i)];
    }
    matvec(p.uh, rh.data(), hc);
    for (int i = 0; i < kGruHidden; ++i) {
      hc[i] = std::tanh(ah(t, static_cast<std::size_t>(i)) + hc[i]);
      h[i] = (1.0 - z[i]) * h_prev[static_cast<std::size_t>(i)] + z[i] * hc[i];
      h_prev[static_cast<std::size_t>(i)] = h[i];
    }
  }
}

Matrix bigru_cached(const Matrix& seq, const GruLayerParams& layer,
                    std::array<GruDirCache, 2>& caches) {
  const std::size_t frames = seq.rows();
  gru_dir_forward(seq, layer[0], caches[0]);
  // The backward direction runs on the reversed sequence; its cache stays in
  // reversed time and is un-reversed only where outputs are assembled.
  gru_dir_forward(reverse_rows(seq), layer[1], caches[1]);

  Matrix out(frames, kGruOut);
  for (std::size_t t = 0; t < frames; ++t) {
    double* row = out.row(t);
    const double* fwd = caches[0].h.row(t);
    const double* bwd = caches[1].h.row(frames - 1 - t);
    for (int i = 0; i < kGruHidden; ++i) row[i] = fwd[i];
    for (int i = 0; i < kGruHidden; ++i) row[kGruHidden + i] = bwd[i];
  }
  return out;
}

}  // namespace

std::array<double, kCnnFilters> cnn_frame(std::span<const double> frame,
                                          const ModelParams& params) {
  if (frame.size() != static_cast<std::size_t>(kMelBands)) {
    throw std::invalid_argument("cnn_frame: expected a 40-dim frame");
  }
  std::array<double, kCnnFilters> out;
  cnn_frame_into(frame.data(), params, out.data(), nullptr);
  return out;
}

double attention_gate(std::span<const double> frame, const ModelParams& params) {
  if (frame.size() != static_cast<std::size_t>(kMelBands)) {
    throw std::invalid_argument("attention_gate: expected a 40-dim frame");
  }
  return sigmoid(dot(params.att_w.row(0), frame.data(), frame.size()) + params.att_b(0, 0));
}

std::array<double, kNumTags> localize_frame(std::span<const double> frame,
                                            const ModelParams& params) {
  if (frame.size() != static_cast<std::size_t>(kMelBands)) {
    throw std::invalid_argument("localize_frame: expected a 40-dim frame");
  }
  Matrix logits(1, kNumTags);
  for (int e = 0; e < kNumTags; ++e) {
    logits(0, static_cast<std::size_t>(e)) =
        dot(params.loc_w.row(static_cast<std::size_t>(e)), frame.data(), frame.size()) +
        params.loc_b(0, static_cast<std::size_t>(e));
  }
  const Matrix post = softmax_rows(logits);
  std::array<double, kNumTags> out;
  for (int e = 0; e < kNumTags; ++e) out[static_cast<std::size_t>(e)] = post(0, static_cast<std::size_t>(e));
  return out;
}

Matrix bigru_layer(const Matrix& seq, const GruLayerParams& layer) {
  if (seq.cols() != layer[0].wz.cols()) {
    throw std::invalid_argument("bigru_layer: input width " + std::to_string(seq.cols()) +
                                " does not match weights " + std::to_string(layer[0].wz.cols()));
  }
  std::array<GruDirCache, 2> caches;
  return bigru_cached(seq, layer, caches);
}

ForwardTrace forward(const MelChunk& mel, const ModelParams& params, ModelMode mode) {
  if (mel.cols() != static_cast<std::size_t>(kMelBands) || mel.rows() == 0) {
    throw std::invalid_argument("forward: expected a T x 40 chunk with T >= 1, got " +
                                std::to_string(mel.rows()) + " x " + std::to_string(mel.cols()));
  }
  check_stage(mel, "input");
  const std::size_t frames = mel.rows();

  ForwardTrace trace;
  trace.mode = mode;
  trace.x = mel;

  trace.y_cnn = Matrix(frames, kCnnFilters);
  trace.cnn_argmax.resize(frames * kCnnFilters);
  for (std::size_t t = 0; t < frames; ++t) {
    cnn_frame_into(mel.row(t), params, trace.y_cnn.row(t),
                   trace.cnn_argmax.data() + t * kCnnFilters);
  }
  check_stage(trace.y_cnn, "cnn");

  trace.z_att.assign(frames, 1.0);
  if (mode == ModelMode::kAttLoc) {
    const Matrix logit = affine_nt(mel, params.att_w, params.att_b);
    for (std::size_t t = 0; t < frames; ++t) trace.z_att[t] = sigmoid(logit(t, 0));
  }

  trace.y_gated = trace.y_cnn;
  if (mode == ModelMode::kAttLoc) {
    for (std::size_t t = 0; t < frames; ++t) {
      double* row = trace.y_gated.row(t);
      for (int i = 0; i < kCnnFilters; ++i) row[i] *= trace.z_att[t];
    }
  }

  const Matrix* layer_in = &trace.y_gated;
  for (int layer = 0; layer < kGruLayers; ++layer) {
    trace.gru_out[static_cast<std::size_t>(layer)] = bigru_cached(
        *layer_in, params.gru[static_cast<std::size_t>(layer)],
        trace.gru[static_cast<std::size_t>(layer)]);
    check_stage(trace.gru_out[static_cast<std::size_t>(layer)], "gru");
    layer_in = &trace.gru_out[static_cast<std::size_t>(layer)];
  }

  trace.fnn = affine_nt(*layer_in, params.fnn_w, params.fnn_b);
  for (std::size_t i = 0; i < trace.fnn.size(); ++i) {
    if (trace.fnn.data()[i] < 0.0) trace.fnn.data()[i] = 0.0;
  }
  trace.s = affine_nt(trace.fnn, params.out_w, params.out_b);
  check_stage(trace.s, "output-head");
  trace.o = Matrix(frames, kNumTags);
  for (std::size_t i = 0; i < trace.s.size(); ++i) trace.o.data()[i] = sigmoid(trace.s.data()[i]);

  trace.z_loc = softmax_rows(affine_nt(mel, params.loc_w, params.loc_b));
  for (int e = 0; e < kNumTags; ++e) {
    double acc = 0.0;
    for (std::size_t t = 0; t < frames; ++t) acc += trace.z_loc(t, static_cast<std::size_t>(e));
    trace.loc_sum[static_cast<std::size_t>(e)] = acc;
  }

  if (mode == ModelMode::kAttLoc) {
    trace.o_gated = Matrix(frames, kNumTags);
    std::array<double, kNumTags> numer{};
    for (std::size_t t = 0; t < frames; ++t) {
      const double att = trace.z_att[t];
      const double* o = trace.o.row(t);
      const double* loc = trace.z_loc.row(t);
      double* g = trace.o_gated.row(t);
      for (int e = 0; e < kNumTags; ++e) {
        g[e] = att * o[e] * loc[e];
        numer[static_cast<std::size_t>(e)] += g[e];
      }
    }
    for (int e = 0; e < kNumTags; ++e) {
      // Guard softmax underflow without perturbing the normal path: taking the
      // max keeps the uniform case an exact ratio.
      const double denom = std::max(trace.loc_sum[static_cast<std::size_t>(e)], 1e-8);
      trace.o_final[static_cast<std::size_t>(e)] = numer[static_cast<std::size_t>(e)] / denom;
    }
  } else {
    trace.o_gated = trace.o;
    for (int e = 0; e < kNumTags; ++e) {
      double acc = 0.0;
      for (std::size_t t = 0; t < frames; ++t) acc += trace.o(t, static_cast<std::size_t>(e));
      trace.o_final[static_cast<std::size_t>(e)] = acc / static_cast<double>(frames);
    }
  }
  for (double v : trace.o_final) {
    if (!std::isfinite(v)) throw NumericError("forward: non-finite value at stage aggregate");
  }
  return trace;
}

}  // namespace attloc
