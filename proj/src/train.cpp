#include "attloc/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

#include "attloc/errors.hpp"

namespace attloc {

namespace {

constexpr double kLogClamp = 1e-12;
constexpr double kDenomGuard = 1e-8;
constexpr double kClipNorm = 5.0;
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hc, 1u, 8u));
}

// Run fn(i) for i in [0, n) across `threads` stripes. Exceptions are
// re-thrown from the lowest failing index.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::size_t> error_index(workers, std::numeric_limits<std::size_t>::max());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
          error_index[w] = i;
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  std::size_t best = std::numeric_limits<std::size_t>::max();
  std::exception_ptr first;
  for (std::size_t w = 0; w < workers; ++w) {
    if (errors[w] && error_index[w] < best) {
      best = error_index[w];
      first = errors[w];
    }
  }
  if (first) std::rethrow_exception(first);
}

void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
}

void col_sum_add(Matrix& bias, const Matrix& m) {
  double* b = bias.row(0);
  for (std::size_t t = 0; t < m.rows(); ++t) {
    const double* row = m.row(t);
    for (std::size_t j = 0; j < m.cols(); ++j) b[j] += row[j];
  }
}

// Backward through one GRU direction, in the direction's own time order.
// Accumulates parameter gradients into `gp` and returns d(input).
Matrix gru_dir_backward(const Matrix& input, const GruDirParams& p, const GruDirCache& cache,
                        const Matrix& dout, GruDirParams& gp) {
  const std::size_t frames = input.rows();

  Matrix daz(frames, kGruHidden), dar(frames, kGruHidden), dah(frames, kGruHidden);
  Matrix h_prev_seq(frames, kGruHidden);  // h_{t-1} per row (zeros at t = 0)
  Matrix rh_seq(frames, kGruHidden);      // r_t . h_{t-1}

  const std::vector<double> zeros(kGruHidden, 0.0);
  std::vector<double> carry(kGruHidden, 0.0);      // d h_t arriving from step t+1
  std::vector<double> carry_next(kGruHidden);
  std::vector<double> drh(kGruHidden);

  for (std::size_t ti = frames; ti-- > 0;) {
    const double* z = cache.z.row(ti);
    const double* r = cache.r.row(ti);
    const double* hc = cache.hc.row(ti);
    const double* h_prev = (ti > 0) ? cache.h.row(ti - 1) : zeros.data();
    const double* dy = dout.row(ti);

    double* az = daz.row(ti);
    double* ar = dar.row(ti);
    double* ah = dah.row(ti);
    double* hp = h_prev_seq.row(ti);
    double* rh = rh_seq.row(ti);

    // h_t = (1 - z) . h_prev + z . hc
    for (int i = 0; i < kGruHidden; ++i) {
      const double dh = dy[i] + carry[i];
      const double dz = dh * (hc[i] - h_prev[i]);
      const double dhc = dh * z[i];
      carry_next[static_cast<std::size_t>(i)] = dh * (1.0 - z[i]);
      ah[i] = dhc * (1.0 - hc[i] * hc[i]);
      az[i] = dz * z[i] * (1.0 - z[i]);
      hp[i] = h_prev[i];
      rh[i] = r[i] * h_prev[i];
    }
    // candidate input Uh (r . h_prev): split into dr and dh_prev
    std::fill(drh.begin(), drh.end(), 0.0);
    matvec_t_add(p.uh, ah, drh.data());
    for (int i = 0; i < kGruHidden; ++i) {
      const double dr = drh[static_cast<std::size_t>(i)] * h_prev[i];
      carry_next[static_cast<std::size_t>(i)] += drh[static_cast<std::size_t>(i)] * r[i];
      ar[i] = dr * r[i] * (1.0 - r[i]);
    }
    matvec_t_add(p.uz, az, carry_next.data());
    matvec_t_add(p.ur, ar, carry_next.data());
    carry.swap(carry_next);
  }

  add_into(gp.wz, matmul_tn(daz, input));
  add_into(gp.wr, matmul_tn(dar, input));
  add_into(gp.wh, matmul_tn(dah, input));
  add_into(gp.uz, matmul_tn(daz, h_prev_seq));
  add_into(gp.ur, matmul_tn(dar, h_prev_seq));
  add_into(gp.uh, matmul_tn(dah, rh_seq));
  col_sum_add(gp.bz, daz);
  col_sum_add(gp.br, dar);
  col_sum_add(gp.bh, dah);

  Matrix dinput = matmul(daz, p.wz);
  add_into(dinput, matmul(dar, p.wr));
  add_into(dinput, matmul(dah, p.wh));
  return dinput;
}

Matrix bigru_layer_backward(const Matrix& input, const GruLayerParams& p,
                            const std::array<GruDirCache, 2>& caches, const Matrix& dout,
                            GruLayerParams& gp) {
  const std::size_t frames = input.rows();

  Matrix dout_fwd(frames, kGruHidden);
  Matrix dout_bwd_rev(frames, kGruHidden);  // reversed time, matching the bwd cache
  for (std::size_t t = 0; t < frames; ++t) {
    const double* row = dout.row(t);
    double* f = dout_fwd.row(t);
    double* b = dout_bwd_rev.row(frames - 1 - t);
    for (int i = 0; i < kGruHidden; ++i) {
      f[i] = row[i];
      b[i] = row[kGruHidden + i];
    }
  }

  Matrix dinput = gru_dir_backward(input, p[0], caches[0], dout_fwd, gp[0]);
  const Matrix dinput_rev =
      gru_dir_backward(reverse_rows(input), p[1], caches[1], dout_bwd_rev, gp[1]);
  add_into(dinput, reverse_rows(dinput_rev));
  return dinput;
}

}  // namespace

void validate(const TrainConfig& config) {
  if (config.epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
  if (config.batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (config.learning_rate < 0.0 || !std::isfinite(config.learning_rate)) {
    throw std::invalid_argument("config: learning_rate must be >= 0");
  }
  if (config.beta1 < 0.0 || config.beta1 >= 1.0 || config.beta2 < 0.0 || config.beta2 >= 1.0) {
    throw std::invalid_argument("config: betas must be in [0, 1)");
  }
  if (config.epsilon <= 0.0) throw std::invalid_argument("config: epsilon must be > 0");
  if (config.threads < 0) throw std::invalid_argument("config: threads must be >= 0");
}

AdamState zero_adam_state() {
  AdamState state;
  state.m = zero_params();
  state.v = zero_params();
  return state;
}

double bce_loss(const std::array<double, kNumTags>& posterior, const TagLabel& label) {
  double loss = 0.0;
  for (int e = 0; e < kNumTags; ++e) {
    const double q =
        std::clamp(posterior[static_cast<std::size_t>(e)], kLogClamp, 1.0 - kLogClamp);
    const double p = label.bits[static_cast<std::size_t>(e)] ? 1.0 : 0.0;
    loss -= p * std::log(q) + (1.0 - p) * std::log(1.0 - q);
  }
  return loss;
}

BackwardResult backward_from_trace(const ForwardTrace& trace, const TagLabel& label,
                                   const ModelParams& params) {
  const std::size_t frames = trace.frames();
  const ModelMode mode = trace.mode;

  BackwardResult result;
  result.grads = zero_params();
  Gradients& g = result.grads;

  // Loss and d(loss)/d(o'') with the clamp folded in (zero slope if clamped).
  std::array<double, kNumTags> d_final{};
  for (int e = 0; e < kNumTags; ++e) {
    const double raw = trace.o_final[static_cast<std::size_t>(e)];
    const double q = std::clamp(raw, kLogClamp, 1.0 - kLogClamp);
    const double p = label.bits[static_cast<std::size_t>(e)] ? 1.0 : 0.0;
    result.loss -= p * std::log(q) + (1.0 - p) * std::log(1.0 - q);
    d_final[static_cast<std::size_t>(e)] = (raw == q) ? (q - p) / (q * (1.0 - q)) : 0.0;
  }

  Matrix d_o(frames, kNumTags);
  std::vector<double> d_att(frames, 0.0);
  Matrix d_loc;

  if (mode == ModelMode::kAttLoc) {
    // o''_e = N_e / max(S_e, guard) with N_e = sum_t o'(t), S_e = sum_t z_loc.
    std::array<double, kNumTags> d_numer{}, d_denom{};
    for (int e = 0; e < kNumTags; ++e) {
      const double s = trace.loc_sum[static_cast<std::size_t>(e)];
      const double denom = std::max(s, kDenomGuard);
      double numer = 0.0;
      for (std::size_t t = 0; t < frames; ++t) numer += trace.o_gated(t, static_cast<std::size_t>(e));
      d_numer[static_cast<std::size_t>(e)] = d_final[static_cast<std::size_t>(e)] / denom;
      d_denom[static_cast<std::size_t>(e)] =
          (s >= kDenomGuard)
              ? -d_final[static_cast<std::size_t>(e)] * numer / (denom * denom)
              : 0.0;
    }
    d_loc = Matrix(frames, kNumTags);
    for (std::size_t t = 0; t < frames; ++t) {
      const double att = trace.z_att[t];
      const double* o = trace.o.row(t);
      const double* loc = trace.z_loc.row(t);
      double* dor = d_o.row(t);
      double* dlr = d_loc.row(t);
      double datt = 0.0;
      for (int e = 0; e < kNumTags; ++e) {
        const double dg = d_numer[static_cast<std::size_t>(e)];  // d loss / d o'(t,e)
        dor[e] = dg * att * loc[e];
        dlr[e] = dg * att * o[e] + d_denom[static_cast<std::size_t>(e)];
        datt += dg * o[e] * loc[e];
      }
      d_att[t] = datt;
    }
  } else {
    // o'' = (1/T) sum_t o(t)
    for (std::size_t t = 0; t < frames; ++t) {
      double* dor = d_o.row(t);
      for (int e = 0; e < kNumTags; ++e) {
        dor[e] = d_final[static_cast<std::size_t>(e)] / static_cast<double>(frames);
      }
    }
  }

  // o = sigmoid(s)
  Matrix ds(frames, kNumTags);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double o = trace.o.data()[i];
    ds.data()[i] = d_o.data()[i] * o * (1.0 - o);
  }

  // s = fnn out_w^T + out_b
  add_into(g.out_w, matmul_tn(ds, trace.fnn));
  col_sum_add(g.out_b, ds);
  Matrix d_fnn = matmul(ds, params.out_w);

  // fnn = relu(gru3 fnn_w^T + fnn_b); post-activation > 0 marks the pass-through
  for (std::size_t i = 0; i < d_fnn.size(); ++i) {
    if (trace.fnn.data()[i] <= 0.0) d_fnn.data()[i] = 0.0;
  }
  add_into(g.fnn_w, matmul_tn(d_fnn, trace.gru_out[kGruLayers - 1]));
  col_sum_add(g.fnn_b, d_fnn);
  Matrix d_seq = matmul(d_fnn, params.fnn_w);

  for (int layer = kGruLayers - 1; layer >= 0; --layer) {
    const Matrix& input =
        (layer == 0) ? trace.y_gated : trace.gru_out[static_cast<std::size_t>(layer - 1)];
    d_seq = bigru_layer_backward(input, params.gru[static_cast<std::size_t>(layer)],
                                 trace.gru[static_cast<std::size_t>(layer)], d_seq,
                                 g.gru[static_cast<std::size_t>(layer)]);
  }

  // y_gated = z_att . y_cnn (identity in baseline mode)
  Matrix d_y_cnn = std::move(d_seq);
  if (mode == ModelMode::kAttLoc) {
    for (std::size_t t = 0; t < frames; ++t) {
      double* row = d_y_cnn.row(t);
      d_att[t] += dot(row, trace.y_cnn.row(t), kCnnFilters);
      for (int i = 0; i < kCnnFilters; ++i) row[i] *= trace.z_att[t];
    }
  }

  // CNN: gradient flows to the winning conv position when the max is active.
  for (std::size_t t = 0; t < frames; ++t) {
    const double* x = trace.x.row(t);
    const double* dy = d_y_cnn.row(t);
    const int* argmax = trace.cnn_argmax.data() + t * kCnnFilters;
    for (int f = 0; f < kCnnFilters; ++f) {
      if (trace.y_cnn(t, static_cast<std::size_t>(f)) <= 0.0) continue;
      const double da = dy[f];
      if (da == 0.0) continue;
      const int pos = argmax[f];
      double* wrow = g.cnn_w.row(static_cast<std::size_t>(f));
      for (int k = 0; k < kCnnKernel; ++k) wrow[k] += da * x[pos + k];
      g.cnn_b(0, static_cast<std::size_t>(f)) += da;
    }
  }

  if (mode == ModelMode::kAttLoc) {
    // z_att = sigmoid(att_w x + att_b)
    double* aw = g.att_w.row(0);
    for (std::size_t t = 0; t < frames; ++t) {
      const double z = trace.z_att[t];
      const double du = d_att[t] * z * (1.0 - z);
      if (du == 0.0) continue;
      const double* x = trace.x.row(t);
      for (int j = 0; j < kMelBands; ++j) aw[j] += du * x[j];
      g.att_b(0, 0) += du;
    }

    // z_loc = softmax(loc_w x + loc_b), row-wise Jacobian
    for (std::size_t t = 0; t < frames; ++t) {
      const double* z = trace.z_loc.row(t);
      const double* dl = d_loc.row(t);
      const double* x = trace.x.row(t);
      double inner = 0.0;
      for (int e = 0; e < kNumTags; ++e) inner += dl[e] * z[e];
      for (int e = 0; e < kNumTags; ++e) {
        const double dv = z[e] * (dl[e] - inner);
        double* lw = g.loc_w.row(static_cast<std::size_t>(e));
        for (int j = 0; j < kMelBands; ++j) lw[j] += dv * x[j];
        g.loc_b(0, static_cast<std::size_t>(e)) += dv;
      }
    }
  }

  visit_tensors(g, [](const std::string& name, const Matrix& tensor, TensorKind) {
    if (!tensor.all_finite()) {
      throw NumericError("backward: non-finite gradient in tensor " + name);
    }
  });
  return result;
}

BackwardResult backward(const MelChunk& mel, const TagLabel& label, const ModelParams& params,
                        ModelMode mode) {
  return backward_from_trace(forward(mel, params, mode), label, params);
}

namespace {

std::vector<Matrix*> tensor_list(ModelParams& p) {
  std::vector<Matrix*> out;
  visit_tensors(p, [&](const std::string&, Matrix& t, TensorKind) { out.push_back(&t); });
  return out;
}

std::vector<const Matrix*> tensor_list(const ModelParams& p) {
  std::vector<const Matrix*> out;
  visit_tensors(p, [&](const std::string&, const Matrix& t, TensorKind) { out.push_back(&t); });
  return out;
}

std::vector<std::string> tensor_names(const ModelParams& p) {
  std::vector<std::string> out;
  visit_tensors(p, [&](const std::string& name, const Matrix&, TensorKind) { out.push_back(name); });
  return out;
}

}  // namespace

GradCheckReport verify_gradients(const Gradients& grads, const ModelParams& params,
                                 const MelChunk& mel, const TagLabel& label, ModelMode mode,
                                 double eps, int per_tensor) {
  ModelParams probe = params;  // mutable copy for the +/- eps evaluations
  const auto names = tensor_names(probe);
  const auto probe_tensors = tensor_list(probe);
  const auto grad_tensors = tensor_list(grads);

  GradCheckReport report;
  for (std::size_t ti = 0; ti < probe_tensors.size(); ++ti) {
    Matrix& tensor = *probe_tensors[ti];
    const Matrix& grad = *grad_tensors[ti];
    const std::size_t n = tensor.size();
    const std::size_t samples = std::min<std::size_t>(n, static_cast<std::size_t>(per_tensor));
    for (std::size_t k = 0; k < samples; ++k) {
      // Stratified midpoints: deterministic and spread over the tensor.
      const std::size_t idx = ((2 * k + 1) * n) / (2 * samples);
      const double backup = tensor.data()[idx];

      tensor.data()[idx] = backup + eps;
      const double loss_hi = bce_loss(forward(mel, probe, mode).o_final, label);
      tensor.data()[idx] = backup - eps;
      const double loss_lo = bce_loss(forward(mel, probe, mode).o_final, label);
      tensor.data()[idx] = backup;

      const double fd = (loss_hi - loss_lo) / (2.0 * eps);
      const double ga = grad.data()[idx];
      const double rel = std::abs(ga - fd) / std::max(1e-8, std::abs(ga) + std::abs(fd));
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_tensor = names[ti];
        report.worst_index = idx;
        report.analytic = ga;
        report.finite_diff = fd;
      }
    }
  }
  return report;
}

GradCheckReport grad_check(const ModelParams& params, const MelChunk& mel, const TagLabel& label,
                           ModelMode mode, double eps, int per_tensor) {
  const BackwardResult result = backward(mel, label, params, mode);
  return verify_gradients(result.grads, params, mel, label, mode, eps, per_tensor);
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               const TrainConfig& config) {
  const auto names = tensor_names(params);
  const auto p_list = tensor_list(params);
  const auto g_list = tensor_list(grads);
  const auto m_list = tensor_list(state.m);
  const auto v_list = tensor_list(state.v);

  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));

  for (std::size_t ti = 0; ti < p_list.size(); ++ti) {
    Matrix& theta = *p_list[ti];
    const Matrix& grad = *g_list[ti];
    Matrix& m = *m_list[ti];
    Matrix& v = *v_list[ti];
    if (grad.rows() != theta.rows() || grad.cols() != theta.cols()) {
      throw std::invalid_argument("adam_step: shape mismatch in tensor " + names[ti]);
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = grad.data()[i];
      m.data()[i] = config.beta1 * m.data()[i] + (1.0 - config.beta1) * gi;
      v.data()[i] = config.beta2 * v.data()[i] + (1.0 - config.beta2) * gi * gi;
      const double m_hat = m.data()[i] / bc1;
      const double v_hat = v.data()[i] / bc2;
      theta.data()[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

EvalResult evaluate(const ModelParams& params, const std::vector<LabeledChunk>& dataset,
                    ModelMode mode, int threads) {
  if (dataset.empty()) throw DataError("evaluate: empty dataset");
  const int workers = resolve_threads(threads);

  std::vector<std::array<double, kNumTags>> posteriors(dataset.size());
  std::vector<double> losses(dataset.size());
  parallel_for(dataset.size(), workers, [&](std::size_t i) {
    const ForwardTrace trace = forward(dataset[i].mel, params, mode);
    posteriors[i] = trace.o_final;
    losses[i] = bce_loss(trace.o_final, dataset[i].label);
  });

  EvalResult result;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    result.loss_mean += losses[i];
    for (int e = 0; e < kNumTags; ++e) {
      result.scores.add(e, posteriors[i][static_cast<std::size_t>(e)],
                        dataset[i].label.bits[static_cast<std::size_t>(e)]);
    }
  }
  result.loss_mean /= static_cast<double>(dataset.size());
  int defined = 0;
  double sum = 0.0;
  for (int e = 0; e < kNumTags; ++e) {
    result.eer_per_tag[static_cast<std::size_t>(e)] = eer(result.scores, e);
    if (result.eer_per_tag[static_cast<std::size_t>(e)]) {
      sum += *result.eer_per_tag[static_cast<std::size_t>(e)];
      ++defined;
    }
  }
  result.eer_avg = defined > 0 ? sum / defined : std::numeric_limits<double>::quiet_NaN();
  return result;
}

TrainResult train(const std::vector<LabeledChunk>& train_set,
                  const std::vector<LabeledChunk>& val_set, const TrainConfig& config,
                  ModelMode mode, const EpochCallback& on_epoch) {
  if (train_set.empty()) throw DataError("train: empty training set");
  if (val_set.empty()) throw DataError("train: empty validation set");
  validate(config);

  const Rng root(config.seed);
  Rng init_rng = root.derive(kInitStream);
  Rng shuffle_rng = root.derive(kShuffleStream);

  TrainResult result;
  result.params = init_params(init_rng);
  if (config.epochs == 0) return result;

  ModelParams params = result.params;
  AdamState state = zero_adam_state();
  const int workers = resolve_threads(config.threads);

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_eer = std::numeric_limits<double>::infinity();
  double best_loss = std::numeric_limits<double>::infinity();

  std::vector<BackwardResult> slots(static_cast<std::size_t>(workers));
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) {
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[shuffle_rng.below(i)]);
      }
    }

    double epoch_loss = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size), ++batch_index) {
      const std::size_t batch_n =
          std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                order.size() - start);

      Gradients acc = zero_params();
      double batch_loss = 0.0;
      // Waves of `workers` chunks; accumulation stays in chunk order so the
      // result is identical for any worker count.
      for (std::size_t base = 0; base < batch_n; base += static_cast<std::size_t>(workers)) {
        const std::size_t wave = std::min<std::size_t>(static_cast<std::size_t>(workers),
                                                       batch_n - base);
        parallel_for(wave, workers, [&](std::size_t k) {
          const LabeledChunk& chunk = train_set[order[start + base + k]];
          slots[k] = backward(chunk.mel, chunk.label, params, mode);
        });
        for (std::size_t k = 0; k < wave; ++k) {
          batch_loss += slots[k].loss;
          const auto src = tensor_list(static_cast<const ModelParams&>(slots[k].grads));
          const auto dst = tensor_list(acc);
          for (std::size_t ti = 0; ti < src.size(); ++ti) add_into(*dst[ti], *src[ti]);
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           " batch " + std::to_string(batch_index));
      }
      epoch_loss += batch_loss;

      // Batch gradient is the mean over the chunks.
      const double inv = 1.0 / static_cast<double>(batch_n);
      for (Matrix* t : tensor_list(acc)) {
        for (std::size_t i = 0; i < t->size(); ++i) t->data()[i] *= inv;
      }
      if (config.clip_gradients) {
        double sq = 0.0;
        for (const Matrix* t : tensor_list(static_cast<const ModelParams&>(acc))) {
          for (std::size_t i = 0; i < t->size(); ++i) sq += t->data()[i] * t->data()[i];
        }
        const double norm = std::sqrt(sq);
        if (norm > kClipNorm) {
          const double scale = kClipNorm / norm;
          for (Matrix* t : tensor_list(acc)) {
            for (std::size_t i = 0; i < t->size(); ++i) t->data()[i] *= scale;
          }
        }
      }
      adam_step(params, acc, state, config);
    }

    const EvalResult val = evaluate(params, val_set, mode, workers);
    EpochStats stats;
    stats.train_loss = epoch_loss / static_cast<double>(train_set.size());
    stats.val_loss = val.loss_mean;
    stats.val_eer = val.eer_per_tag;
    stats.val_eer_avg = val.eer_avg;
    result.log.push_back(stats);
    if (on_epoch) on_epoch(epoch, stats);

    // Best checkpoint by validation EER; falls back to validation loss while
    // no tag has a defined EER. Strict improvement keeps the earliest epoch.
    bool better = false;
    if (!std::isnan(val.eer_avg)) {
      better = val.eer_avg < best_eer;
      if (better) best_eer = val.eer_avg;
    } else if (std::isinf(best_eer)) {
      better = val.loss_mean < best_loss;
      if (better) best_loss = val.loss_mean;
    }
    if (better) {
      result.params = params;
      result.best_epoch = epoch;
    }
  }
  return result;
}

}  // namespace attloc
