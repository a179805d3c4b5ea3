#include "attloc/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "attloc/checkpoint.hpp"
#include "attloc/data.hpp"
#include "attloc/errors.hpp"
#include "attloc/metrics.hpp"
#include "attloc/model.hpp"
#include "attloc/train.hpp"

namespace attloc {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config file (key=value, '#' comments); flags override afterwards.
// ---------------------------------------------------------------------------

struct RunConfig {
  TrainConfig train;
  std::string mode = "attloc";
  double snr_db = 10.0;
  std::string manifest;
  std::string val_manifest;
  std::string out;
};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw UsageError("config: key '" + key + "' needs an integer, got '" + value + "'");
  }
}

double parse_float(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw UsageError("config: key '" + key + "' needs a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw UsageError("config: key '" + key + "' needs true/false, got '" + value + "'");
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open " + path);

  RunConfig rc;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config: line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "epochs") rc.train.epochs = static_cast<int>(parse_int(key, value));
    else if (key == "batch_size") rc.train.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "learning_rate") rc.train.learning_rate = parse_float(key, value);
    else if (key == "beta1") rc.train.beta1 = parse_float(key, value);
    else if (key == "beta2") rc.train.beta2 = parse_float(key, value);
    else if (key == "epsilon") rc.train.epsilon = parse_float(key, value);
    else if (key == "seed") rc.train.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "shuffle") rc.train.shuffle = parse_bool(key, value);
    else if (key == "clip_gradients") rc.train.clip_gradients = parse_bool(key, value);
    else if (key == "threads") rc.train.threads = static_cast<int>(parse_int(key, value));
    else if (key == "mode") rc.mode = value;
    else if (key == "snr_db") rc.snr_db = parse_float(key, value);
    else if (key == "manifest") rc.manifest = value;
    else if (key == "val_manifest") rc.val_manifest = value;
    else if (key == "out") rc.out = value;
    else throw UsageError("config: line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  return rc;
}

// ---------------------------------------------------------------------------
// Shared output helpers
// ---------------------------------------------------------------------------

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << content;
  if (!out) throw DataError("write failed for " + path);
}

std::string eval_csv(const std::array<std::optional<double>, kNumTags>& per_tag, double avg) {
  std::string csv = "tag,eer\n";
  for (int e = 0; e < kNumTags; ++e) {
    const auto& v = per_tag[static_cast<std::size_t>(e)];
    csv += std::string(1, kTagLetters[static_cast<std::size_t>(e)]) + ",";
    csv += v ? fmt(*v) : "nan";
    csv += "\n";
  }
  csv += "ave," + fmt(avg) + "\n";
  return csv;
}

std::string train_log_csv(const std::vector<EpochStats>& log) {
  std::string csv = "epoch,train_loss,val_loss";
  for (int e = 0; e < kNumTags; ++e) {
    csv += ",val_eer_";
    csv += kTagLetters[static_cast<std::size_t>(e)];
  }
  csv += ",val_eer_avg\n";
  for (std::size_t i = 0; i < log.size(); ++i) {
    csv += std::to_string(i + 1) + "," + fmt(log[i].train_loss) + "," + fmt(log[i].val_loss);
    for (const auto& v : log[i].val_eer) {
      csv += ",";
      csv += v ? fmt(*v) : "nan";
    }
    csv += "," + fmt(log[i].val_eer_avg) + "\n";
  }
  return csv;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

void cmd_synth(const std::string& out_dir, int chunks, std::uint64_t seed, double snr_db) {
  Rng rng(seed);
  const auto corpus = synth_corpus(rng, chunks, snr_db);
  save_corpus(corpus, out_dir);
  std::size_t intervals = 0;
  for (const auto& c : corpus) intervals += c.truth.size();
  std::cout << "wrote " << corpus.size() << " chunks (" << intervals << " event intervals) to "
            << out_dir << "\n";
}

void cmd_train(const RunConfig& rc, const std::string& log_path) {
  const ModelMode mode = mode_from_string(rc.mode);

  const Manifest train_manifest = parse_manifest(rc.manifest);
  const Manifest val_manifest = parse_manifest(rc.val_manifest);

  // Normalization is fitted on the training split only.
  std::vector<LabeledChunk> train_set = load_dataset(train_manifest);
  std::vector<MelChunk> mels;
  mels.reserve(train_set.size());
  for (const auto& c : train_set) mels.push_back(c.mel);
  const NormStats stats = fit_norm(mels);
  for (auto& c : train_set) c.mel = apply_norm(c.mel, stats);
  const std::vector<LabeledChunk> val_set = load_dataset(val_manifest, &stats);

  const TrainResult result =
      train(train_set, val_set, rc.train, mode, [](int epoch, const EpochStats& s) {
        std::cout << "epoch " << epoch << ": train_loss=" << fmt(s.train_loss)
                  << " val_loss=" << fmt(s.val_loss) << " val_eer_avg=" << fmt(s.val_eer_avg)
                  << "\n"
                  << std::flush;
      });

  save_checkpoint(rc.out, Checkpoint{stats, mode, result.params});
  const std::string log_file = log_path.empty() ? rc.out + ".train.csv" : log_path;
  write_text(log_file, train_log_csv(result.log));
  std::cout << "best epoch " << result.best_epoch << "; checkpoint " << rc.out << "; log "
            << log_file << "\n";
}

void cmd_eval(const std::string& ckpt_path, const std::string& manifest_path,
              const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Manifest manifest = parse_manifest(manifest_path);
  const std::vector<LabeledChunk> dataset = load_dataset(manifest, &ckpt.norm);
  const EvalResult result = evaluate(ckpt.params, dataset, ckpt.mode);

  for (int e = 0; e < kNumTags; ++e) {
    if (!result.eer_per_tag[static_cast<std::size_t>(e)]) {
      std::cerr << "warning: tag '" << kTagLetters[static_cast<std::size_t>(e)]
                << "' has a single class; EER undefined, excluded from the average\n";
    }
  }
  const std::string csv = eval_csv(result.eer_per_tag, result.eer_avg);
  std::cout << csv;
  if (!out_path.empty()) write_text(out_path, csv);
}

void cmd_localize(const std::string& ckpt_path, const std::string& wav_path,
                  const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const MelChunk mel = apply_norm(featurize(read_wav(wav_path)), ckpt.norm);
  const ForwardTrace trace = forward(mel, ckpt.params, ckpt.mode);

  std::string csv = "frame,z_att";
  for (int e = 0; e < kNumTags; ++e) {
    csv += ",z_loc_";
    csv += kTagLetters[static_cast<std::size_t>(e)];
  }
  for (int e = 0; e < kNumTags; ++e) {
    csv += ",o_";
    csv += kTagLetters[static_cast<std::size_t>(e)];
  }
  csv += "\n";
  for (std::size_t t = 0; t < trace.frames(); ++t) {
    csv += std::to_string(t) + "," + fmt(trace.z_att[t], "%.9g");
    for (int e = 0; e < kNumTags; ++e) {
      csv += "," + fmt(trace.z_loc(t, static_cast<std::size_t>(e)), "%.9g");
    }
    for (int e = 0; e < kNumTags; ++e) {
      csv += "," + fmt(trace.o(t, static_cast<std::size_t>(e)), "%.9g");
    }
    csv += "\n";
  }
  write_text(out_path, csv);
  std::cout << "wrote " << trace.frames() << " frames to " << out_path << "\n";
}

int cmd_gradcheck(std::uint64_t seed, int frames) {
  const Rng root(seed);

  // A short synthetic scene, featurized and standardized like training data.
  Rng corpus_rng = root.derive(100);
  const auto corpus = synth_corpus(corpus_rng, 8, 10.0);
  std::vector<MelChunk> mels;
  mels.reserve(corpus.size());
  for (const auto& c : corpus) mels.push_back(featurize(c.audio));
  const NormStats stats = fit_norm(mels);
  const MelChunk full = apply_norm(mels[0], stats);

  Matrix mel(static_cast<std::size_t>(frames), kMelBands);
  for (int t = 0; t < frames; ++t) {
    for (int m = 0; m < kMelBands; ++m) {
      mel(static_cast<std::size_t>(t), static_cast<std::size_t>(m)) =
          full(static_cast<std::size_t>(t), static_cast<std::size_t>(m));
    }
  }

  Rng param_rng = root.derive(101);
  const ModelParams params = init_params(param_rng);
  const TagLabel label = corpus[0].label;

  double worst = 0.0;
  for (const ModelMode mode : {ModelMode::kBaseline, ModelMode::kAttLoc}) {
    const GradCheckReport report = grad_check(params, mel, label, mode);
    std::cout << "gradcheck " << to_string(mode) << ": max_rel_err=" << fmt(report.max_rel_err, "%.3e")
              << " worst=" << report.worst_tensor << "[" << report.worst_index << "]"
              << " analytic=" << fmt(report.analytic, "%.6e")
              << " fd=" << fmt(report.finite_diff, "%.6e") << " coords=" << report.coords_checked
              << "\n";
    worst = std::max(worst, report.max_rel_err);
  }
  std::cout << "gradcheck: max relative error " << fmt(worst, "%.3e") << " (threshold 1e-4)\n";
  return worst < 1e-4 ? 0 : 3;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"weakly-supervised audio tagger with attention and localization"};
  app.require_subcommand(1);
  int exit_code = 0;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  std::string synth_out;
  int synth_chunks = 0;
  std::uint64_t synth_seed = 0;
  double synth_snr = 10.0;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--chunks", synth_chunks, "number of chunks")->required()->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "corpus seed");
  synth->add_option("--snr-db", synth_snr, "event-to-background SNR in dB");
  synth->callback([&] { cmd_synth(synth_out, synth_chunks, synth_seed, synth_snr); });

  // train
  auto* tr = app.add_subcommand("train", "fit a model and write the best checkpoint");
  std::string tr_manifest, tr_val_manifest, tr_mode, tr_config, tr_out, tr_log;
  int tr_epochs = 0, tr_batch = 0, tr_threads = 0;
  double tr_lr = 0.0, tr_beta1 = 0.0, tr_beta2 = 0.0, tr_epsilon = 0.0;
  std::uint64_t tr_seed = 0;
  bool tr_shuffle = true, tr_clip = false;
  tr->add_option("--manifest", tr_manifest, "training manifest CSV");
  tr->add_option("--val-manifest", tr_val_manifest, "validation manifest CSV");
  tr->add_option("--mode", tr_mode, "baseline or attloc");
  tr->add_option("--config", tr_config, "key=value config file");
  tr->add_option("--out", tr_out, "checkpoint path");
  tr->add_option("--log", tr_log, "training log CSV (default <out>.train.csv)");
  tr->add_option("--epochs", tr_epochs);
  tr->add_option("--batch-size", tr_batch);
  tr->add_option("--lr", tr_lr);
  tr->add_option("--beta1", tr_beta1);
  tr->add_option("--beta2", tr_beta2);
  tr->add_option("--epsilon", tr_epsilon);
  tr->add_option("--seed", tr_seed);
  tr->add_option("--shuffle", tr_shuffle);
  tr->add_option("--threads", tr_threads);
  tr->add_flag("--clip", tr_clip, "enable L2 gradient clipping at 5.0");
  tr->callback([&] {
    RunConfig rc = tr_config.empty() ? RunConfig{} : load_run_config(tr_config);
    if (tr->count("--manifest")) rc.manifest = tr_manifest;
    if (tr->count("--val-manifest")) rc.val_manifest = tr_val_manifest;
    if (tr->count("--mode")) rc.mode = tr_mode;
    if (tr->count("--out")) rc.out = tr_out;
    if (tr->count("--epochs")) rc.train.epochs = tr_epochs;
    if (tr->count("--batch-size")) rc.train.batch_size = tr_batch;
    if (tr->count("--lr")) rc.train.learning_rate = tr_lr;
    if (tr->count("--beta1")) rc.train.beta1 = tr_beta1;
    if (tr->count("--beta2")) rc.train.beta2 = tr_beta2;
    if (tr->count("--epsilon")) rc.train.epsilon = tr_epsilon;
    if (tr->count("--seed")) rc.train.seed = tr_seed;
    if (tr->count("--shuffle")) rc.train.shuffle = tr_shuffle;
    if (tr->count("--threads")) rc.train.threads = tr_threads;
    if (tr->count("--clip")) rc.train.clip_gradients = tr_clip;
    if (rc.manifest.empty()) throw UsageError("train: --manifest is required");
    if (rc.val_manifest.empty()) throw UsageError("train: --val-manifest is required");
    if (rc.out.empty()) throw UsageError("train: --out is required");
    cmd_train(rc, tr_log);
  });

  // eval
  auto* ev = app.add_subcommand("eval", "per-tag EER over a labeled manifest");
  std::string ev_ckpt, ev_manifest, ev_out;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--manifest", ev_manifest, "manifest CSV")->required();
  ev->add_option("--out", ev_out, "also write the CSV here");
  ev->callback([&] { cmd_eval(ev_ckpt, ev_manifest, ev_out); });

  // localize
  auto* loc = app.add_subcommand("localize", "export the per-frame localization trace");
  std::string loc_ckpt, loc_wav, loc_out;
  loc->add_option("--ckpt", loc_ckpt, "checkpoint path")->required();
  loc->add_option("--wav", loc_wav, "input WAV (PCM16 mono 16 kHz)")->required();
  loc->add_option("--out", loc_out, "output CSV")->required();
  loc->callback([&] { cmd_localize(loc_ckpt, loc_wav, loc_out); });

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "verify gradients against finite differences");
  std::uint64_t gc_seed = 0;
  int gc_frames = 8;
  gc->add_option("--seed", gc_seed);
  gc->add_option("--frames", gc_frames)->check(CLI::Range(1, 124));
  gc->callback([&] { exit_code = cmd_gradcheck(gc_seed, gc_frames); });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return exit_code;
}

}  // namespace attloc
