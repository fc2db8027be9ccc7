#include "asc/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "asc/augment.hpp"
#include "asc/budget.hpp"
#include "asc/bytes.hpp"
#include "asc/error.hpp"
#include "asc/frontend.hpp"
#include "asc/model.hpp"
#include "asc/training.hpp"
#include "asc/wav.hpp"

namespace fs = std::filesystem;

namespace asc::cli {

namespace {

std::shared_ptr<spdlog::logger> g_log;

spdlog::logger* logger() { return g_log.get(); }

// Diagnostics go to the caller's error stream; ASC_LOG picks the level.
void init_logger(std::ostream& err) {
  g_log = std::make_shared<spdlog::logger>("asc", std::make_shared<spdlog::sinks::ostream_sink_mt>(err));
  g_log->set_pattern("asc: %l: %v");
  const char* env = std::getenv("ASC_LOG");
  const std::string level = env ? env : "info";
  g_log->set_level(level == "debug" ? spdlog::level::debug
                   : level == "error" ? spdlog::level::err
                                      : spdlog::level::info);
}

ModelConfig config_or_default(const std::string& path) {
  return path.empty() ? default_model_config() : load_model_config(path);
}

std::string output_path(const std::string& out_dir, const std::string& input, const std::string& ext) {
  fs::path name = fs::path(input).filename();
  if (!ext.empty()) name.replace_extension(ext);
  return (fs::path(out_dir) / name).string();
}

// Runs body(i) for i in [0, n) on `jobs` threads. The first failure (by
// index) is rethrown after every file has been attempted.
template <typename F>
void for_each_file(std::size_t n, int jobs, F body) {
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for num_threads(std::max(1, jobs)) schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Bytes read_input(const std::string& path, std::istream& in) {
  if (path != "-") return read_file(path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

bool is_melf(std::span<const std::uint8_t> b) { return b.size() >= 4 && std::equal(b.begin(), b.begin() + 4, "MELF"); }

// ---- subcommands ----

struct FeaturesArgs {
  std::vector<std::string> inputs;
  std::string out, out_dir, config;
  int jobs = 1;
};

int cmd_features(const FeaturesArgs& a) {
  if (a.inputs.size() > 1 && a.out_dir.empty()) throw InputError("several inputs need --out-dir");
  if (a.out.empty() == a.out_dir.empty()) throw InputError("give exactly one of --out or --out-dir");
  const ModelConfig cfg = config_or_default(a.config);
  const FeatureExtractor fx(cfg.frontend);
  if (!a.out_dir.empty()) fs::create_directories(a.out_dir);
  for_each_file(a.inputs.size(), a.jobs, [&](std::size_t i) {
    const std::string& in = a.inputs[i];
    Waveform wave;
    try {
      wave = decode_wav(read_file(in));
    } catch (const Error& e) {
      throw InputError(in + ": " + e.what());
    }
    const FeatureMap f = fx(wave);
    const std::string dst = a.out.empty() ? output_path(a.out_dir, in, ".melf") : a.out;
    write_file_atomic(dst, encode_melf(f.values));
    logger()->debug("{} -> {} [{}x{}]", in, dst, f.n_mels(), f.n_frames());
  });
  logger()->info("extracted {} feature file(s)", a.inputs.size());
  return 0;
}

struct AverageArgs {
  std::string manifest, audio_root = ".", out_dir, config;
};

int cmd_average(const AverageArgs& a) {
  const ModelConfig cfg = config_or_default(a.config);
  const auto bytes = read_file(a.manifest);
  const DatasetManifest m = load_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  const FeatureExtractor fx(cfg.frontend);
  std::map<std::size_t, std::vector<FeatureMap>> by_label;
  for (const auto& row : m.rows) {
    const std::string path = (fs::path(a.audio_root) / row.filename).string();
    try {
      by_label[row.label].push_back(fx(decode_wav(read_file(path))));
    } catch (const Error& e) {
      throw InputError(path + ": " + e.what());
    }
  }
  fs::create_directories(a.out_dir);
  for (const auto& [label, feats] : by_label) {
    const std::string dst = (fs::path(a.out_dir) / (std::string(kSceneLabels[label]) + ".melf")).string();
    write_file_atomic(dst, encode_melf(class_average(feats).values));
    logger()->info("{}: {} clip(s) -> {}", kSceneLabels[label], feats.size(), dst);
  }
  return 0;
}

struct AugmentArgs {
  std::vector<std::string> inputs;
  std::string out_dir, ir_dir;
  std::uint64_t seed = 0;
  int jobs = 1;
  AugmentConfig aug;
};

int cmd_augment(const AugmentArgs& a) {
  a.aug.validate();
  fs::create_directories(a.out_dir);
  std::vector<Bytes> raw(a.inputs.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = read_file(a.inputs[i]);
  const bool melf = !raw.empty() && is_melf(raw.front());
  for (const auto& r : raw) {
    if (is_melf(r) != melf) throw InputError("augment inputs must be all WAV or all MELF");
  }
  logger()->info("augment: seed={} rng={} inputs={}", a.seed, Rng::kAlgorithm, raw.size());
  const Rng master(a.seed);

  if (!melf) {
    if (a.ir_dir.empty()) throw InputError("waveform augmentation needs --ir-dir");
    std::vector<Waveform> irs;
    for (const auto& p : list_impulse_responses(a.ir_dir)) irs.push_back(decode_wav(read_file(p)));
    if (irs.empty()) throw InputError("no .wav impulse responses in " + a.ir_dir);
    for_each_file(raw.size(), a.jobs, [&](std::size_t i) {
      Rng rng = master.split(i);
      Waveform wave;
      try {
        wave = decode_wav(raw[i]);
      } catch (const Error& e) {
        throw InputError(a.inputs[i] + ": " + e.what());
      }
      const Waveform& ir = irs[pick_impulse_response(irs.size(), rng)];
      write_file_atomic(output_path(a.out_dir, a.inputs[i], ""), encode_wav(dir_convolve(wave, ir, rng, a.aug)));
    });
    return 0;
  }

  // Feature files: Freq-MixStyle over the whole batch from the master
  // stream, then a frequency mask per file from that file's own stream.
  std::vector<FeatureMap> batch;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    try {
      FeatureMap f{decode_melf(raw[i]), FrontendConfig{}};
      f.config.n_mels = f.n_mels();
      batch.push_back(std::move(f));
    } catch (const Error& e) {
      throw InputError(a.inputs[i] + ": " + e.what());
    }
  }
  a.aug.validate(batch.front().n_mels());
  Rng rng = master;
  const std::vector<FeatureMap> mixed = freq_mixstyle(batch, rng, a.aug);
  for_each_file(mixed.size(), a.jobs, [&](std::size_t i) {
    Rng file_rng = master.split(i);
    const FreqMaskResult masked = freq_mask(mixed[i], file_rng, a.aug);
    write_file_atomic(output_path(a.out_dir, a.inputs[i], ""), encode_melf(masked.feature.values));
  });
  return 0;
}

struct TrainArgs {
  std::string config, manifest, audio_root = ".", out, history, ir_dir, dtype = "f32";
  TrainConfig tcfg;
  AugmentConfig aug;
};

int cmd_train(const TrainArgs& a) {
  const ModelConfig cfg = config_or_default(a.config);
  if (cfg.n_classes != kSceneLabels.size()) {
    throw ConfigError("training on the scene manifest needs n_classes = " + std::to_string(kSceneLabels.size()));
  }
  const auto bytes = read_file(a.manifest);
  const DatasetManifest m = load_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  TrainOptions opts;
  if (!a.ir_dir.empty()) {
    for (const auto& p : list_impulse_responses(a.ir_dir)) opts.impulse_responses.push_back(decode_wav(read_file(p)));
  }
  std::string history;
  opts.on_epoch = [&](const EpochStats& s) {
    history += epoch_to_json(s) + "\n";
    logger()->info("epoch {} lr={:.3g} loss={:.4f} acc={:.3f}", s.epoch, s.lr, s.loss, s.acc);
  };
  logger()->info("train: seed={} rows={} epochs={} batch={}", a.tcfg.seed, m.rows.size(), a.tcfg.epochs,
                 a.tcfg.batch_size);
  const TrainResult r = train(cfg, a.tcfg, m, a.audio_root, a.aug, opts);
  const Bytes w = a.dtype == "f16" ? save_weights(quantize_f16(r.weights)) : save_weights(r.weights, StorageType::kF32);
  write_file_atomic(a.out, w);
  if (!a.history.empty()) write_file_atomic(a.history, history);
  return 0;
}

struct ClassifyArgs {
  std::string model, config, input;
};

int cmd_classify(const ClassifyArgs& a, std::istream& in, std::ostream& out) {
  const ModelConfig cfg = config_or_default(a.config);
  if (cfg.n_classes != kSceneLabels.size()) {
    throw ConfigError("classify maps logits onto the " + std::to_string(kSceneLabels.size()) + " scene labels");
  }
  const LoadedWeights w = load_weights(read_file(a.model));
  const Bytes bytes = read_input(a.input, in);
  Tensor feature;
  if (is_melf(bytes)) {
    feature = decode_melf(bytes);
  } else {
    feature = FeatureExtractor(cfg.frontend)(decode_wav(bytes)).values;
  }
  const Tensor probs = softmax(forward(cfg, w.weights, feature));
  const std::size_t best = argmax(probs.data());
  out << kSceneLabels[best] << '\t' << probs[best] << '\n';
  return 0;
}

int cmd_audit(const std::string& config, int precision, std::ostream& out) {
  const ComplexityReport r = audit(config_or_default(config), precision);
  out << report_to_json(r) << '\n';
  if (!r.passes()) logger()->error("complexity limits exceeded (memory {} B, {} MACs)", r.memory_bytes, r.mac_count);
  return r.passes() ? 0 : 1;
}

int cmd_quantize(const std::string& in, const std::string& out, const std::string& config) {
  const LoadedWeights w = load_weights(read_file(in));
  if (!config.empty()) validate_weights(load_model_config(config), w.weights);
  const QuantizedWeightStore q = quantize_f16(w.weights);
  write_file_atomic(out, save_weights(q));
  logger()->info("quantized {} tensor(s) to binary16", q.size());
  return 0;
}

void add_augment_flags(CLI::App* app, AugmentConfig& aug) {
  app->add_option("--fm-max-width", aug.fm_max_width, "frequency mask maximum width (mel bins)");
  app->add_option("--fm-num-masks", aug.fm_num_masks, "frequency masks per feature");
  app->add_option("--fm-prob", aug.fm_prob, "frequency masking probability");
  app->add_option("--fms-alpha", aug.fms_alpha, "Freq-MixStyle Beta(alpha, alpha) parameter");
  app->add_option("--fms-prob", aug.fms_prob, "Freq-MixStyle probability per batch");
  app->add_option("--dir-prob", aug.dir_prob, "impulse response convolution probability");
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  init_logger(err);
  CLI::App app{"Low-complexity acoustic scene classification", "asc"};
  app.require_subcommand(1);

  FeaturesArgs fa;
  auto* features = app.add_subcommand("features", "WAV -> log-mel MELF");
  features->add_option("--in", fa.inputs, "input WAV file(s)")->required()->check(CLI::ExistingFile);
  features->add_option("--out", fa.out, "output MELF (single input)");
  features->add_option("--out-dir", fa.out_dir, "output directory (one .melf per input)");
  features->add_option("--config", fa.config, "model config JSON (its front-end is used)");
  features->add_option("--jobs", fa.jobs, "parallel files")->check(CLI::PositiveNumber);

  AverageArgs va;
  auto* average = app.add_subcommand("average", "per-scene mean log-mel over a manifest");
  average->add_option("--manifest", va.manifest, "TSV manifest")->required()->check(CLI::ExistingFile);
  average->add_option("--audio-root", va.audio_root, "directory the manifest paths are relative to");
  average->add_option("--out-dir", va.out_dir, "one <scene>.melf per label")->required();
  average->add_option("--config", va.config, "model config JSON");

  AugmentArgs ga;
  auto* augment = app.add_subcommand("augment", "seeded augmentation of WAV (impulse responses) or MELF files");
  augment->add_option("--in", ga.inputs, "input WAV or MELF files")->required()->check(CLI::ExistingFile);
  augment->add_option("--out-dir", ga.out_dir, "output directory")->required();
  augment->add_option("--ir-dir", ga.ir_dir, "directory of impulse response WAVs")->check(CLI::ExistingDirectory);
  augment->add_option("--seed", ga.seed, "master seed (file i uses seed XOR i)");
  augment->add_option("--jobs", ga.jobs, "parallel files")->check(CLI::PositiveNumber);
  add_augment_flags(augment, ga.aug);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train from a manifest");
  train_cmd->add_option("--config", ta.config, "model config JSON");
  train_cmd->add_option("--manifest", ta.manifest, "TSV manifest")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--audio-root", ta.audio_root, "directory the manifest paths are relative to");
  train_cmd->add_option("--out", ta.out, "output weights file")->required();
  train_cmd->add_option("--history", ta.history, "per-epoch JSON lines");
  train_cmd->add_option("--ir-dir", ta.ir_dir, "impulse responses for augmentation")->check(CLI::ExistingDirectory);
  train_cmd->add_option("--dtype", ta.dtype, "stored precision")->check(CLI::IsMember({"f32", "f16"}));
  train_cmd->add_option("--epochs", ta.tcfg.epochs);
  train_cmd->add_option("--batch-size", ta.tcfg.batch_size);
  train_cmd->add_option("--lr", ta.tcfg.lr_max, "peak learning rate");
  train_cmd->add_option("--warmup", ta.tcfg.warmup_epochs, "warmup epochs");
  train_cmd->add_option("--label-smoothing", ta.tcfg.label_smoothing);
  train_cmd->add_flag("--per-step", ta.tcfg.per_step_schedule, "update the learning rate every step");
  train_cmd->add_option("--seed", ta.tcfg.seed);
  add_augment_flags(train_cmd, ta.aug);

  ClassifyArgs ca;
  auto* classify = app.add_subcommand("classify", "print \"label<TAB>probability\" for one clip");
  classify->add_option("--model", ca.model, "weights file")->required()->check(CLI::ExistingFile);
  classify->add_option("--config", ca.config, "model config JSON");
  classify->add_option("--in", ca.input, "WAV or MELF file, or - for standard input")->required();

  std::string audit_config;
  int precision = 16;
  auto* audit_cmd = app.add_subcommand("audit", "parameter, MAC and memory report as JSON");
  audit_cmd->add_option("--config", audit_config, "model config JSON (default: shipped config)");
  audit_cmd->add_option("--precision", precision, "bits per parameter")->check(CLI::IsMember({16, 32}));

  std::string q_in, q_out, q_config;
  auto* quantize = app.add_subcommand("quantize", "convert a weights file to binary16");
  quantize->add_option("--in", q_in, "input weights")->required()->check(CLI::ExistingFile);
  quantize->add_option("--out", q_out, "output weights")->required();
  quantize->add_option("--config", q_config, "validate tensor names and shapes against this config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // Help for the deepest subcommand that was named on the command line.
      const CLI::App* target = &app;
      for (const auto* sub : app.get_subcommands()) target = sub;
      out << target->help();
      return 0;
    }
    err << "asc: " << e.what() << "\n" << "Run with --help for usage.\n";
    return 2;
  }

  try {
    if (*features) return cmd_features(fa);
    if (*average) return cmd_average(va);
    if (*augment) return cmd_augment(ga);
    if (*train_cmd) return cmd_train(ta);
    if (*classify) return cmd_classify(ca, in, out);
    if (*audit_cmd) return cmd_audit(audit_config, precision, out);
    if (*quantize) return cmd_quantize(q_in, q_out, q_config);
  } catch (const Error& e) {
    err << "asc: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "asc: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cin, std::cout, std::cerr); }

}  // namespace asc::cli
