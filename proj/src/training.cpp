#include "asc/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "asc/backward.hpp"
#include "asc/bytes.hpp"
#include "json.hpp"

namespace asc {

int scene_index(std::string_view label) {
  for (std::size_t i = 0; i < kSceneLabels.size(); ++i) {
    if (kSceneLabels[i] == label) return static_cast<int>(i);
  }
  return -1;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs > 0 && warmup_epochs >= epochs) throw ConfigError("warmup_epochs must be smaller than epochs");
  if (!(lr_max > 0.0)) throw ConfigError("lr_max must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (!(label_smoothing >= 0.0 && label_smoothing <= 0.2)) throw ConfigError("label_smoothing must lie in [0, 0.2]");
}

namespace {

double log_sum_exp(const Tensor& x) {
  const double m = *std::max_element(x.values().begin(), x.values().end());
  double s = 0.0;
  for (double v : x.values()) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

double cross_entropy(const Tensor& logits, std::size_t label, double label_smoothing) {
  if (logits.rank() != 1) throw ShapeError("cross_entropy expects rank-1 logits");
  if (label >= logits.size()) {
    throw InputError("label " + std::to_string(label) + " out of range for " + std::to_string(logits.size()) + " classes");
  }
  const double lse = log_sum_exp(logits);
  const double nll = lse - logits[label];
  if (label_smoothing == 0.0) return nll;
  double mean_nll = 0.0;
  for (double v : logits.values()) mean_nll += lse - v;
  mean_nll /= static_cast<double>(logits.size());
  return (1.0 - label_smoothing) * nll + label_smoothing * mean_nll;
}

Gradients backward(const ModelConfig& cfg, const WeightStore& w, const Tensor& feature, std::size_t label,
                   double label_smoothing) {
  const NetworkTrace tr = run_network(cfg, w, feature);
  Gradients out;
  out.logits = tr.logits;
  out.loss = cross_entropy(tr.logits, label, label_smoothing);
  WeightStore& g = out.grads;
  const auto W = [&](const std::string& n) -> const Tensor& { return w.at(n); };

  // dL/dlogits = softmax - target
  Tensor dlogits = softmax(tr.logits);
  const double k = static_cast<double>(dlogits.size());
  for (std::size_t i = 0; i < dlogits.size(); ++i) {
    dlogits[i] -= (i == label ? 1.0 - label_smoothing : 0.0) + label_smoothing / k;
  }

  auto head = grad::fusion_head(tr.sequence, tr.gru.output, W("branch.weight"), W("head.weight"), cfg.head_fusion,
                                dlogits);
  g["head.weight"] = std::move(head.dhead_w);
  g["head.bias"] = std::move(head.dhead_b);
  g["branch.weight"] = std::move(head.dconv_w);

  const GruParams gp{W("gru.w_z"), W("gru.w_r"), W("gru.w_h"), W("gru.u_z"), W("gru.u_r"),
                     W("gru.u_h"), W("gru.b_z"), W("gru.b_r"), W("gru.b_h")};
  auto gru = grad::gru_over_frequency(tr.sequence, gp, tr.gru, head.dgru_out);
  g["gru.w_z"] = std::move(gru.dw_z);
  g["gru.w_r"] = std::move(gru.dw_r);
  g["gru.w_h"] = std::move(gru.dw_h);
  g["gru.u_z"] = std::move(gru.du_z);
  g["gru.u_r"] = std::move(gru.du_r);
  g["gru.u_h"] = std::move(gru.du_h);
  g["gru.b_z"] = std::move(gru.db_z);
  g["gru.b_r"] = std::move(gru.db_r);
  g["gru.b_h"] = std::move(gru.db_h);

  Tensor dseq = std::move(gru.dx);
  for (std::size_t i = 0; i < dseq.size(); ++i) dseq[i] += head.dseq[i];

  const auto se_back = [&](const std::string& n, const Tensor& x, const Tensor& dy) {
    auto s = grad::se_block(x, W(n + ".fc1.weight"), W(n + ".fc1.bias"), W(n + ".fc2.weight"), W(n + ".fc2.bias"), dy);
    g[n + ".fc1.weight"] = std::move(s.dw1);
    g[n + ".fc1.bias"] = std::move(s.db1);
    g[n + ".fc2.weight"] = std::move(s.dw2);
    g[n + ".fc2.bias"] = std::move(s.db2);
    return std::move(s.dx);
  };

  const Tensor& last = tr.blocks.empty() ? tr.se0 : (tr.blocks.back().se.empty() ? tr.blocks.back().dw_freq
                                                                                  : tr.blocks.back().se);
  Tensor d = grad::time_mean(last.shape(), dseq);
  for (std::size_t i = cfg.blocks.size(); i-- > 0;) {
    const BlockTrace& b = tr.blocks[i];
    const ConvTSpec& spec = cfg.blocks[i];
    const std::string n = "block" + std::to_string(i);
    if (!b.se.empty()) d = se_back("se" + std::to_string(i + 1), b.dw_freq, d);
    d = grad::relu_backward(b.dw_freq, d);
    auto f = grad::depthwise_conv1d_freq(b.dw_time, W(n + ".dw_freq.weight"), spec.dw_multiplier, spec.freq_stride, d);
    g[n + ".dw_freq.weight"] = std::move(f.dw);
    d = grad::relu_backward(b.dw_time, f.dx);
    auto t = grad::depthwise_conv1d_time(b.shuffled, W(n + ".dw_time.weight"), d);
    g[n + ".dw_time.weight"] = std::move(t.dw);
    d = grad::channel_shuffle(t.dx, cfg.shuffle_groups);
    d = grad::relu_backward(b.pointwise, d);
    auto pw = grad::pointwise_conv(b.input, W(n + ".pw.weight"), d, true);
    g[n + ".pw.weight"] = std::move(pw.dw);
    g[n + ".pw.bias"] = std::move(pw.db);
    d = std::move(pw.dx);
  }
  d = se_back("se0", tr.pool, d);
  d = grad::hybrid_pool(tr.stem, d);
  auto stem = grad::conv2d_stem(tr.input, W("stem.weight"), tr.stem, d);
  g["stem.weight"] = std::move(stem.dw);
  g["stem.bias"] = std::move(stem.db);
  return out;
}

Gradients backward(const ModelConfig& cfg, const WeightStore& weights, const FeatureMap& feat, std::size_t label,
                   double label_smoothing) {
  return backward(cfg, weights, feat.values, label, label_smoothing);
}

double lr_at(std::size_t step, std::size_t total_steps, std::size_t warmup_steps, double lr_max) {
  if (warmup_steps >= total_steps) throw ConfigError("warmup_steps must be smaller than total_steps");
  if (step > total_steps) throw ConfigError("step exceeds total_steps");
  if (step < warmup_steps) return lr_max * static_cast<double>(step) / static_cast<double>(warmup_steps);
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return lr_max * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void adam_step(WeightStore& params, const WeightStore& grads, AdamState& state, double lr, const TrainConfig& cfg) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
  for (auto& [name, w] : params) {
    const auto git = grads.find(name);
    if (git == grads.end()) throw ShapeError("no gradient for parameter '" + name + "'");
    const Tensor& g = git->second;
    if (g.shape() != w.shape()) throw ShapeError("gradient shape mismatch for '" + name + "'");
    auto [mit, m_new] = state.first_moment.try_emplace(name, w.shape());
    auto [vit, v_new] = state.second_moment.try_emplace(name, w.shape());
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    if (m.shape() != w.shape() || v.shape() != w.shape()) throw ShapeError("Adam moment shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
      v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

// ---- manifest ----

std::array<std::size_t, kSceneLabels.size()> DatasetManifest::label_histogram() const {
  std::array<std::size_t, kSceneLabels.size()> h{};
  for (const auto& r : rows) ++h[r.label];
  return h;
}

namespace {

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    cols.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return cols;
}

}  // namespace

DatasetManifest load_manifest(std::string_view tsv) {
  DatasetManifest m;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos <= tsv.size()) {
    std::size_t end = tsv.find('\n', pos);
    if (end == std::string_view::npos) end = tsv.size();
    std::string_view line = tsv.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header_seen) {
      if (line != "filename\tscene_label\tdevice") {
        throw ManifestError(line_no, "expected header \"filename<TAB>scene_label<TAB>device\"");
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 3) throw ManifestError(line_no, "expected 3 columns, found " + std::to_string(cols.size()));
    const int label = scene_index(cols[1]);
    if (label < 0) throw ManifestError(line_no, "unknown scene label '" + cols[1] + "'");
    if (cols[0].empty()) throw ManifestError(line_no, "empty filename");
    m.rows.push_back({cols[0], static_cast<std::size_t>(label), cols[2]});
  }
  if (!header_seen) throw ManifestError(1, "missing header");
  return m;
}

// ---- training loop ----

std::string epoch_to_json(const EpochStats& s) {
  nlohmann::ordered_json j = {{"epoch", s.epoch}, {"lr", s.lr}, {"loss", s.loss}, {"acc", s.acc}};
  return j.dump();
}

TrainResult train(const ModelConfig& cfg, const TrainConfig& tcfg, const DatasetManifest& manifest,
                  const std::string& audio_root, const AugmentConfig& aug, const TrainOptions& opts) {
  std::vector<Waveform> waves;
  std::vector<std::size_t> labels;
  waves.reserve(manifest.rows.size());
  for (const auto& row : manifest.rows) {
    const std::string path = (std::filesystem::path(audio_root) / row.filename).string();
    try {
      waves.push_back(decode_wav(read_file(path)));
    } catch (const Error& e) {
      throw InputError(path + ": " + e.what());
    }
    labels.push_back(row.label);
  }
  return train_on_waveforms(cfg, tcfg, waves, labels, aug, opts);
}

TrainResult train_on_waveforms(const ModelConfig& cfg, const TrainConfig& tcfg, const std::vector<Waveform>& waves,
                               const std::vector<std::size_t>& labels, const AugmentConfig& aug,
                               const TrainOptions& opts) {
  cfg.validate();
  tcfg.validate();
  aug.validate(cfg.input_mels);
  if (waves.size() != labels.size()) throw InputError("one label per waveform required");
  for (auto l : labels) {
    if (l >= cfg.n_classes) throw InputError("label " + std::to_string(l) + " exceeds n_classes");
  }
  TrainResult result;
  result.weights = init_weights(cfg, tcfg.seed);
  if (tcfg.epochs == 0 || waves.empty()) return result;

  const FeatureExtractor extract(cfg.frontend);
  const bool use_dir = !opts.impulse_responses.empty() && aug.dir_prob > 0.0;
  std::vector<FeatureMap> clean;
  if (!use_dir) {
    clean.reserve(waves.size());
    for (const auto& w : waves) clean.push_back(extract(w));
  }
  const auto check_frames = [&](const FeatureMap& f) {
    if (f.n_frames() != cfg.input_frames) {
      throw ShapeError("audio yields " + std::to_string(f.n_frames()) + " frames, model expects " +
                       std::to_string(cfg.input_frames));
    }
  };
  for (const auto& f : clean) check_frames(f);

  Rng rng = Rng(tcfg.seed).split(1);
  AdamState adam;
  const std::size_t n = waves.size();
  const std::size_t batches_per_epoch = (n + tcfg.batch_size - 1) / tcfg.batch_size;
  const std::size_t total_steps = tcfg.epochs * batches_per_epoch;
  std::size_t global_step = 0;

  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const auto order = rng.permutation(n);
    const double epoch_lr = lr_at(epoch, tcfg.epochs, tcfg.warmup_epochs, tcfg.lr_max);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b, ++global_step) {
      const std::size_t lo = b * tcfg.batch_size, hi = std::min(n, lo + tcfg.batch_size);
      std::vector<FeatureMap> batch;
      std::vector<std::size_t> batch_labels;
      for (std::size_t i = lo; i < hi; ++i) {
        const std::size_t idx = order[i];
        if (use_dir) {
          const auto& ir = opts.impulse_responses[pick_impulse_response(opts.impulse_responses.size(), rng)];
          batch.push_back(extract(dir_convolve(waves[idx], ir, rng, aug)));
          check_frames(batch.back());
        } else {
          batch.push_back(clean[idx]);
        }
        batch_labels.push_back(labels[idx]);
      }
      batch = freq_mixstyle(batch, rng, aug);
      for (auto& f : batch) f = freq_mask(f, rng, aug).feature;

      const double lr = tcfg.per_step_schedule
                            ? lr_at(global_step, total_steps, tcfg.warmup_epochs * batches_per_epoch, tcfg.lr_max)
                            : epoch_lr;
      WeightStore sum;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        Gradients gr = backward(cfg, result.weights, batch[i], batch_labels[i], tcfg.label_smoothing);
        if (!std::isfinite(gr.loss)) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(global_step) + ", sample " + std::to_string(order[lo + i]) +
                             " (seed " + std::to_string(tcfg.seed) + ")");
        }
        loss_sum += gr.loss;
        if (argmax(gr.logits.data()) == batch_labels[i]) ++correct;
        if (sum.empty()) {
          sum = std::move(gr.grads);
        } else {
          for (auto& [name, t] : sum) {
            const Tensor& add = gr.grads.at(name);
            for (std::size_t k = 0; k < t.size(); ++k) t[k] += add[k];
          }
        }
      }
      const double scale = 1.0 / static_cast<double>(batch.size());
      for (auto& [name, t] : sum) {
        for (auto& v : t.values()) {
          v *= scale;
          if (!std::isfinite(v)) {
            throw NumericError("non-finite gradient for '" + name + "' at epoch " + std::to_string(epoch) + ", step " +
                               std::to_string(global_step));
          }
        }
      }
      adam_step(result.weights, sum, adam, lr, tcfg);
    }
    EpochStats stats{epoch, epoch_lr, loss_sum / static_cast<double>(n),
                     static_cast<double>(correct) / static_cast<double>(n)};
    if (tcfg.per_step_schedule) stats.lr = lr_at(global_step - 1, total_steps, tcfg.warmup_epochs * batches_per_epoch, tcfg.lr_max);
    result.history.push_back(stats);
    if (opts.on_epoch) opts.on_epoch(stats);
  }
  return result;
}

double evaluate(const ModelConfig& cfg, const WeightStore& weights, const std::vector<FeatureMap>& features,
                const std::vector<std::size_t>& labels) {
  if (features.empty() || features.size() != labels.size()) throw InputError("evaluate needs matching features and labels");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (argmax(forward(cfg, weights, features[i]).data()) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(features.size());
}

}  // namespace asc
