#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "asc/augment.hpp"
#include "asc/error.hpp"
#include "asc/frontend.hpp"
#include "asc/model.hpp"
#include "asc/model_config.hpp"
#include "asc/weights.hpp"

namespace asc {

inline constexpr std::array<std::string_view, 10> kSceneLabels = {
    "airport", "bus",    "metro",          "metro_station",     "park",
    "public_square", "shopping_mall", "street_pedestrian", "street_traffic", "tram"};

/// Index of a scene name in kSceneLabels, or -1.
int scene_index(std::string_view label);

struct TrainConfig {
  std::size_t epochs = 150;
  std::size_t batch_size = 256;
  double lr_max = 1e-3;
  std::size_t warmup_epochs = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double label_smoothing = 0.0;  // 0 .. 0.2
  bool per_step_schedule = false;
  std::uint64_t seed = 0;

  void validate() const;
};

/// -log softmax(logits)[label], computed from log-sum-exp. With smoothing
/// eps the target is (1-eps) one-hot + eps/K.
double cross_entropy(const Tensor& logits, std::size_t label, double label_smoothing = 0.0);

struct Gradients {
  WeightStore grads;  // same names and shapes as the weights
  double loss = 0.0;
  Tensor logits;
};

/// Loss and the gradient of every parameter by reverse-mode passes through
/// each layer (BPTT over the C GRU steps).
Gradients backward(const ModelConfig& cfg, const WeightStore& weights, const Tensor& feature, std::size_t label,
                   double label_smoothing = 0.0);
Gradients backward(const ModelConfig& cfg, const WeightStore& weights, const FeatureMap& feat, std::size_t label,
                   double label_smoothing = 0.0);

/// Linear ramp to lr_max over warmup_steps, then half-cosine decay to 0 at total_steps.
double lr_at(std::size_t step, std::size_t total_steps, std::size_t warmup_steps, double lr_max);

struct AdamState {
  WeightStore first_moment;
  WeightStore second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of every tensor in `params`.
void adam_step(WeightStore& params, const WeightStore& grads, AdamState& state, double lr, const TrainConfig& cfg);

// ---- data ----

struct ManifestRow {
  std::string filename;
  std::size_t label = 0;  // index into kSceneLabels
  std::string device;
};

struct DatasetManifest {
  std::vector<ManifestRow> rows;
  std::array<std::size_t, kSceneLabels.size()> label_histogram() const;
};

class ManifestError : public InputError {
 public:
  ManifestError(std::size_t line, const std::string& what)
      : InputError("manifest line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Tab-separated, header "filename\tscene_label\tdevice".
DatasetManifest load_manifest(std::string_view tsv);

// ---- training loop ----

struct EpochStats {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double acc = 0.0;
};

std::string epoch_to_json(const EpochStats& s);

struct TrainOptions {
  /// Impulse responses for DIR augmentation; empty disables it.
  std::vector<Waveform> impulse_responses;
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainResult {
  WeightStore weights;
  std::vector<EpochStats> history;
};

/// Loads and decodes every manifest row under audio_root, then trains.
TrainResult train(const ModelConfig& cfg, const TrainConfig& tcfg, const DatasetManifest& manifest,
                  const std::string& audio_root, const AugmentConfig& aug, const TrainOptions& opts = {});

/// Same loop over already-decoded waveforms.
TrainResult train_on_waveforms(const ModelConfig& cfg, const TrainConfig& tcfg, const std::vector<Waveform>& waves,
                               const std::vector<std::size_t>& labels, const AugmentConfig& aug,
                               const TrainOptions& opts = {});

/// Fraction of features whose argmax logit equals the label.
double evaluate(const ModelConfig& cfg, const WeightStore& weights, const std::vector<FeatureMap>& features,
                const std::vector<std::size_t>& labels);

}  // namespace asc
