#include <chrono>
#include <cmath>
#include <numbers>
#include <set>

#include "asc/training.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace asc;

TEST_CASE("scene vocabulary") {
  CHECK(scene_index("airport") == 0);
  CHECK(scene_index("tram") == 9);
  CHECK(scene_index("beach") == -1);
}

TEST_CASE("cross entropy") {
  CHECK(cross_entropy(Tensor({10}), 3) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  Tensor confident({10});
  confident[7] = 1000.0;
  CHECK(cross_entropy(confident, 7) < 1e-12);
  CHECK(cross_entropy(Tensor({2}, {std::log(1.0), std::log(3.0)}), 0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(std::isfinite(cross_entropy(Tensor({2}, {-1e300, 1e300}), 0)));
  CHECK_THROWS_AS(cross_entropy(Tensor({10}), 10), InputError);
  // uniform logits: smoothing does not change the loss
  CHECK(cross_entropy(Tensor({10}), 3, 0.2) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("cosine schedule with warmup") {
  const double lr = 1e-3;
  CHECK(lr_at(0, 100, 10, lr) == 0.0);
  CHECK(lr_at(10, 100, 10, lr) == doctest::Approx(lr).epsilon(1e-15));
  CHECK(std::fabs(lr_at(55, 100, 10, lr) - 5e-4) < 1e-12);
  CHECK(std::fabs(lr_at(100, 100, 10, lr)) < 1e-12);
  CHECK(lr_at(5, 100, 10, lr) == doctest::Approx(5e-4));
  // continuity at the warmup boundary and non-negativity
  CHECK(std::fabs(lr_at(10, 100, 10, lr) - lr_at(9, 100, 10, lr)) <= lr / 10 + 1e-15);
  for (std::size_t s = 0; s <= 100; ++s) CHECK(lr_at(s, 100, 10, lr) >= 0.0);
  CHECK(lr_at(0, 10, 0, lr) == lr);
  CHECK_THROWS_AS(lr_at(0, 10, 10, lr), ConfigError);
  CHECK_THROWS_AS(lr_at(11, 10, 2, lr), ConfigError);
}

TEST_CASE("adam step") {
  TrainConfig cfg;
  SUBCASE("zero gradient leaves parameters unchanged") {
    WeightStore p{{"w", Tensor({3}, {1.0, -2.0, 0.5})}};
    const WeightStore before = p;
    AdamState st;
    adam_step(p, WeightStore{{"w", Tensor({3})}}, st, 1e-3, cfg);
    CHECK(p == before);
    CHECK(st.step == 1);
  }
  SUBCASE("first step is -lr / (1 + eps)") {
    WeightStore p{{"w", Tensor({1}, {0.0})}};
    AdamState st;
    adam_step(p, WeightStore{{"w", Tensor({1}, {1.0})}}, st, 1e-3, cfg);
    CHECK(p["w"][0] == doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
  }
  SUBCASE("first step moves against the gradient sign") {
    WeightStore p{{"w", Tensor({4}, {0.1, 0.2, 0.3, 0.4})}};
    const WeightStore before = p;
    const Tensor g({4}, {1.0, -3.0, 0.01, -0.2});
    AdamState st;
    adam_step(p, WeightStore{{"w", g}}, st, 1e-2, cfg);
    for (std::size_t i = 0; i < 4; ++i) CHECK((p["w"][i] - before.at("w")[i]) * g[i] < 0.0);
  }
  SUBCASE("shape mismatch") {
    WeightStore p{{"w", Tensor({2})}};
    AdamState st;
    CHECK_THROWS_AS(adam_step(p, WeightStore{{"w", Tensor({3})}}, st, 1e-3, cfg), ShapeError);
    CHECK_THROWS_AS(adam_step(p, WeightStore{}, st, 1e-3, cfg), ShapeError);
  }
}

TEST_CASE("train config validation") {
  TrainConfig t;
  CHECK_NOTHROW(t.validate());
  t.warmup_epochs = t.epochs;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.batch_size = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.label_smoothing = 0.3;
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("manifest parsing") {
  const std::string header = "filename\tscene_label\tdevice\n";
  SUBCASE("minimal file") {
    const auto m = load_manifest(header + "a.wav\tpark\ts1\n");
    REQUIRE(m.rows.size() == 1);
    CHECK(m.rows[0].filename == "a.wav");
    CHECK(m.rows[0].label == static_cast<std::size_t>(scene_index("park")));
    CHECK(m.rows[0].device == "s1");
  }
  SUBCASE("unknown label names the line") {
    try {
      load_manifest(header + "a.wav\tbeach\ts1\n");
      FAIL("expected an error");
    } catch (const ManifestError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("all ten labels") {
    std::string tsv = header;
    for (auto l : kSceneLabels) tsv += "x_" + std::string(l) + ".wav\t" + std::string(l) + "\ta\n";
    const auto h = load_manifest(tsv).label_histogram();
    for (auto c : h) CHECK(c == 1);
  }
  SUBCASE("structural errors") {
    CHECK_THROWS_AS(load_manifest("a.wav\tpark\ts1\n"), ManifestError);
    CHECK_THROWS_AS(load_manifest(""), ManifestError);
    CHECK_THROWS_AS(load_manifest(header + "a.wav\tpark\n"), ManifestError);
    CHECK_THROWS_AS(load_manifest(header + "a.wav\tpark\ts1\textra\n"), ManifestError);
  }
  SUBCASE("CRLF line endings and a missing final newline") {
    const auto m = load_manifest("filename\tscene_label\tdevice\r\na.wav\tbus\tb\r\nb.wav\ttram\tc");
    REQUIRE(m.rows.size() == 2);
    CHECK(m.rows[1].device == "c");
  }
}

TEST_CASE("history lines are JSON") {
  CHECK(epoch_to_json({3, 0.5, 1.25, 0.75}) == R"({"epoch":3,"lr":0.5,"loss":1.25,"acc":0.75})");
}

TEST_CASE("zero epochs returns the initialization") {
  const ModelConfig cfg = synthetic::two_tone_model();
  const auto data = synthetic::two_tones(2, 1);
  TrainConfig t = synthetic::two_tone_training(7);
  t.epochs = 0;
  t.warmup_epochs = 0;
  const auto r = train_on_waveforms(cfg, t, data.waves, data.labels, synthetic::no_augmentation());
  CHECK(r.weights == init_weights(cfg, 7));
  CHECK(r.history.empty());
}

TEST_CASE("two-tone task is learned, deterministically") {
  const ModelConfig cfg = synthetic::two_tone_model();
  const auto data = synthetic::two_tones(64, 11);
  const AugmentConfig aug = synthetic::no_augmentation();
  const TrainConfig t = synthetic::two_tone_training(0);
  std::size_t calls = 0;
  TrainOptions opts;
  opts.on_epoch = [&](const EpochStats&) { ++calls; };
  const auto a = train_on_waveforms(cfg, t, data.waves, data.labels, aug, opts);
  REQUIRE(a.history.size() == 50);
  CHECK(calls == 50);
  for (const auto& e : a.history) CHECK(std::isfinite(e.loss));
  CHECK(a.history.front().lr == 0.0);
  CHECK(a.history.back().acc >= 0.9);

  std::vector<FeatureMap> feats;
  const FeatureExtractor fx(cfg.frontend);
  for (const auto& w : data.waves) feats.push_back(fx(w));
  CHECK(evaluate(cfg, a.weights, feats, data.labels) >= 0.9);

  const auto b = train_on_waveforms(cfg, t, data.waves, data.labels, aug);
  REQUIRE(b.history.size() == a.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].loss == b.history[i].loss);
    CHECK(a.history[i].acc == b.history[i].acc);
  }
  CHECK(a.weights == b.weights);

  // 10-epoch moving average of the loss over the second half does not rise
  const auto avg = [&](std::size_t end) {
    double s = 0;
    for (std::size_t i = end - 10; i < end; ++i) s += a.history[i].loss;
    return s / 10;
  };
  for (std::size_t end = 35; end <= 50; ++end) CHECK(avg(end) <= avg(end - 1) + 1e-3);
}

TEST_CASE("augmented training is reproducible per seed") {
  const ModelConfig cfg = synthetic::two_tone_model();
  const auto data = synthetic::two_tones(4, 5);
  AugmentConfig aug;
  aug.fm_max_width = 4;
  aug.fms_prob = 1.0;
  TrainOptions opts;
  Rng ir_rng(1);
  opts.impulse_responses = {Waveform{{1.0, 0.3, -0.1}, 44100}, oracle::tone_clip(200.0, 64, ir_rng)};
  TrainConfig t = synthetic::two_tone_training(9);
  t.epochs = 4;
  t.batch_size = 3;
  const auto a = train_on_waveforms(cfg, t, data.waves, data.labels, aug, opts);
  const auto b = train_on_waveforms(cfg, t, data.waves, data.labels, aug, opts);
  CHECK(a.weights == b.weights);
  t.seed = 10;
  const auto c = train_on_waveforms(cfg, t, data.waves, data.labels, aug, opts);
  CHECK_FALSE(a.weights == c.weights);
}

TEST_CASE("training rejects bad inputs") {
  const ModelConfig cfg = synthetic::two_tone_model();
  auto data = synthetic::two_tones(1, 2);
  const TrainConfig t = synthetic::two_tone_training(0);
  data.labels[0] = 10;
  CHECK_THROWS_AS(train_on_waveforms(cfg, t, data.waves, data.labels, synthetic::no_augmentation()), InputError);
  data = synthetic::two_tones(1, 2);
  data.waves[0].samples.resize(1000);
  CHECK_THROWS_AS(train_on_waveforms(cfg, t, data.waves, data.labels, synthetic::no_augmentation()), ShapeError);
  CHECK_THROWS_AS(train(cfg, t, load_manifest("filename\tscene_label\tdevice\nmissing.wav\tbus\ta\n"), "/nonexistent",
                        synthetic::no_augmentation()),
                  InputError);
}

TEST_CASE("divergence aborts with diagnostics") {
  const ModelConfig cfg = synthetic::two_tone_model();
  const auto data = synthetic::two_tones(2, 3);
  TrainConfig t = synthetic::two_tone_training(0);
  t.epochs = 5;
  t.warmup_epochs = 0;
  t.lr_max = 1e200;
  try {
    train_on_waveforms(cfg, t, data.waves, data.labels, synthetic::no_augmentation());
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch") != std::string::npos);
    CHECK(msg.find("step") != std::string::npos);
  }
}

TEST_CASE("non-finite audio is rejected before training") {
  const ModelConfig cfg = synthetic::two_tone_model();
  auto data = synthetic::two_tones(1, 3);
  data.waves[0].samples[100] = std::nan("");
  CHECK_THROWS_AS(train_on_waveforms(cfg, synthetic::two_tone_training(0), data.waves, data.labels,
                                     synthetic::no_augmentation()),
                  InputError);
}
