#include <benchmark/benchmark.h>

#include <vector>

#include "asc/frontend.hpp"
#include "asc/kernels.hpp"
#include "asc/model.hpp"
#include "asc/rng.hpp"

namespace {

namespace k = asc::kernels;

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  asc::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

// Shapes below are those of the shipped model on a [256 x 33] input.

template <bool Parallel>
void BM_Conv3x3(benchmark::State& state) {
  const k::Conv3x3Dims d{1, 12, 256, 33};
  const auto x = random_vec(256 * 33, 1), w = random_vec(12 * 9, 2), b = random_vec(12, 3);
  std::vector<double> y(12 * 256 * 33);
  for (auto _ : state) {
    if constexpr (Parallel) k::omp::conv3x3(x, w, b, y, d);
    else k::serial::conv3x3(x, w, b, y, d);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_Pointwise(benchmark::State& state) {
  const std::size_t positions = 128 * 16;
  const auto x = random_vec(12 * positions, 1), w = random_vec(24 * 12, 2), b = random_vec(24, 3);
  std::vector<double> y(24 * positions);
  for (auto _ : state) {
    if constexpr (Parallel) k::omp::pointwise(x, w, b, y, 12, 24, positions);
    else k::serial::pointwise(x, w, b, y, 12, 24, positions);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_DepthwiseFreq(benchmark::State& state) {
  const k::DepthwiseDims d{24, 128, 16, 3, 2, 2};
  const auto x = random_vec(24 * 128 * 16, 1), w = random_vec(48 * 3, 2);
  std::vector<double> y(48 * 64 * 16);
  for (auto _ : state) {
    if constexpr (Parallel) k::omp::depthwise_freq(x, w, y, d);
    else k::serial::depthwise_freq(x, w, y, d);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_StftPower(benchmark::State& state) {
  const std::size_t n_fft = 8192, hop = 1364, frames = 33;
  const auto sig = random_vec((frames - 1) * hop + n_fft, 1);
  const auto win = asc::dsp::hann_window(n_fft, n_fft);
  const asc::dsp::FftPlan plan(n_fft);
  std::vector<double> p((n_fft / 2 + 1) * frames);
  const k::StftDims d{n_fft, hop, frames};
  for (auto _ : state) {
    if constexpr (Parallel) k::omp::stft_power(sig, win, plan, p, d);
    else k::serial::stft_power(sig, win, plan, p, d);
    benchmark::DoNotOptimize(p.data());
  }
}

void BM_Forward(benchmark::State& state) {
  const asc::ModelConfig cfg = asc::default_model_config();
  const asc::WeightStore w = asc::init_weights(cfg, 0);
  const asc::Tensor x({cfg.input_mels, cfg.input_frames}, random_vec(cfg.input_mels * cfg.input_frames, 4));
  for (auto _ : state) benchmark::DoNotOptimize(asc::forward(cfg, w, x));
}

void BM_LogMel(benchmark::State& state) {
  const asc::FeatureExtractor fx{asc::FrontendConfig{}};
  asc::Waveform wave{random_vec(44100, 5), 44100};
  for (auto _ : state) benchmark::DoNotOptimize(fx(wave));
}

}  // namespace

BENCHMARK(BM_Conv3x3<false>)->Name("conv3x3/serial");
BENCHMARK(BM_Conv3x3<true>)->Name("conv3x3/omp");
BENCHMARK(BM_Pointwise<false>)->Name("pointwise/serial");
BENCHMARK(BM_Pointwise<true>)->Name("pointwise/omp");
BENCHMARK(BM_DepthwiseFreq<false>)->Name("depthwise_freq/serial");
BENCHMARK(BM_DepthwiseFreq<true>)->Name("depthwise_freq/omp");
BENCHMARK(BM_StftPower<false>)->Name("stft_power/serial");
BENCHMARK(BM_StftPower<true>)->Name("stft_power/omp");
BENCHMARK(BM_Forward)->Name("forward/default_model");
BENCHMARK(BM_LogMel)->Name("log_mel/one_second");

BENCHMARK_MAIN();
