#pragma once

// Hot loops of the front-end and the network. Each kernel exists twice: a
// plain serial reference and an OpenMP version that splits the outer loop.
// Both accumulate every output element in the same order, so their results
// are bit-identical for any thread count.

#include <cstddef>
#include <span>

#include "asc/dsp.hpp"

namespace asc::kernels {

struct Conv3x3Dims {
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t freq;
  std::size_t time;
};

struct DepthwiseDims {
  std::size_t channels;  // input channels
  std::size_t freq;      // input frequency extent
  std::size_t time;
  std::size_t kernel;      // odd
  std::size_t multiplier;  // frequency kernels only
  std::size_t stride;      // frequency kernels only
};

struct StftDims {
  std::size_t n_fft;
  std::size_t hop;
  std::size_t frames;
};

namespace serial {

// c[m x n] = a[m x k] * b[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n);
// 3x3 cross-correlation, stride 1, zero padding 1. `bias` may be empty. No activation.
void conv3x3(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
             std::span<double> y, const Conv3x3Dims& d);
// y[o,p] = bias[o] + sum_i w[o,i] x[i,p]
void pointwise(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
               std::span<double> y, std::size_t cin, std::size_t cout, std::size_t positions);
void depthwise_time(std::span<const double> x, std::span<const double> w, std::span<double> y,
                    const DepthwiseDims& d);
void depthwise_freq(std::span<const double> x, std::span<const double> w, std::span<double> y,
                    const DepthwiseDims& d);
// power[bin x frame] of Hann-windowed frames cut from an already padded signal.
void stft_power(std::span<const double> padded, std::span<const double> window, const dsp::FftPlan& plan,
                std::span<double> power, const StftDims& d);

}  // namespace serial

// Same contracts as serial::, outer loops split across OpenMP threads.
namespace omp {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n);
void conv3x3(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
             std::span<double> y, const Conv3x3Dims& d);
void pointwise(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
               std::span<double> y, std::size_t cin, std::size_t cout, std::size_t positions);
void depthwise_time(std::span<const double> x, std::span<const double> w, std::span<double> y,
                    const DepthwiseDims& d);
void depthwise_freq(std::span<const double> x, std::span<const double> w, std::span<double> y,
                    const DepthwiseDims& d);
void stft_power(std::span<const double> padded, std::span<const double> window, const dsp::FftPlan& plan,
                std::span<double> power, const StftDims& d);

}  // namespace omp

using omp::conv3x3;
using omp::depthwise_freq;
using omp::depthwise_time;
using omp::matmul;
using omp::pointwise;
using omp::stft_power;

/// Output frequency extent of a strided frequency convolution (ceil division).
inline std::size_t strided_extent(std::size_t freq, std::size_t stride) {
  return (freq + stride - 1) / stride;
}

/// Threads OpenMP would use for a parallel region (1 when built without OpenMP).
int max_threads();

}  // namespace asc::kernels
