#include <complex>
#include <vector>

#include "asc/kernels.hpp"

namespace asc::kernels::serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void conv3x3(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
             std::span<double> y, const Conv3x3Dims& d) {
  const std::size_t plane = d.freq * d.time;
  for (std::size_t o = 0; o < d.out_channels; ++o) {
    double* yo = y.data() + o * plane;
    const double b = bias.empty() ? 0.0 : bias[o];
    for (std::size_t p = 0; p < plane; ++p) yo[p] = b;
    for (std::size_t i = 0; i < d.in_channels; ++i) {
      const double* xi = x.data() + i * plane;
      const double* wk = w.data() + (o * d.in_channels + i) * 9;
      for (std::size_t f = 0; f < d.freq; ++f) {
        for (std::size_t t = 0; t < d.time; ++t) {
          double acc = yo[f * d.time + t];
          for (int df = -1; df <= 1; ++df) {
            const long long ff = static_cast<long long>(f) + df;
            if (ff < 0 || ff >= static_cast<long long>(d.freq)) continue;
            for (int dt = -1; dt <= 1; ++dt) {
              const long long tt = static_cast<long long>(t) + dt;
              if (tt < 0 || tt >= static_cast<long long>(d.time)) continue;
              acc += wk[(df + 1) * 3 + (dt + 1)] * xi[ff * static_cast<long long>(d.time) + tt];
            }
          }
          yo[f * d.time + t] = acc;
        }
      }
    }
  }
}

void pointwise(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
               std::span<double> y, std::size_t cin, std::size_t cout, std::size_t positions) {
  for (std::size_t o = 0; o < cout; ++o) {
    double* yo = y.data() + o * positions;
    const double b = bias.empty() ? 0.0 : bias[o];
    for (std::size_t p = 0; p < positions; ++p) yo[p] = b;
    for (std::size_t i = 0; i < cin; ++i) {
      const double wi = w[o * cin + i];
      const double* xi = x.data() + i * positions;
      for (std::size_t p = 0; p < positions; ++p) yo[p] += wi * xi[p];
    }
  }
}

void depthwise_time(std::span<const double> x, std::span<const double> w, std::span<double> y,
                    const DepthwiseDims& d) {
  const long long pad = static_cast<long long>(d.kernel / 2);
  const long long T = static_cast<long long>(d.time);
  for (std::size_t c = 0; c < d.channels; ++c) {
    const double* wc = w.data() + c * d.kernel;
    for (std::size_t f = 0; f < d.freq; ++f) {
      const double* xr = x.data() + (c * d.freq + f) * d.time;
      double* yr = y.data() + (c * d.freq + f) * d.time;
      for (long long t = 0; t < T; ++t) {
        double acc = 0.0;
        for (std::size_t q = 0; q < d.kernel; ++q) {
          const long long tt = t + static_cast<long long>(q) - pad;
          if (tt >= 0 && tt < T) acc += wc[q] * xr[tt];
        }
        yr[t] = acc;
      }
    }
  }
}

void depthwise_freq(std::span<const double> x, std::span<const double> w, std::span<double> y,
                    const DepthwiseDims& d) {
  const long long pad = static_cast<long long>(d.kernel / 2);
  const long long F = static_cast<long long>(d.freq);
  const std::size_t fout = strided_extent(d.freq, d.stride);
  for (std::size_t o = 0; o < d.channels * d.multiplier; ++o) {
    const std::size_t c = o / d.multiplier;
    const double* wo = w.data() + o * d.kernel;
    for (std::size_t fo = 0; fo < fout; ++fo) {
      double* yr = y.data() + (o * fout + fo) * d.time;
      for (std::size_t t = 0; t < d.time; ++t) {
        double acc = 0.0;
        for (std::size_t q = 0; q < d.kernel; ++q) {
          const long long ff = static_cast<long long>(fo * d.stride + q) - pad;
          if (ff >= 0 && ff < F) acc += wo[q] * x[(c * d.freq + static_cast<std::size_t>(ff)) * d.time + t];
        }
        yr[t] = acc;
      }
    }
  }
}

void stft_power(std::span<const double> padded, std::span<const double> window, const dsp::FftPlan& plan,
                std::span<double> power, const StftDims& d) {
  const std::size_t bins = d.n_fft / 2 + 1;
  std::vector<std::complex<double>> buf(d.n_fft);
  for (std::size_t fr = 0; fr < d.frames; ++fr) {
    const double* src = padded.data() + fr * d.hop;
    for (std::size_t n = 0; n < d.n_fft; ++n) buf[n] = src[n] * window[n];
    plan.forward(buf);
    for (std::size_t k = 0; k < bins; ++k) power[k * d.frames + fr] = std::norm(buf[k]);
  }
}

}  // namespace asc::kernels::serial
