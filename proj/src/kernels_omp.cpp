#include <complex>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "asc/kernels.hpp"

namespace asc::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace omp {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n) {
  const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static) if (m * k * n > 4096)
  for (long long ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
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
  const auto F = static_cast<long long>(d.freq);
  const auto T = static_cast<long long>(d.time);
  const auto jobs = static_cast<long long>(d.out_channels) * F;
  // One task per (output channel, frequency row); input channels stay inner
  // so each element accumulates in the serial order.
#pragma omp parallel for schedule(static) if (d.out_channels * plane > 2048)
  for (long long job = 0; job < jobs; ++job) {
    const auto o = static_cast<std::size_t>(job / F);
    const long long f = job % F;
    double* yr = y.data() + o * plane + static_cast<std::size_t>(f) * d.time;
    const double b = bias.empty() ? 0.0 : bias[o];
    for (long long t = 0; t < T; ++t) yr[t] = b;
    for (std::size_t i = 0; i < d.in_channels; ++i) {
      const double* xi = x.data() + i * plane;
      const double* wk = w.data() + (o * d.in_channels + i) * 9;
      for (long long t = 0; t < T; ++t) {
        double acc = yr[t];
        for (int df = -1; df <= 1; ++df) {
          const long long ff = f + df;
          if (ff < 0 || ff >= F) continue;
          for (int dt = -1; dt <= 1; ++dt) {
            const long long tt = t + dt;
            if (tt < 0 || tt >= T) continue;
            acc += wk[(df + 1) * 3 + (dt + 1)] * xi[ff * T + tt];
          }
        }
        yr[t] = acc;
      }
    }
  }
}

void pointwise(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
               std::span<double> y, std::size_t cin, std::size_t cout, std::size_t positions) {
  const auto outs = static_cast<long long>(cout);
#pragma omp parallel for schedule(static) if (cin * cout * positions > 4096)
  for (long long oo = 0; oo < outs; ++oo) {
    const auto o = static_cast<std::size_t>(oo);
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
  const auto rows = static_cast<long long>(d.channels * d.freq);
#pragma omp parallel for schedule(static) if (d.channels * d.freq * d.time > 4096)
  for (long long row = 0; row < rows; ++row) {
    const auto c = static_cast<std::size_t>(row) / d.freq;
    const double* wc = w.data() + c * d.kernel;
    const double* xr = x.data() + static_cast<std::size_t>(row) * d.time;
    double* yr = y.data() + static_cast<std::size_t>(row) * d.time;
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

void depthwise_freq(std::span<const double> x, std::span<const double> w, std::span<double> y,
                    const DepthwiseDims& d) {
  const long long pad = static_cast<long long>(d.kernel / 2);
  const long long F = static_cast<long long>(d.freq);
  const std::size_t fout = strided_extent(d.freq, d.stride);
  const auto rows = static_cast<long long>(d.channels * d.multiplier * fout);
#pragma omp parallel for schedule(static) if (d.channels * d.multiplier * fout * d.time > 4096)
  for (long long row = 0; row < rows; ++row) {
    const auto o = static_cast<std::size_t>(row) / fout;
    const auto fo = static_cast<std::size_t>(row) % fout;
    const std::size_t c = o / d.multiplier;
    const double* wo = w.data() + o * d.kernel;
    double* yr = y.data() + static_cast<std::size_t>(row) * d.time;
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

void stft_power(std::span<const double> padded, std::span<const double> window, const dsp::FftPlan& plan,
                std::span<double> power, const StftDims& d) {
  const std::size_t bins = d.n_fft / 2 + 1;
  const auto frames = static_cast<long long>(d.frames);
#pragma omp parallel if (d.frames > 1)
  {
    std::vector<std::complex<double>> buf(d.n_fft);
#pragma omp for schedule(static)
    for (long long ff = 0; ff < frames; ++ff) {
      const auto fr = static_cast<std::size_t>(ff);
      const double* src = padded.data() + fr * d.hop;
      for (std::size_t n = 0; n < d.n_fft; ++n) buf[n] = src[n] * window[n];
      plan.forward(buf);
      for (std::size_t k = 0; k < bins; ++k) power[k * d.frames + fr] = std::norm(buf[k]);
    }
  }
}

}  // namespace omp
}  // namespace asc::kernels
