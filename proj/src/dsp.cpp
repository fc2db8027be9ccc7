#include "asc/dsp.hpp"

#include <cmath>
#include <numbers>

#include "asc/error.hpp"

namespace asc::dsp {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

FftPlan::FftPlan(std::size_t n) : n_(n), radix2_(is_power_of_two(n)) {
  if (n == 0) throw ConfigError("FFT length must be >= 1");
  if (radix2_) {
    twiddles_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddles_[k] = {std::cos(a), std::sin(a)};
    }
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    bitrev_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1U) << (bits - 1 - b);
      bitrev_[i] = r;
    }
  } else {
    twiddles_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddles_[k] = {std::cos(a), std::sin(a)};
    }
  }
}

void FftPlan::forward(std::span<std::complex<double>> x) const { transform(x, false); }

void FftPlan::inverse(std::span<std::complex<double>> x) const {
  transform(x, true);
  const double scale = 1.0 / static_cast<double>(n_);
  for (auto& v : x) v *= scale;
}

void FftPlan::transform(std::span<std::complex<double>> x, bool inverse) const {
  if (x.size() != n_) throw ShapeError("FFT input length does not match plan");
  if (!radix2_) {
    std::vector<std::complex<double>> out(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t j = 0; j < n_; ++j) {
        auto w = twiddles_[(k * j) % n_];
        if (inverse) w = std::conj(w);
        acc += x[j] * w;
      }
      out[k] = acc;
    }
    std::copy(out.begin(), out.end(), x.begin());
    return;
  }
  for (std::size_t i = 0; i < n_; ++i) {
    if (i < bitrev_[i]) std::swap(x[i], x[bitrev_[i]]);
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        auto w = twiddles_[k * step];
        if (inverse) w = std::conj(w);
        const auto u = x[start + k];
        const auto v = x[start + k + half] * w;
        x[start + k] = u + v;
        x[start + k + half] = u - v;
      }
    }
  }
}

std::vector<double> hann_window(std::size_t win_length, std::size_t n_fft) {
  std::vector<double> w(n_fft, 0.0);
  const std::size_t offset = (n_fft - win_length) / 2;
  for (std::size_t i = 0; i < win_length; ++i) {
    w[offset + i] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(win_length));
  }
  return w;
}

std::size_t reflect_index(long long i, std::size_t n) {
  if (n == 1) return 0;
  const long long period = 2 * static_cast<long long>(n - 1);
  long long r = i % period;
  if (r < 0) r += period;
  if (r >= static_cast<long long>(n)) r = period - r;
  return static_cast<std::size_t>(r);
}

std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  std::vector<double> out(out_len, 0.0);
  if (std::min(a.size(), b.size()) <= 64) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    }
    return out;
  }
  const std::size_t n = next_power_of_two(out_len);
  FftPlan plan(n);
  std::vector<std::complex<double>> fa(n), fb(n);
  for (std::size_t i = 0; i < a.size(); ++i) fa[i] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) fb[i] = b[i];
  plan.forward(fa);
  plan.forward(fb);
  for (std::size_t i = 0; i < n; ++i) fa[i] *= fb[i];
  plan.inverse(fa);
  for (std::size_t i = 0; i < out_len; ++i) out[i] = fa[i].real();
  return out;
}

}  // namespace asc::dsp
