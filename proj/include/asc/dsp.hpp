#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace asc::dsp {

/// In-place forward DFT of a fixed length. Radix-2 when the length is a power
/// of two, direct O(n^2) evaluation otherwise. Immutable after construction and
/// safe to share between threads.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  void forward(std::span<std::complex<double>> x) const;
  void inverse(std::span<std::complex<double>> x) const;

 private:
  void transform(std::span<std::complex<double>> x, bool inverse) const;

  std::size_t n_;
  bool radix2_;
  std::vector<std::complex<double>> twiddles_;
  std::vector<std::size_t> bitrev_;
};

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

/// Periodic Hann window of `win_length`, zero-padded symmetrically to `n_fft`.
std::vector<double> hann_window(std::size_t win_length, std::size_t n_fft);

/// Index into a signal of length n under repeated reflection (numpy "reflect").
std::size_t reflect_index(long long i, std::size_t n);

/// Full linear convolution, length a.size() + b.size() - 1.
std::vector<double> convolve(std::span<const double> a, std::span<const double> b);

}  // namespace asc::dsp
