#pragma once

#include <cstdint>

namespace asc {

inline constexpr double kHalfMax = 65504.0;

/// IEEE-754 binary16 nearest to x, ties to even. |x| must be finite and
/// round to at most kHalfMax; callers check the range first.
std::uint16_t double_to_half(double x);
/// Exact widening.
double half_to_double(std::uint16_t h);

}  // namespace asc
