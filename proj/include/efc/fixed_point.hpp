#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace efc {

// Q-format helpers shared by the fixed-point correction and PID paths.
// Coefficients are signed Q2.30 (matrix bands, per-channel scales) or
// signed Q16.16 (PID gain composites); data words are signed 16-bit.

inline constexpr int kQ30Shift = 30;
inline constexpr int kQ16Shift = 16;

/// Saturate a wide value to the signed 16-bit data range.
/// Sets *saturated when clipping occurs; leaves it untouched otherwise.
inline int32_t saturate_i16(int64_t x, bool* saturated = nullptr) {
  if (x > 32767) {
    if (saturated) *saturated = true;
    return 32767;
  }
  if (x < -32768) {
    if (saturated) *saturated = true;
    return -32768;
  }
  return static_cast<int32_t>(x);
}

/// Round x/2^shift to the nearest integer, ties to even.
inline int64_t round_shift_even(int64_t x, int shift) {
  const int64_t one = int64_t{1} << shift;
  const int64_t half = one >> 1;
  int64_t q = x >> shift;           // floor division
  const int64_t r = x - (q << shift);  // remainder in [0, 2^shift)
  if (r > half || (r == half && (q & 1))) ++q;
  return q;
}

/// Quantize a real coefficient to signed Q2.30.
/// Throws std::invalid_argument when the value does not fit the format.
inline int32_t to_q30(double value, const char* name = "coefficient") {
  if (!std::isfinite(value) || std::abs(value) >= 2.0) {
    throw std::invalid_argument(std::string(name) +
                                ": not representable in Q2.30");
  }
  return static_cast<int32_t>(std::llround(value * (int64_t{1} << kQ30Shift)));
}

/// Quantize a real coefficient to signed Q16.16.
inline int32_t to_q16(double value, const char* name = "coefficient") {
  if (!std::isfinite(value) || std::abs(value) >= 32768.0) {
    throw std::invalid_argument(std::string(name) +
                                ": not representable in Q16.16");
  }
  return static_cast<int32_t>(std::llround(value * (int64_t{1} << kQ16Shift)));
}

inline double from_q30(int64_t q) {
  return static_cast<double>(q) / static_cast<double>(int64_t{1} << kQ30Shift);
}

inline double from_q16(int64_t q) {
  return static_cast<double>(q) / static_cast<double>(int64_t{1} << kQ16Shift);
}

}  // namespace efc
