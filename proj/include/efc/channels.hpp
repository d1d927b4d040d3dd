#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace efc {

/// Number of sensing/actuation channels around the shell gap.
inline constexpr int kChannelCount = 16;

/// Per-sample payload: one real value per channel. Unit (volts, amps,
/// codes) is carried by context; variables are named accordingly.
using ChannelVector = Eigen::Matrix<double, kChannelCount, 1>;

/// Square coupling matrix over the channels.
using ChannelMatrix = Eigen::Matrix<double, kChannelCount, kChannelCount>;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& x) {
  return x.allFinite();
}

/// Throws std::domain_error unless every entry of x is finite.
template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& x, const char* what) {
  if (!x.allFinite()) {
    throw std::domain_error(std::string(what) + ": non-finite value");
  }
}

inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw std::domain_error(std::string(what) + ": non-finite value");
  }
}

}  // namespace efc
