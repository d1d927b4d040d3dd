#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "efc/channels.hpp"
#include "efc/fixed_point.hpp"

namespace efc {

// Mutual-inductance correction. The coupling between the 16 sensing
// coils is a symmetric circulant matrix with three measured parameters:
// the self-inductance band and the first and second circular-neighbour
// bands. The correction applies
//
//   u_out = v * unit_scale * M * (u_in .* beta_r + alpha0)
//
// where v is the reciprocal power-amplifier gain and unit_scale converts
// the henry-valued matrix application to the working voltage scale.

inline constexpr double kDefaultDiagHenries = 620e-6;
inline constexpr double kDefaultOff1Henries = -7e-6;
inline constexpr double kDefaultOff2Henries = -1.67e-6;

/// Builds the symmetric circulant coupling matrix: diag on the main
/// diagonal, off1 on the first circular neighbours, off2 on the second,
/// zero elsewhere. Needs n >= 5 so the five bands stay distinct.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> build_mutual_matrix(
    Scalar diag = Scalar(kDefaultDiagHenries),
    Scalar off1 = Scalar(kDefaultOff1Henries),
    Scalar off2 = Scalar(kDefaultOff2Henries),
    Eigen::Index n = kChannelCount) {
  if (n < 5) {
    throw std::invalid_argument("build_mutual_matrix: n must be >= 5");
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = diag;
    m(i, (i + 1) % n) = off1;
    m(i, (i + n - 1) % n) = off1;
    m(i, (i + 2) % n) = off2;
    m(i, (i + n - 2) % n) = off2;
  }
  return m;
}

/// Calibration knobs of the correction stage.
struct CorrectionParams {
  ChannelVector beta_r = ChannelVector::Ones();
  ChannelVector alpha0 = ChannelVector::Zero();
  double v = 1.0;  ///< reciprocal of the power-amplifier gain
  double unit_scale = 1.0 / kDefaultDiagHenries;

  void validate() const {
    require_finite(beta_r, "correction.beta_r");
    require_finite(alpha0, "correction.alpha0");
    if ((beta_r.array() == 0.0).any()) {
      throw std::invalid_argument("correction.beta_r entries must be nonzero");
    }
    if (v == 0.0 || !std::isfinite(v)) {
      throw std::invalid_argument("correction.v must be nonzero");
    }
    if (!(unit_scale > 0.0)) {
      throw std::invalid_argument("correction.unit_scale must be > 0");
    }
  }
};

/// Floating-point correction: scale and offset first, matrix product
/// second.
template <typename DerivedU, typename DerivedM>
ChannelVector correct(const Eigen::MatrixBase<DerivedU>& u_in,
                      const Eigen::MatrixBase<DerivedM>& m,
                      const CorrectionParams& p) {
  require_finite(u_in, "correct");
  if (m.rows() != u_in.rows() || m.cols() != u_in.rows()) {
    throw std::invalid_argument("correct: matrix/vector dimension mismatch");
  }
  return p.v * p.unit_scale *
         (m * (u_in.cwiseProduct(p.beta_r) + p.alpha0));
}

using CodeVector = Eigen::Matrix<int16_t, kChannelCount, 1>;

/// Result of the fixed-point correction. `overflow` is sticky: set when
/// any conditioning product, accumulator sum, or final narrowing had to
/// saturate.
struct FixedCorrectionResult {
  CodeVector codes = CodeVector::Zero();
  bool overflow = false;
};

/// Quantized datapath of the correction stage: band coefficients and
/// per-channel scales in signed Q2.30, offsets in Q2.30 code units,
/// 48-bit accumulator, one round-to-even narrowing at the output.
class QuantizedCorrection {
 public:
  /// Quantizes the effective band multipliers v*unit_scale*{diag,off1,off2}
  /// and the per-channel calibration. alpha0 is given in volts and is
  /// folded into code units via adc_lsb_volts.
  QuantizedCorrection(double diag, double off1, double off2,
                      const CorrectionParams& p, double adc_lsb_volts) {
    const double scale = p.v * p.unit_scale;
    band_[0] = to_q30(scale * diag, "correction band diag");
    band_[1] = to_q30(scale * off1, "correction band off1");
    band_[2] = to_q30(scale * off2, "correction band off2");
    for (int i = 0; i < kChannelCount; ++i) {
      beta_q_[i] = to_q30(p.beta_r[i], "correction.beta_r");
      const double alpha_codes = p.alpha0[i] / adc_lsb_volts;
      if (!std::isfinite(alpha_codes) || std::abs(alpha_codes) >= 65536.0) {
        throw std::invalid_argument("correction.alpha0: out of code range");
      }
      alpha_q_[i] = static_cast<int64_t>(
          std::llround(alpha_codes * (int64_t{1} << kQ30Shift)));
    }
  }

  int32_t band(int k) const { return band_[k]; }

  /// Fixed-point evaluation on raw converter codes. Only the five
  /// nonzero bands are multiplied, mirroring the per-path multiplier /
  /// banded-adder datapath.
  FixedCorrectionResult apply(const CodeVector& u_codes) const {
    FixedCorrectionResult out;

    // Conditioning stage: w = sat16(round(u * beta + alpha)).
    std::array<int32_t, kChannelCount> w;
    for (int i = 0; i < kChannelCount; ++i) {
      const int64_t scaled =
          static_cast<int64_t>(u_codes[i]) * beta_q_[i] + alpha_q_[i];
      w[i] = saturate_i16(round_shift_even(scaled, kQ30Shift), &out.overflow);
    }

    // Banded multiply-accumulate with a 48-bit accumulator window.
    constexpr int64_t kAccMax = (int64_t{1} << 47) - 1;
    constexpr int64_t kAccMin = -(int64_t{1} << 47);
    for (int i = 0; i < kChannelCount; ++i) {
      int64_t acc = 0;
      const auto add = [&](int32_t coeff, int32_t data) {
        acc += static_cast<int64_t>(coeff) * data;
        if (acc > kAccMax) {
          acc = kAccMax;
          out.overflow = true;
        } else if (acc < kAccMin) {
          acc = kAccMin;
          out.overflow = true;
        }
      };
      add(band_[0], w[i]);
      add(band_[1], w[(i + 1) % kChannelCount]);
      add(band_[1], w[(i + kChannelCount - 1) % kChannelCount]);
      add(band_[2], w[(i + 2) % kChannelCount]);
      add(band_[2], w[(i + kChannelCount - 2) % kChannelCount]);
      out.codes[i] =
          static_cast<int16_t>(saturate_i16(round_shift_even(acc, kQ30Shift),
                                            &out.overflow));
    }
    return out;
  }

 private:
  std::array<int32_t, 3> band_{};             // Q2.30
  std::array<int32_t, kChannelCount> beta_q_{};   // Q2.30
  std::array<int64_t, kChannelCount> alpha_q_{};  // code units, Q2.30 scaled
};

}  // namespace efc
