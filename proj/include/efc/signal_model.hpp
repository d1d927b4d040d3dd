#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "efc/channels.hpp"

namespace efc {

// Analog front-end and converter models. The digitizer is a 16-bit
// bipolar SAR converter behind a two-stage amplifier; the actuator side
// is a 16-bit DAC spanning a symmetric bipolar range followed by the
// power amplifier.

/// Acquisition chain parameters.
struct AdcConfig {
  double full_scale = 10.0;  ///< symmetric input range, volts (+/-FS)
  int bits = 16;
  double stage1_gain = 1.0;
  double stage2_gain = 1.0;
  double noise_rms = 0.0;  ///< optional additive noise, volts RMS per channel

  /// Volts per code step.
  double lsb() const { return full_scale / 32768.0; }

  void validate() const {
    if (!(full_scale > 0.0)) throw std::invalid_argument("adc.full_scale must be > 0");
    if (bits != 16) throw std::invalid_argument("adc.bits must be 16");
    if (!(stage1_gain > 0.0)) throw std::invalid_argument("adc.stage1_gain must be > 0");
    if (!(stage2_gain > 0.0)) throw std::invalid_argument("adc.stage2_gain must be > 0");
    if (!(noise_rms >= 0.0)) throw std::invalid_argument("adc.noise_rms must be >= 0");
  }
};

/// Actuation chain parameters. amp_gain_v is the reciprocal of the power
/// amplifier gain, so the amplifier multiplies by 1/amp_gain_v.
struct DacConfig {
  int bits = 16;
  double out_min = -5.0;
  double out_max = 5.0;
  double amp_gain_v = 1.0;

  /// Volts per code step of the offset-binary output map.
  double lsb() const { return (out_max - out_min) / 65536.0; }

  void validate() const {
    if (bits != 16) throw std::invalid_argument("dac.bits must be 16");
    if (!(out_min < out_max)) throw std::invalid_argument("dac.out_min must be < dac.out_max");
    if (amp_gain_v == 0.0 || !std::isfinite(amp_gain_v)) {
      throw std::invalid_argument("dac.amp_gain_v must be nonzero");
    }
  }
};

/// Two-stage input amplifier; both stages are ideal gains.
template <typename Derived>
ChannelVector amplify(const Eigen::MatrixBase<Derived>& raw, const AdcConfig& cfg) {
  require_finite(raw, "amplify");
  return raw * (cfg.stage1_gain * cfg.stage2_gain);
}

/// Mid-tread bipolar quantizer: code 0 is exactly 0 V, out-of-range
/// inputs saturate at the rails.
inline int16_t adc_quantize(double volts, const AdcConfig& cfg) {
  if (std::isnan(volts)) return 0;
  const double code = std::round(volts / cfg.lsb());
  return static_cast<int16_t>(std::clamp(code, -32768.0, 32767.0));
}

inline double adc_dequantize(int32_t code, const AdcConfig& cfg) {
  if (code < -32768 || code > 32767) {
    throw std::domain_error("adc_dequantize: code out of range");
  }
  return static_cast<double>(code) * cfg.lsb();
}

template <typename Derived>
Eigen::Matrix<int16_t, kChannelCount, 1> adc_quantize(
    const Eigen::MatrixBase<Derived>& volts, const AdcConfig& cfg) {
  Eigen::Matrix<int16_t, kChannelCount, 1> codes;
  for (int i = 0; i < kChannelCount; ++i) codes[i] = adc_quantize(volts[i], cfg);
  return codes;
}

template <typename Derived>
ChannelVector adc_dequantize(const Eigen::MatrixBase<Derived>& codes,
                             const AdcConfig& cfg) {
  ChannelVector v;
  for (int i = 0; i < kChannelCount; ++i) v[i] = adc_dequantize(codes[i], cfg);
  return v;
}

/// Offset-binary DAC map: code 0 -> out_min, code 32768 -> the range
/// midpoint, step (out_max - out_min)/65536.
inline double dac_code_to_voltage(int32_t code, const DacConfig& cfg) {
  if (code < 0 || code > 65535) {
    throw std::domain_error("dac_code_to_voltage: code out of range");
  }
  return cfg.out_min + static_cast<double>(code) * cfg.lsb();
}

/// Inverse DAC map with saturation at the code range ends.
inline uint16_t dac_voltage_to_code(double volts, const DacConfig& cfg) {
  require_finite(volts, "dac_voltage_to_code");
  const double code = std::round((volts - cfg.out_min) / cfg.lsb());
  return static_cast<uint16_t>(std::clamp(code, 0.0, 65535.0));
}

/// Power amplifier: multiplies by the gain 1/amp_gain_v.
inline double power_amp(double volts, const DacConfig& cfg) {
  if (cfg.amp_gain_v == 0.0) {
    throw std::invalid_argument("power_amp: amp_gain_v must be nonzero");
  }
  require_finite(volts, "power_amp");
  return volts / cfg.amp_gain_v;
}

}  // namespace efc
