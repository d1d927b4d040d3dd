#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>

namespace efc {

// Inter-board transport: a fixed 36-byte frame over the serial link.
//
//   byte 0      sync 0xA5
//   byte 1      seq, wrapping counter
//   bytes 2-33  16 signed 16-bit words, little-endian
//   bytes 34-35 CRC-16/CCITT-FALSE over bytes 1..33, big-endian

inline constexpr uint8_t kFrameSync = 0xA5;
inline constexpr std::size_t kFrameSize = 36;
inline constexpr std::size_t kFramePayloadWords = 16;
inline constexpr int kFrameBits = static_cast<int>(kFrameSize) * 8;  // 288

using FrameBytes = std::array<uint8_t, kFrameSize>;
using FramePayload = std::array<int16_t, kFramePayloadWords>;

namespace detail {
inline const std::array<uint16_t, 256>& crc16_table() {
  static const std::array<uint16_t, 256> table = [] {
    std::array<uint16_t, 256> t{};
    for (int i = 0; i < 256; ++i) {
      uint16_t crc = static_cast<uint16_t>(i << 8);
      for (int bit = 0; bit < 8; ++bit) {
        crc = (crc & 0x8000) ? static_cast<uint16_t>((crc << 1) ^ 0x1021)
                             : static_cast<uint16_t>(crc << 1);
      }
      t[i] = crc;
    }
    return t;
  }();
  return table;
}
}  // namespace detail

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout.
inline uint16_t crc16_ccitt_false(const uint8_t* data, std::size_t len) {
  const auto& table = detail::crc16_table();
  uint16_t crc = 0xFFFF;
  for (std::size_t i = 0; i < len; ++i) {
    crc = static_cast<uint16_t>((crc << 8) ^ table[(crc >> 8) ^ data[i]]);
  }
  return crc;
}

inline FrameBytes encode_frame(const FramePayload& payload, uint8_t seq) {
  FrameBytes bytes{};
  bytes[0] = kFrameSync;
  bytes[1] = seq;
  for (std::size_t i = 0; i < kFramePayloadWords; ++i) {
    const uint16_t w = static_cast<uint16_t>(payload[i]);
    bytes[2 + 2 * i] = static_cast<uint8_t>(w & 0xFF);
    bytes[3 + 2 * i] = static_cast<uint8_t>(w >> 8);
  }
  const uint16_t crc = crc16_ccitt_false(bytes.data() + 1, 33);
  bytes[34] = static_cast<uint8_t>(crc >> 8);
  bytes[35] = static_cast<uint8_t>(crc & 0xFF);
  return bytes;
}

enum class DecodeStatus { ok, bad_sync, bad_crc };

struct DecodedFrame {
  DecodeStatus status = DecodeStatus::ok;
  uint8_t seq = 0;
  FramePayload payload{};
};

inline DecodedFrame decode_frame(const FrameBytes& bytes) {
  DecodedFrame out;
  if (bytes[0] != kFrameSync) {
    out.status = DecodeStatus::bad_sync;
    return out;
  }
  const uint16_t stored =
      static_cast<uint16_t>((bytes[34] << 8) | bytes[35]);
  if (crc16_ccitt_false(bytes.data() + 1, 33) != stored) {
    out.status = DecodeStatus::bad_crc;
    return out;
  }
  out.seq = bytes[1];
  for (std::size_t i = 0; i < kFramePayloadWords; ++i) {
    out.payload[i] = static_cast<int16_t>(
        static_cast<uint16_t>(bytes[2 + 2 * i] | (bytes[3 + 2 * i] << 8)));
  }
  return out;
}

/// Tracks sequence continuity on the receive side. Every skipped seq
/// value (dropped or corrupted frame) shows up as a gap.
class SeqTracker {
 public:
  void accept(uint8_t seq) {
    if (seen_any_) {
      lost_ += static_cast<uint8_t>(seq - expected_);
    }
    expected_ = static_cast<uint8_t>(seq + 1);
    seen_any_ = true;
  }

  long lost() const { return lost_; }

 private:
  uint8_t expected_ = 0;
  bool seen_any_ = false;
  long lost_ = 0;
};

/// Serial link timing and loss model.
struct LinkModel {
  double bitrate = 40e6;       ///< bits per second
  double fixed_latency = 0.0;  ///< seconds
  uint64_t drop_seed = 0;
  double drop_prob = 0.0;

  void validate() const {
    if (!(bitrate > 0.0)) throw std::invalid_argument("link.bitrate must be > 0");
    if (!(drop_prob >= 0.0 && drop_prob < 1.0)) {
      throw std::invalid_argument("link.drop_prob must be in [0, 1)");
    }
    if (!(fixed_latency >= 0.0) || !std::isfinite(fixed_latency)) {
      throw std::invalid_argument("link.fixed_latency must be >= 0");
    }
  }

  double serialization_delay() const { return kFrameBits / bitrate; }
  double total_delay() const { return fixed_latency + serialization_delay(); }
};

/// One frame through the link: either an arrival time or a drop. The RNG
/// is owned by the caller; one mutator at a time.
inline std::optional<double> transmit(const LinkModel& model, double now,
                                      std::mt19937_64& rng) {
  if (!std::isfinite(now)) throw std::domain_error("transmit: non-finite time");
  if (model.drop_prob > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < model.drop_prob) return std::nullopt;
  }
  return now + model.total_delay();
}

}  // namespace efc
