#include <doctest.h>

#include <cstring>
#include <random>

#include "efc/link.hpp"

using namespace efc;

TEST_CASE("crc16 known answers") {
  const uint8_t check[] = {'1', '2', '3', '4', '5', '6', '7', '8', '9'};
  CHECK(crc16_ccitt_false(check, sizeof(check)) == 0x29B1);

  uint8_t zeros[33] = {};
  CHECK(crc16_ccitt_false(zeros, sizeof(zeros)) == 0xB33E);

  CHECK(crc16_ccitt_false(nullptr, 0) == 0xFFFF);  // init value untouched
}

TEST_CASE("frame layout is bit exact") {
  FramePayload payload;
  for (int i = 0; i < 16; ++i) payload[i] = static_cast<int16_t>(i);
  const FrameBytes f = encode_frame(payload, 0);

  CHECK(f.size() == 36);
  CHECK(f[0] == 0xA5);
  CHECK(f[1] == 0x00);
  // little-endian payload words
  for (int i = 0; i < 16; ++i) {
    CHECK(f[2 + 2 * i] == static_cast<uint8_t>(i));
    CHECK(f[3 + 2 * i] == 0x00);
  }
  // CRC over bytes 1..33, stored big-endian
  CHECK(f[34] == 0xC6);
  CHECK(f[35] == 0xB8);
  CHECK(crc16_ccitt_false(f.data() + 1, 33) == 0xC6B8);

  FramePayload neg;
  neg.fill(-2);  // 0xFFFE
  const FrameBytes g = encode_frame(neg, 0x7F);
  CHECK(g[1] == 0x7F);
  CHECK(g[2] == 0xFE);
  CHECK(g[3] == 0xFF);
}

TEST_CASE("one payload bit changes the crc") {
  FramePayload a{};
  FramePayload b{};
  b[0] = 1;  // single-bit difference in word 0
  const FrameBytes fa = encode_frame(a, 0);
  const FrameBytes fb = encode_frame(b, 0);
  const uint16_t ca = static_cast<uint16_t>((fa[34] << 8) | fa[35]);
  const uint16_t cb = static_cast<uint16_t>((fb[34] << 8) | fb[35]);
  CHECK(ca == 0xB33E);  // 33 zero bytes
  CHECK(ca != cb);
}

TEST_CASE("round trip over random payloads") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> word(-32768, 32767);
  std::uniform_int_distribution<int> seq(0, 255);
  for (int trial = 0; trial < 10000; ++trial) {
    FramePayload payload;
    for (auto& w : payload) w = static_cast<int16_t>(word(rng));
    const uint8_t s = static_cast<uint8_t>(seq(rng));
    const DecodedFrame d = decode_frame(encode_frame(payload, s));
    REQUIRE(d.status == DecodeStatus::ok);
    CHECK(d.seq == s);
    CHECK(d.payload == payload);
  }
}

TEST_CASE("decode rejects bad sync and bad crc") {
  FramePayload payload{};
  FrameBytes f = encode_frame(payload, 9);
  f[0] = 0x5A;
  CHECK(decode_frame(f).status == DecodeStatus::bad_sync);

  f = encode_frame(payload, 9);
  f[35] ^= 0xFF;
  CHECK(decode_frame(f).status == DecodeStatus::bad_crc);
}

TEST_CASE("every single-bit corruption of seq or payload is rejected") {
  FramePayload payload;
  for (int i = 0; i < 16; ++i) payload[i] = static_cast<int16_t>(1000 * i - 8000);
  const FrameBytes clean = encode_frame(payload, 0xA5);
  REQUIRE(decode_frame(clean).status == DecodeStatus::ok);
  for (int bit = 0; bit < 264; ++bit) {
    FrameBytes f = clean;
    f[1 + bit / 8] ^= static_cast<uint8_t>(1u << (bit % 8));
    CHECK(decode_frame(f).status == DecodeStatus::bad_crc);
  }
}

TEST_CASE("sequence tracker counts gaps modulo 256") {
  SeqTracker t;
  CHECK(t.lost() == 0);
  t.accept(0);
  t.accept(1);
  t.accept(2);
  CHECK(t.lost() == 0);
  t.accept(5);  // skipped 3 and 4
  CHECK(t.lost() == 2);
  for (int s = 6; s <= 255; ++s) t.accept(static_cast<uint8_t>(s));
  t.accept(0);  // wraparound, no loss
  CHECK(t.lost() == 2);
  t.accept(2);  // skipped 1
  CHECK(t.lost() == 3);
}

TEST_CASE("serialization delay at the design bitrate") {
  const LinkModel link;
  CHECK(link.bitrate == 40e6);
  CHECK(link.serialization_delay() == 7.2e-6);
  CHECK(link.total_delay() == 7.2e-6);

  LinkModel slow;
  slow.bitrate = 1e6;
  slow.fixed_latency = 10e-6;
  CHECK(slow.serialization_delay() == doctest::Approx(288e-6));
  CHECK(slow.total_delay() == doctest::Approx(298e-6));
}

TEST_CASE("link validation") {
  LinkModel l;
  l.bitrate = 0.0;
  CHECK_THROWS_AS(l.validate(), std::invalid_argument);
  l = LinkModel{};
  l.fixed_latency = -1e-6;
  CHECK_THROWS_AS(l.validate(), std::invalid_argument);
  l = LinkModel{};
  l.drop_prob = 1.5;
  CHECK_THROWS_AS(l.validate(), std::invalid_argument);
  l = LinkModel{};
  l.drop_prob = 1.0;  // certain loss is a misconfiguration
  CHECK_THROWS_AS(l.validate(), std::invalid_argument);
  l = LinkModel{};
  l.drop_prob = -0.1;
  CHECK_THROWS_AS(l.validate(), std::invalid_argument);
}

TEST_CASE("transmit delivers or drops deterministically") {
  LinkModel l;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto arrival = transmit(l, 1e-3, rng);
    REQUIRE(arrival.has_value());
    CHECK(*arrival == 1e-3 + l.total_delay());
  }

  l.drop_prob = 1.0;
  for (int i = 0; i < 100; ++i) {
    CHECK_FALSE(transmit(l, 0.0, rng).has_value());
  }

  l.drop_prob = 0.5;
  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(transmit(l, 0.0, a).has_value() == transmit(l, 0.0, b).has_value());
  }
}
