#include <doctest.h>

#include <random>
#include <set>

#include "qeth/codec.hpp"

using namespace qeth;

namespace {

// Bit-at-a-time reference, no table.
std::uint32_t crc_ref(const std::vector<std::uint8_t>& data) {
  std::uint32_t c = 0xFFFFFFFFu;
  for (auto b : data) {
    c ^= b;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? (c >> 1) ^ 0xEDB88320u : c >> 1;
  }
  return ~c;
}

QpFrame sample_frame() {
  QpFrame f;
  f.eth.dst_mac = {2, 0, 0, 0, 0, 2};
  f.eth.src_mac = {2, 0, 0, 0, 0, 1};
  f.eth.payload_len = 100;
  f.qp.seq = 0x01020304;
  f.qp.ack_seq = 0x0a0b0c0d;
  f.qp.msg_type = MessageType::SwappingError;
  f.qp.ack_flag = true;
  f.qp.e2e_id = 0x1122334455667788ull;
  f.qp.level = 3;
  f.qp.token_id = 0x0203;
  return f;
}

}  // namespace

TEST_CASE("crc32 check value") {
  const std::string s = "123456789";
  std::vector<std::uint8_t> v(s.begin(), s.end());
  CHECK(crc32(v) == 0xCBF43926u);
  CHECK(crc32({}) == 0u);
}

TEST_CASE("crc32 matches bitwise reference on random buffers") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::uint8_t> v(rng() % 100);
    for (auto& b : v) b = static_cast<std::uint8_t>(rng());
    CHECK(crc32(v) == crc_ref(v));
  }
}

TEST_CASE("encode matches a frozen vector") {
  // Built independently with Python struct + zlib.crc32.
  const std::string want = "02000000000202000000000188b50064860e811b010203040a0b0c0d151122334455667788030203";
  const FrameBytes b = encode_frame(sample_frame());
  CHECK(to_hex(b) == want);
  const QpFrame d = decode_frame(from_hex(want));
  QpFrame f = sample_frame();
  f.eth.crc = 0x860e811bu;
  CHECK(d == f);
}

TEST_CASE("round trip over random frames") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    QpFrame f;
    for (auto& x : f.eth.dst_mac) x = static_cast<std::uint8_t>(rng());
    for (auto& x : f.eth.src_mac) x = static_cast<std::uint8_t>(rng());
    f.eth.payload_len = static_cast<std::uint16_t>(rng());
    f.qp.seq = static_cast<std::uint32_t>(rng());
    f.qp.ack_seq = static_cast<std::uint32_t>(rng());
    f.qp.msg_type = static_cast<MessageType>(rng() % kMessageTypeCount);
    f.qp.ack_flag = rng() & 1;
    f.qp.e2e_id = rng();
    f.qp.level = static_cast<std::uint8_t>(rng());
    f.qp.token_id = static_cast<std::uint16_t>(rng());
    const FrameBytes b = encode_frame(f);
    QpFrame d = decode_frame(b);
    d.eth.crc = 0;
    CHECK(d == f);
  }
}

TEST_CASE("crc covers bytes 0..15 and the QP header") {
  const FrameBytes b = encode_frame(sample_frame());
  std::vector<std::uint8_t> covered(b.begin(), b.begin() + 16);
  covered.insert(covered.end(), b.begin() + 20, b.end());
  const std::uint32_t stored = (std::uint32_t(b[16]) << 24) | (b[17] << 16) | (b[18] << 8) | b[19];
  CHECK(stored == crc_ref(covered));
}

TEST_CASE("every single-bit flip is rejected") {
  const FrameBytes b = encode_frame(sample_frame());
  int rejected = 0;
  for (std::size_t bit = 0; bit < kFrameBits; ++bit) {
    FrameBytes c = b;
    c[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    try {
      decode_frame(c);
    } catch (const DecodeError&) {
      ++rejected;
    }
  }
  CHECK(rejected == 320);
}

TEST_CASE("decode errors") {
  FrameBytes b = encode_frame(sample_frame());
  CHECK_THROWS_AS(decode_frame(std::span(b.data(), 39)), DecodeError);

  SUBCASE("unknown ethertype") {
    QpFrame f = sample_frame();
    f.eth.ether_type = 0x0800;
    try {
      decode_frame(encode_frame(f));
      FAIL("accepted");
    } catch (const DecodeError& e) {
      CHECK(e.kind() == DecodeErrorKind::UnknownEtherType);
    }
  }
  SUBCASE("unknown message type") {
    b[28] = static_cast<std::uint8_t>(40 << 1);
    std::vector<std::uint8_t> cov(b.begin(), b.begin() + 16);
    cov.insert(cov.end(), b.begin() + 20, b.end());
    const std::uint32_t c = crc_ref(cov);
    b[16] = c >> 24, b[17] = c >> 16, b[18] = c >> 8, b[19] = static_cast<std::uint8_t>(c);
    try {
      decode_frame(b);
      FAIL("accepted");
    } catch (const DecodeError& e) {
      CHECK(e.kind() == DecodeErrorKind::UnknownMessageType);
    }
  }
  SUBCASE("bad hex") {
    CHECK_THROWS_AS(from_hex("0g"), DecodeError);
    CHECK_THROWS_AS(from_hex("abc"), DecodeError);
  }
}

TEST_CASE("message type codes are dense") {
  std::set<std::string_view> names;
  for (std::uint8_t c = 0; c < kMessageTypeCount; ++c) {
    auto t = message_type_from_code(c);
    REQUIRE(t);
    names.insert(to_string(*t));
  }
  CHECK(names.size() == kMessageTypeCount);
  CHECK_FALSE(message_type_from_code(kMessageTypeCount));
}
