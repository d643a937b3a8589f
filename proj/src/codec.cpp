#include "qeth/codec.hpp"

#include <cstdio>

namespace qeth {

namespace {

constexpr std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1u) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
    table[i] = c;
  }
  return table;
}

constexpr auto kCrcTable = make_crc_table();

constexpr std::array<std::string_view, kMessageTypeCount> kMessageNames = {
    "DiscoveryRequest",        "DiscoveryReply",       "EstablishmentRequest", "EstablishmentReply",
    "EstablishmentInterrupted", "KeepAlive",           "PtpEntanglementRequest", "PtpEntanglementReply",
    "SwappingRequest",         "SwappingReply",        "SwappingError",        "ErrorAck",
    "TokenTransfer",           "TokenAck",             "SwappingComplete",     "CompleteAck",
};

void put16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 8);
  p[1] = static_cast<std::uint8_t>(v);
}

void put32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
}

void put64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
}

std::uint16_t get16(const std::uint8_t* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }

std::uint32_t get32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t get64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}

// Layout offsets within the 40-byte frame.
constexpr std::size_t kCrcOffset = 16;
constexpr std::size_t kQp = kEthernetHeaderSize;

std::uint32_t frame_crc(const std::uint8_t* frame) {
  std::uint32_t c = 0xFFFFFFFFu;
  auto feed = [&](const std::uint8_t* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) c = kCrcTable[(c ^ p[i]) & 0xFFu] ^ (c >> 8);
  };
  feed(frame, kCrcOffset);
  feed(frame + kQp, kQpHeaderSize);
  return c ^ 0xFFFFFFFFu;
}

}  // namespace

std::string_view to_string(MessageType t) {
  const auto code = static_cast<std::uint8_t>(t);
  return code < kMessageTypeCount ? kMessageNames[code] : "Reserved";
}

std::optional<MessageType> message_type_from_code(std::uint8_t code) {
  if (code >= kMessageTypeCount) return std::nullopt;
  return static_cast<MessageType>(code);
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  std::uint32_t c = 0xFFFFFFFFu;
  for (auto b : bytes) c = kCrcTable[(c ^ b) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

FrameBytes encode_frame(const QpFrame& f) {
  FrameBytes out{};
  std::uint8_t* p = out.data();
  std::copy(f.eth.dst_mac.begin(), f.eth.dst_mac.end(), p);
  std::copy(f.eth.src_mac.begin(), f.eth.src_mac.end(), p + 6);
  put16(p + 12, f.eth.ether_type);
  put16(p + 14, f.eth.payload_len);

  std::uint8_t* q = p + kQp;
  put32(q, f.qp.seq);
  put32(q + 4, f.qp.ack_seq);
  q[8] = static_cast<std::uint8_t>((static_cast<std::uint8_t>(f.qp.msg_type) << 1) |
                                   (f.qp.ack_flag ? 1u : 0u));
  put64(q + 9, f.qp.e2e_id);
  q[17] = f.qp.level;
  put16(q + 18, f.qp.token_id);

  put32(p + kCrcOffset, frame_crc(p));
  return out;
}

std::string_view to_string(DecodeErrorKind k) {
  switch (k) {
    case DecodeErrorKind::TooShort: return "TooShort";
    case DecodeErrorKind::BadCrc: return "BadCrc";
    case DecodeErrorKind::UnknownEtherType: return "UnknownEtherType";
    case DecodeErrorKind::UnknownMessageType: return "UnknownMessageType";
    case DecodeErrorKind::BadHex: return "BadHex";
  }
  return "?";
}

QpFrame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameSize)
    throw DecodeError(DecodeErrorKind::TooShort,
                      "frame has " + std::to_string(bytes.size()) + " bytes, need 40");
  const std::uint8_t* p = bytes.data();
  const std::uint32_t received = get32(p + kCrcOffset);
  if (received != frame_crc(p)) throw DecodeError(DecodeErrorKind::BadCrc, "CRC mismatch");

  QpFrame f;
  std::copy(p, p + 6, f.eth.dst_mac.begin());
  std::copy(p + 6, p + 12, f.eth.src_mac.begin());
  f.eth.ether_type = get16(p + 12);
  if (f.eth.ether_type != kQuantumEtherType) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "EtherType 0x%04x is not quantum", f.eth.ether_type);
    throw DecodeError(DecodeErrorKind::UnknownEtherType, buf);
  }
  f.eth.payload_len = get16(p + 14);
  f.eth.crc = received;

  const std::uint8_t* q = p + kQp;
  f.qp.seq = get32(q);
  f.qp.ack_seq = get32(q + 4);
  const auto type = message_type_from_code(static_cast<std::uint8_t>(q[8] >> 1));
  if (!type)
    throw DecodeError(DecodeErrorKind::UnknownMessageType,
                      "message type code " + std::to_string(q[8] >> 1) + " is reserved");
  f.qp.msg_type = *type;
  f.qp.ack_flag = (q[8] & 1u) != 0;
  f.qp.e2e_id = get64(q + 9);
  f.qp.level = q[17];
  f.qp.token_id = get16(q + 18);
  return f;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xF]);
  }
  return s;
}

std::vector<std::uint8_t> from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  while (!hex.empty() && (hex.back() == '\n' || hex.back() == '\r' || hex.back() == ' ')) hex.remove_suffix(1);
  if (hex.size() % 2 != 0) throw DecodeError(DecodeErrorKind::BadHex, "odd number of hex digits");
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = nibble(hex[2 * i]);
    const int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw DecodeError(DecodeErrorKind::BadHex, "invalid hex digit");
    out[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return out;
}

std::string describe(const QpFrame& f) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "dst=%s src=%s ethertype=0x%04x payload_len=%u crc=0x%08x seq=%u ack_seq=%u "
                "msg=%s ack=%d e2e=%016llx level=%u token=%u",
                format_mac(f.eth.dst_mac).c_str(), format_mac(f.eth.src_mac).c_str(),
                f.eth.ether_type, f.eth.payload_len, f.eth.crc, f.qp.seq, f.qp.ack_seq,
                std::string(to_string(f.qp.msg_type)).c_str(), f.qp.ack_flag ? 1 : 0,
                static_cast<unsigned long long>(f.qp.e2e_id), f.qp.level, f.qp.token_id);
  return buf;
}

}  // namespace qeth
