#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qeth/topology.hpp"

namespace qeth {

inline constexpr std::uint16_t kQuantumEtherType = 0x88B5;
inline constexpr std::size_t kEthernetHeaderSize = 20;
inline constexpr std::size_t kQpHeaderSize = 20;
inline constexpr std::size_t kFrameSize = kEthernetHeaderSize + kQpHeaderSize;
inline constexpr std::size_t kFrameBits = kFrameSize * 8;

enum class MessageType : std::uint8_t {
  DiscoveryRequest = 0,
  DiscoveryReply,
  EstablishmentRequest,
  EstablishmentReply,
  EstablishmentInterrupted,
  KeepAlive,
  PtpEntanglementRequest,
  PtpEntanglementReply,
  SwappingRequest,
  SwappingReply,
  SwappingError,
  ErrorAck,
  TokenTransfer,
  TokenAck,
  SwappingComplete,
  CompleteAck,
};

inline constexpr std::uint8_t kMessageTypeCount = 16;

std::string_view to_string(MessageType t);
std::optional<MessageType> message_type_from_code(std::uint8_t code);

struct EthernetHeader {
  MacAddress dst_mac{};
  MacAddress src_mac{};
  std::uint16_t ether_type = kQuantumEtherType;
  std::uint16_t payload_len = 0;  // qubit count announced for the quantum packet
  std::uint32_t crc = 0;          // filled in by encode_frame

  bool operator==(const EthernetHeader&) const = default;
};

struct QpHeader {
  std::uint32_t seq = 0;
  std::uint32_t ack_seq = 0;
  MessageType msg_type = MessageType::DiscoveryRequest;
  bool ack_flag = false;
  std::uint64_t e2e_id = 0;
  std::uint8_t level = 0;
  std::uint16_t token_id = 0;

  bool operator==(const QpHeader&) const = default;
};

struct QpFrame {
  EthernetHeader eth;
  QpHeader qp;

  bool operator==(const QpFrame&) const = default;
};

using FrameBytes = std::array<std::uint8_t, kFrameSize>;

/// Standard CRC-32 (Ethernet FCS): reflected 0x04C11DB7, init and final xor 0xFFFFFFFF.
std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Encodes big-endian; the CRC field of `f` is ignored and recomputed over
/// Ethernet bytes 0..15 followed by the whole QP header.
FrameBytes encode_frame(const QpFrame& f);

enum class DecodeErrorKind { TooShort, BadCrc, UnknownEtherType, UnknownMessageType, BadHex };

std::string_view to_string(DecodeErrorKind k);

class DecodeError : public std::runtime_error {
 public:
  DecodeError(DecodeErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  DecodeErrorKind kind() const { return kind_; }

 private:
  DecodeErrorKind kind_;
};

/// Decodes the first 40 bytes. Throws DecodeError. The returned frame carries
/// the received CRC value.
QpFrame decode_frame(std::span<const std::uint8_t> bytes);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_hex(std::string_view hex);

/// One-line human readable rendering used by `qswap decode`.
std::string describe(const QpFrame& f);

}  // namespace qeth
