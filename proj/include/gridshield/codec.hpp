#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridshield/error.hpp"

namespace gridshield::codec {

inline constexpr std::uint16_t kGooseEthertype = 0x88B8;
inline constexpr std::uint16_t kSvEthertype = 0x88BA;
inline constexpr std::size_t kEthernetHeaderSize = 14;
// Ethernet header + app_id + body length.
inline constexpr std::size_t kFrameHeaderSize = 18;

enum class CodecErrc { WrongEthertype, Truncated, MalformedField, InvariantViolation };

std::string_view to_string(CodecErrc code);

class CodecError : public Error {
 public:
  CodecError(CodecErrc code, const std::string& what);
  CodecErrc code() const noexcept { return code_; }

 private:
  CodecErrc code_;
};

struct MacAddress {
  std::array<std::uint8_t, 6> octets{};

  bool is_multicast() const noexcept { return (octets[0] & 0x01U) != 0; }
  std::string to_string() const;
  /// Accepts "aa:bb:cc:dd:ee:ff" (case-insensitive); throws ConfigError.
  static MacAddress parse(std::string_view text);

  auto operator<=>(const MacAddress&) const = default;
};

/// 64-bit FNV-1a over the frame bytes; stable across runs and platforms.
using Digest = std::uint64_t;
Digest digest_of(std::span<const std::uint8_t> bytes) noexcept;
std::string digest_hex(Digest digest);
std::optional<Digest> parse_digest(std::string_view hex);

struct RawFrame {
  std::vector<std::uint8_t> bytes;

  std::size_t length() const noexcept { return bytes.size(); }
  std::span<const std::uint8_t> view() const noexcept { return bytes; }
  bool operator==(const RawFrame&) const = default;
};

struct GooseFrame {
  MacAddress dst;
  MacAddress src;
  std::uint16_t app_id = 0;
  std::string gocb_ref;
  std::uint32_t time_allowed_to_live_ms = 0;
  std::uint32_t st_num = 1;
  std::uint32_t sq_num = 0;
  bool test = false;
  std::uint64_t timestamp_us = 0;
  std::string dataset_ref;
  /// Point 0 is the breaker trip command.
  std::vector<bool> all_data;

  bool trip() const noexcept { return !all_data.empty() && all_data.front(); }
  bool operator==(const GooseFrame&) const = default;
};

struct SvFrame {
  MacAddress dst;
  MacAddress src;
  std::uint16_t app_id = 0x4000;
  std::string sv_id;
  std::uint16_t smp_cnt = 0;
  std::array<std::int32_t, 3> currents_ma{};
  std::array<std::int32_t, 3> voltages_mv{};

  bool operator==(const SvFrame&) const = default;
};

/// The fixed 18-byte prefix shared by GOOSE and SV frames.
struct FrameHeader {
  MacAddress dst;
  MacAddress src;
  std::uint16_t ethertype = 0;
  std::optional<std::uint16_t> app_id;
};

/// Best-effort header view used for flow matching: nullopt below 14 bytes,
/// app_id only for GOOSE/SV frames that carry the full 18-byte prefix.
std::optional<FrameHeader> peek_header(std::span<const std::uint8_t> bytes) noexcept;

void validate(const GooseFrame& frame);
void validate(const SvFrame& frame, std::uint16_t smp_wrap);

RawFrame encode_goose(const GooseFrame& frame);
GooseFrame decode_goose(std::span<const std::uint8_t> bytes);
inline GooseFrame decode_goose(const RawFrame& raw) { return decode_goose(raw.view()); }

/// smp_wrap is the configured samples-per-second; smp_cnt must stay below it.
RawFrame encode_sv(const SvFrame& frame, std::uint16_t smp_wrap);
SvFrame decode_sv(std::span<const std::uint8_t> bytes, std::uint16_t smp_wrap);
inline SvFrame decode_sv(const RawFrame& raw, std::uint16_t smp_wrap) {
  return decode_sv(raw.view(), smp_wrap);
}

/// Publisher sequencing: a state change bumps st_num and resets sq_num,
/// a retransmission bumps sq_num.
GooseFrame next_publication(const GooseFrame& prev, bool state_changed, std::uint64_t now_us);

}  // namespace gridshield::codec
