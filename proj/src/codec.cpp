#include "gridshield/codec.hpp"

#include <charconv>
#include <cstdio>
#include <limits>

namespace gridshield::codec {

namespace {

// TLV tags in wire order.
enum Tag : std::uint8_t {
  kTagGocbRef = 0x80,
  kTagTtl = 0x81,
  kTagStNum = 0x82,
  kTagSqNum = 0x83,
  kTagTest = 0x84,
  kTagTimestamp = 0x85,
  kTagDatasetRef = 0x86,
  kTagAllData = 0x87,
};

enum SvTag : std::uint8_t {
  kTagSvId = 0x80,
  kTagSmpCnt = 0x82,
  kTagCurrents = 0x87,
  kTagVoltages = 0x88,
};

constexpr std::size_t kMaxBody = std::numeric_limits<std::uint16_t>::max();

[[noreturn]] void fail(CodecErrc code, const std::string& what) { throw CodecError(code, what); }

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void mac(const MacAddress& m) { out_.insert(out_.end(), m.octets.begin(), m.octets.end()); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

  void tlv(std::uint8_t tag, std::span<const std::uint8_t> value) {
    if (value.size() > kMaxBody) fail(CodecErrc::InvariantViolation, "TLV value too long");
    u8(tag);
    u16(static_cast<std::uint16_t>(value.size()));
    bytes(value);
  }
  void tlv(std::uint8_t tag, std::string_view s) {
    tlv(tag, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }

  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t remaining() const { return in_.size() - pos_; }

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    auto v = static_cast<std::uint16_t>((in_[pos_] << 8) | in_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }
  MacAddress mac() {
    need(6);
    MacAddress m;
    for (auto& o : m.octets) o = in_[pos_++];
    return m;
  }

  /// Reads a TLV header with the expected tag and returns the value view.
  std::span<const std::uint8_t> tlv(std::uint8_t tag, const char* field) {
    if (remaining() < 3) fail(CodecErrc::Truncated, std::string("missing TLV header for ") + field);
    const std::uint8_t got = u8();
    if (got != tag) fail(CodecErrc::MalformedField, std::string("unexpected tag for ") + field);
    const std::uint16_t len = u16();
    if (len > remaining()) fail(CodecErrc::Truncated, std::string("TLV overruns body: ") + field);
    auto value = in_.subspan(pos_, len);
    pos_ += len;
    return value;
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) fail(CodecErrc::Truncated, "unexpected end of frame");
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint64_t be_value(std::span<const std::uint8_t> v, std::size_t width, const char* field) {
  if (v.size() != width) fail(CodecErrc::MalformedField, std::string("bad length for ") + field);
  std::uint64_t out = 0;
  for (auto b : v) out = (out << 8) | b;
  return out;
}

bool bool_value(std::uint8_t b, const char* field) {
  if (b > 1) fail(CodecErrc::MalformedField, std::string("non-canonical boolean in ") + field);
  return b == 1;
}

std::string string_value(std::span<const std::uint8_t> v) { return {v.begin(), v.end()}; }

void put_i32(std::vector<std::uint8_t>& out, std::int32_t value) {
  const auto v = static_cast<std::uint32_t>(value);
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::array<std::int32_t, 3> triple_value(std::span<const std::uint8_t> v, const char* field) {
  if (v.size() != 12) fail(CodecErrc::MalformedField, std::string("bad length for ") + field);
  std::array<std::int32_t, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    std::uint32_t u = 0;
    for (std::size_t k = 0; k < 4; ++k) u = (u << 8) | v[i * 4 + k];
    out[i] = static_cast<std::int32_t>(u);
  }
  return out;
}

/// Ethernet header + app_id + body length; returns a reader over exactly the body.
Reader open_body(std::span<const std::uint8_t> bytes, std::uint16_t ethertype, FrameHeader& header) {
  if (bytes.size() < kEthernetHeaderSize) fail(CodecErrc::Truncated, "shorter than an Ethernet header");
  Reader r(bytes);
  header.dst = r.mac();
  header.src = r.mac();
  header.ethertype = r.u16();
  if (header.ethertype != ethertype) fail(CodecErrc::WrongEthertype, "unexpected ethertype");
  header.app_id = r.u16();
  const std::uint16_t body_len = r.u16();
  if (body_len > r.remaining()) fail(CodecErrc::Truncated, "declared body length exceeds frame");
  if (body_len < r.remaining()) fail(CodecErrc::MalformedField, "trailing bytes after body");
  return Reader(bytes.subspan(kFrameHeaderSize));
}

RawFrame close_frame(const MacAddress& dst, const MacAddress& src, std::uint16_t ethertype,
                     std::uint16_t app_id, Writer& body) {
  if (body.data().size() > kMaxBody) fail(CodecErrc::InvariantViolation, "body exceeds 65535 bytes");
  Writer w;
  w.mac(dst);
  w.mac(src);
  w.u16(ethertype);
  w.u16(app_id);
  w.u16(static_cast<std::uint16_t>(body.data().size()));
  w.bytes(body.data());
  return RawFrame{std::move(w.data())};
}

}  // namespace

std::string_view to_string(CodecErrc code) {
  switch (code) {
    case CodecErrc::WrongEthertype: return "WrongEthertype";
    case CodecErrc::Truncated: return "Truncated";
    case CodecErrc::MalformedField: return "MalformedField";
    case CodecErrc::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

CodecError::CodecError(CodecErrc code, const std::string& what)
    : Error(std::string(to_string(code)) + ": " + what), code_(code) {}

std::string MacAddress::to_string() const {
  char buf[18];
  std::snprintf(buf, sizeof buf, "%02X:%02X:%02X:%02X:%02X:%02X", octets[0], octets[1], octets[2],
                octets[3], octets[4], octets[5]);
  return buf;
}

MacAddress MacAddress::parse(std::string_view text) {
  MacAddress m;
  if (text.size() != 17) throw ConfigError("invalid MAC address: " + std::string(text));
  for (std::size_t i = 0; i < 6; ++i) {
    const auto part = text.substr(i * 3, 2);
    if (i < 5 && text[i * 3 + 2] != ':') throw ConfigError("invalid MAC address: " + std::string(text));
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + 2, value, 16);
    if (ec != std::errc{} || ptr != part.data() + 2)
      throw ConfigError("invalid MAC address: " + std::string(text));
    m.octets[i] = static_cast<std::uint8_t>(value);
  }
  return m;
}

Digest digest_of(std::span<const std::uint8_t> bytes) noexcept {
  Digest h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest_hex(Digest digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

std::optional<Digest> parse_digest(std::string_view hex) {
  if (hex.size() != 16) return std::nullopt;
  Digest value = 0;
  auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), value, 16);
  if (ec != std::errc{} || ptr != hex.data() + hex.size()) return std::nullopt;
  return value;
}

std::optional<FrameHeader> peek_header(std::span<const std::uint8_t> bytes) noexcept {
  if (bytes.size() < kEthernetHeaderSize) return std::nullopt;
  FrameHeader h;
  std::copy_n(bytes.begin(), 6, h.dst.octets.begin());
  std::copy_n(bytes.begin() + 6, 6, h.src.octets.begin());
  h.ethertype = static_cast<std::uint16_t>((bytes[12] << 8) | bytes[13]);
  if ((h.ethertype == kGooseEthertype || h.ethertype == kSvEthertype) && bytes.size() >= kFrameHeaderSize)
    h.app_id = static_cast<std::uint16_t>((bytes[14] << 8) | bytes[15]);
  return h;
}

void validate(const GooseFrame& frame) {
  if (!frame.dst.is_multicast()) fail(CodecErrc::InvariantViolation, "GOOSE destination must be multicast");
  if (frame.st_num == 0) fail(CodecErrc::InvariantViolation, "st_num must be >= 1");
  if (frame.time_allowed_to_live_ms == 0) fail(CodecErrc::InvariantViolation, "time_allowed_to_live must be > 0");
  if (frame.all_data.empty()) fail(CodecErrc::InvariantViolation, "all_data must be non-empty");
}

void validate(const SvFrame& frame, std::uint16_t smp_wrap) {
  if (smp_wrap == 0) fail(CodecErrc::InvariantViolation, "samples per second must be > 0");
  if (frame.smp_cnt >= smp_wrap) fail(CodecErrc::InvariantViolation, "smp_cnt beyond wrap value");
}

RawFrame encode_goose(const GooseFrame& frame) {
  validate(frame);
  Writer body;
  body.tlv(kTagGocbRef, frame.gocb_ref);
  Writer scratch;
  scratch.u32(frame.time_allowed_to_live_ms);
  body.tlv(kTagTtl, scratch.data());
  scratch.data().clear();
  scratch.u32(frame.st_num);
  body.tlv(kTagStNum, scratch.data());
  scratch.data().clear();
  scratch.u32(frame.sq_num);
  body.tlv(kTagSqNum, scratch.data());
  const std::uint8_t test = frame.test ? 1 : 0;
  body.tlv(kTagTest, std::span(&test, 1));
  scratch.data().clear();
  scratch.u64(frame.timestamp_us);
  body.tlv(kTagTimestamp, scratch.data());
  body.tlv(kTagDatasetRef, frame.dataset_ref);
  std::vector<std::uint8_t> points;
  points.reserve(frame.all_data.size());
  for (bool p : frame.all_data) points.push_back(p ? 1 : 0);
  body.tlv(kTagAllData, points);
  return close_frame(frame.dst, frame.src, kGooseEthertype, frame.app_id, body);
}

GooseFrame decode_goose(std::span<const std::uint8_t> bytes) {
  FrameHeader header;
  Reader body = open_body(bytes, kGooseEthertype, header);
  GooseFrame f;
  f.dst = header.dst;
  f.src = header.src;
  f.app_id = *header.app_id;
  f.gocb_ref = string_value(body.tlv(kTagGocbRef, "gocb_ref"));
  f.time_allowed_to_live_ms = static_cast<std::uint32_t>(be_value(body.tlv(kTagTtl, "ttl"), 4, "ttl"));
  f.st_num = static_cast<std::uint32_t>(be_value(body.tlv(kTagStNum, "st_num"), 4, "st_num"));
  f.sq_num = static_cast<std::uint32_t>(be_value(body.tlv(kTagSqNum, "sq_num"), 4, "sq_num"));
  const auto test = body.tlv(kTagTest, "test");
  if (test.size() != 1) fail(CodecErrc::MalformedField, "bad length for test");
  f.test = bool_value(test[0], "test");
  f.timestamp_us = be_value(body.tlv(kTagTimestamp, "timestamp"), 8, "timestamp");
  f.dataset_ref = string_value(body.tlv(kTagDatasetRef, "dataset_ref"));
  for (auto b : body.tlv(kTagAllData, "all_data")) f.all_data.push_back(bool_value(b, "all_data"));
  if (body.remaining() != 0) fail(CodecErrc::MalformedField, "unexpected trailing TLV data");
  validate(f);
  return f;
}

RawFrame encode_sv(const SvFrame& frame, std::uint16_t smp_wrap) {
  validate(frame, smp_wrap);
  Writer body;
  body.tlv(kTagSvId, frame.sv_id);
  Writer scratch;
  scratch.u16(frame.smp_cnt);
  body.tlv(kTagSmpCnt, scratch.data());
  std::vector<std::uint8_t> triple;
  for (auto c : frame.currents_ma) put_i32(triple, c);
  body.tlv(kTagCurrents, triple);
  triple.clear();
  for (auto v : frame.voltages_mv) put_i32(triple, v);
  body.tlv(kTagVoltages, triple);
  return close_frame(frame.dst, frame.src, kSvEthertype, frame.app_id, body);
}

SvFrame decode_sv(std::span<const std::uint8_t> bytes, std::uint16_t smp_wrap) {
  FrameHeader header;
  Reader body = open_body(bytes, kSvEthertype, header);
  SvFrame f;
  f.dst = header.dst;
  f.src = header.src;
  f.app_id = *header.app_id;
  f.sv_id = string_value(body.tlv(kTagSvId, "sv_id"));
  f.smp_cnt = static_cast<std::uint16_t>(be_value(body.tlv(kTagSmpCnt, "smp_cnt"), 2, "smp_cnt"));
  f.currents_ma = triple_value(body.tlv(kTagCurrents, "currents"), "currents");
  f.voltages_mv = triple_value(body.tlv(kTagVoltages, "voltages"), "voltages");
  if (body.remaining() != 0) fail(CodecErrc::MalformedField, "unexpected trailing TLV data");
  validate(f, smp_wrap);
  return f;
}

GooseFrame next_publication(const GooseFrame& prev, bool state_changed, std::uint64_t now_us) {
  GooseFrame next = prev;
  if (state_changed) {
    next.st_num = prev.st_num + 1;
    next.sq_num = 0;
  } else {
    next.sq_num = prev.sq_num + 1;
  }
  next.timestamp_us = now_us;
  return next;
}

}  // namespace gridshield::codec
