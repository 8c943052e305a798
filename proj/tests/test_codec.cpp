#include <doctest.h>

#include <random>

#include "helpers.hpp"

using namespace gridshield;
using namespace gridshield::codec;
using test::golden_goose;
using test::golden_sv;

namespace {

GooseFrame random_goose(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<std::uint32_t> u32;
  std::uniform_int_distribution<int> len(1, 60);
  auto text = [&] {
    std::string s(static_cast<std::size_t>(len(rng)), 'x');
    for (auto& c : s) c = static_cast<char>('A' + byte(rng) % 26);
    return s;
  };
  GooseFrame f;
  for (auto& o : f.dst.octets) o = static_cast<std::uint8_t>(byte(rng));
  for (auto& o : f.src.octets) o = static_cast<std::uint8_t>(byte(rng));
  f.dst.octets[0] |= 0x01;  // GOOSE is multicast
  f.app_id = static_cast<std::uint16_t>(u32(rng));
  f.gocb_ref = text();
  f.dataset_ref = text();
  f.time_allowed_to_live_ms = u32(rng) | 1U;
  f.st_num = u32(rng) | 1U;
  f.sq_num = u32(rng);
  f.test = byte(rng) & 1;
  f.timestamp_us = rng();
  f.all_data.resize(static_cast<std::size_t>(len(rng)));
  for (std::size_t i = 0; i < f.all_data.size(); ++i) f.all_data[i] = byte(rng) & 1;
  return f;
}

CodecErrc goose_error(std::span<const std::uint8_t> bytes) {
  try {
    decode_goose(bytes);
  } catch (const CodecError& e) {
    return e.code();
  }
  FAIL("expected CodecError");
  return CodecErrc::InvariantViolation;
}

}  // namespace

TEST_CASE("golden GOOSE bytes") {
  const auto golden = test::read_hex("goose_golden.hex");
  REQUIRE(golden.size() == 94);
  CHECK(encode_goose(golden_goose()).bytes == golden);
  CHECK(decode_goose(golden) == golden_goose());
}

TEST_CASE("golden SV bytes") {
  const auto golden = test::read_hex("sv_golden.hex");
  REQUIRE(golden.size() == 60);
  CHECK(encode_sv(golden_sv(), 960).bytes == golden);
  CHECK(decode_sv(golden, 960) == golden_sv());
}

TEST_CASE("GOOSE roundtrip on random frames") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto f = random_goose(rng);
    const auto raw = encode_goose(f);
    REQUIRE(decode_goose(raw) == f);
    CHECK(encode_goose(decode_goose(raw)) == raw);
  }
}

TEST_CASE("SV roundtrip keeps signed samples") {
  auto f = golden_sv();
  f.smp_cnt = 959;
  f.currents_ma = {INT32_MIN, -1, INT32_MAX};
  CHECK(decode_sv(encode_sv(f, 960), 960) == f);
}

TEST_CASE("decode errors") {
  const auto good = encode_goose(golden_goose()).bytes;

  SUBCASE("short header") {
    CHECK(goose_error(std::span(good).first(13)) == CodecErrc::Truncated);
    CHECK(goose_error({}) == CodecErrc::Truncated);
  }
  SUBCASE("every strict prefix is rejected") {
    for (std::size_t n = 0; n < good.size(); ++n) CHECK_THROWS_AS(decode_goose(std::span(good).first(n)), CodecError);
  }
  SUBCASE("wrong ethertype") {
    auto b = good;
    b[13] = 0xBA;
    CHECK(goose_error(b) == CodecErrc::WrongEthertype);
    CHECK_THROWS_AS(decode_sv(good, 960), CodecError);
  }
  SUBCASE("trailing byte") {
    auto b = good;
    b.push_back(0);
    CHECK(goose_error(b) == CodecErrc::MalformedField);
  }
  SUBCASE("unexpected tag") {
    auto b = good;
    b[18] = 0x99;
    CHECK(goose_error(b) == CodecErrc::MalformedField);
  }
  SUBCASE("boolean outside 0/1") {
    auto b = good;
    b.back() = 2;
    CHECK(goose_error(b) == CodecErrc::MalformedField);
  }
}

TEST_CASE("encode rejects frames that break invariants") {
  auto f = golden_goose();
  f.st_num = 0;
  CHECK_THROWS_AS(encode_goose(f), CodecError);
  f = golden_goose();
  f.dst = test::mac("00:1a:2b:3c:4d:01");
  CHECK_THROWS_AS(encode_goose(f), CodecError);

  auto sv = golden_sv();
  sv.smp_cnt = 960;
  try {
    encode_sv(sv, 960);
    FAIL("smp_cnt at the wrap value must be rejected");
  } catch (const CodecError& e) {
    CHECK(e.code() == CodecErrc::InvariantViolation);
  }
}

TEST_CASE("random bytes never crash the decoders") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> byte(0, 255), len(0, 200);
  const auto golden = encode_goose(golden_goose()).bytes;
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::uint8_t> b(static_cast<std::size_t>(len(rng)));
    for (auto& x : b) x = static_cast<std::uint8_t>(byte(rng));
    if (i % 2 == 0 && b.size() >= golden.size()) std::copy(golden.begin(), golden.begin() + 18, b.begin());
    try {
      decode_goose(b);
    } catch (const CodecError&) {
    }
    try {
      decode_sv(b, 960);
    } catch (const CodecError&) {
    }
  }
  // mutations of a valid frame either decode to something that re-encodes identically or fail cleanly
  for (int i = 0; i < 2000; ++i) {
    auto b = golden;
    b[static_cast<std::size_t>(byte(rng)) % b.size()] ^= static_cast<std::uint8_t>(1 + byte(rng) % 255);
    try {
      const auto f = decode_goose(b);
      CHECK(encode_goose(f).bytes == b);
    } catch (const CodecError&) {
    }
  }
}

TEST_CASE("next_publication sequencing") {
  const auto f = golden_goose();
  const auto retx = next_publication(f, false, 10);
  CHECK(retx.st_num == f.st_num);
  CHECK(retx.sq_num == f.sq_num + 1);
  const auto change = next_publication(retx, true, 20);
  CHECK(change.st_num == f.st_num + 1);
  CHECK(change.sq_num == 0);
  CHECK(change.timestamp_us == 20);
}

TEST_CASE("MAC parsing and digest") {
  const auto m = MacAddress::parse("01:0c:CD:01:00:01");
  CHECK(m.to_string() == "01:0C:CD:01:00:01");
  CHECK(m.is_multicast());
  CHECK_FALSE(MacAddress::parse("00:1a:2b:3c:4d:03").is_multicast());
  CHECK_THROWS_AS(MacAddress::parse("01:0c:cd:01:00"), ConfigError);
  CHECK_THROWS_AS(MacAddress::parse("zz:0c:cd:01:00:01"), ConfigError);

  const auto raw = encode_goose(golden_goose());
  const auto d = digest_of(raw.view());
  CHECK(digest_hex(d).size() == 16);
  CHECK(parse_digest(digest_hex(d)) == d);
  CHECK_FALSE(parse_digest("xyz").has_value());
  // FNV-1a offset basis for empty input
  CHECK(digest_of({}) == 0xcbf29ce484222325ULL);
}

TEST_CASE("peek_header") {
  const auto raw = encode_goose(golden_goose());
  const auto h = peek_header(raw.view());
  REQUIRE(h);
  CHECK(h->ethertype == kGooseEthertype);
  CHECK(h->app_id == std::optional<std::uint16_t>(1));
  CHECK_FALSE(peek_header(raw.view().first(13)));
  const auto short_h = peek_header(raw.view().first(14));
  REQUIRE(short_h);
  CHECK_FALSE(short_h->app_id);
}
