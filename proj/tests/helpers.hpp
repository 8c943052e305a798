#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gridshield/codec.hpp"
#include "gridshield/netsim.hpp"

namespace gridshield::test {

inline std::vector<std::uint8_t> read_hex(const std::string& name) {
  std::ifstream in(std::string(GRIDSHIELD_FIXTURE_DIR) + "/" + name);
  std::vector<std::uint8_t> out;
  std::string tok;
  while (in >> tok) out.push_back(static_cast<std::uint8_t>(std::stoul(tok, nullptr, 16)));
  return out;
}

inline codec::MacAddress mac(const char* text) { return codec::MacAddress::parse(text); }

/// The frame frozen in fixtures/goose_golden.hex.
inline codec::GooseFrame golden_goose() {
  codec::GooseFrame f;
  f.dst = mac("01:0C:CD:01:00:01");
  f.src = mac("00:1A:2B:3C:4D:03");
  f.app_id = 0x0001;
  f.gocb_ref = "PIED/LLN0$GO$gcb1";
  f.time_allowed_to_live_ms = 2000;
  f.st_num = 2;
  f.sq_num = 0;
  f.test = false;
  f.timestamp_us = 1'700'000'000'000'000ULL;
  f.dataset_ref = "PIED/LLN0$DS1";
  f.all_data = {true};
  return f;
}

inline codec::SvFrame golden_sv() {
  codec::SvFrame f;
  f.dst = mac("01:0C:CD:04:00:01");
  f.src = mac("00:1A:2B:3C:4D:02");
  f.app_id = 0x4000;
  f.sv_id = "MU01";
  f.smp_cnt = 0;
  f.currents_ma = {0, -866, 866};
  f.voltages_mv = {0, -57500, 57500};
  return f;
}

/// Records every frame it receives.
struct Sink : netsim::Node {
  std::vector<std::pair<netsim::PortIndex, codec::Digest>> got;
  void on_frame(netsim::Network&, netsim::PortIndex p, const netsim::Frame& f) override { got.emplace_back(p, f.digest); }
};

inline std::size_t count(const netsim::EventLog& log, netsim::EventKind kind) {
  std::size_t n = 0;
  for (const auto& e : log.events) n += e.kind == kind;
  return n;
}

}  // namespace gridshield::test
