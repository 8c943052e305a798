#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "gridshield/sdn.hpp"
#include "helpers.hpp"

using namespace gridshield;
using namespace gridshield::sdn;
using netsim::EventKind;

namespace {

const auto kGoose = codec::encode_goose(test::golden_goose());

FlowEntry fwd(std::uint16_t prio, MatchFields m, std::vector<PortIndex> ports) {
  FlowEntry e{prio, m, {}};
  for (auto p : ports) e.actions.push_back(Forward{p});
  return e;
}

FlowEntry drop(std::uint16_t prio, MatchFields m) { return FlowEntry{prio, m, {Drop{}}}; }

std::vector<PortIndex> ports_of(const std::vector<Action>& actions) {
  std::vector<PortIndex> out;
  for (const auto& a : actions)
    if (const auto* f = std::get_if<Forward>(&a)) out.push_back(f->port);
  return out;
}

// Straightforward restatement used as an oracle: group by priority descending.
std::set<PortIndex> oracle(const FlowTable& t, PortIndex ingress) {
  std::set<PortIndex> out;
  std::map<std::uint16_t, std::vector<const FlowEntry*>, std::greater<>> by_prio;
  for (const auto& e : t.entries()) by_prio[e.priority].push_back(&e);
  for (const auto& [prio, group] : by_prio)
    for (const auto* e : group) {
      const bool hit = (!e->match.in_port || *e->match.in_port == ingress) &&
                       (!e->match.ethertype || *e->match.ethertype == codec::kGooseEthertype) &&
                       (!e->match.src_mac || *e->match.src_mac == test::golden_goose().src) &&
                       (!e->match.app_id || *e->match.app_id == 1);
      if (!hit) continue;
      if (e->is_drop()) return out;
      for (const auto& a : e->actions)
        if (const auto* f = std::get_if<Forward>(&a)) out.insert(f->port);
    }
  return out;
}

netsim::TopologySpec star() {
  return {{{"sw", "switch", 4}, {"h1", "host", 1}, {"h2", "host", 1}, {"h3", "host", 1}},
          {{"sw", 1, "h1", 1, netsim::SimTime{10}, ""},
           {"sw", 2, "h2", 1, netsim::SimTime{10}, ""},
           {"sw", 3, "h3", 1, netsim::SimTime{10}, ""}}};
}

}  // namespace

TEST_CASE("matching entries are unioned and coalesced") {
  FlowTable t;
  t.add(fwd(100, {.in_port = 1}, {2}));
  t.add(fwd(200, {.in_port = 1, .ethertype = codec::kGooseEthertype}, {3, 2}));
  t.add(fwd(50, {.ethertype = codec::kSvEthertype}, {4}));
  CHECK(ports_of(match_frame(t, kGoose.view(), 1)) == std::vector<PortIndex>{3, 2});
  CHECK(ports_of(match_frame(t, kGoose.view(), 2)).empty());
}

TEST_CASE("a drop entry masks lower priorities only") {
  FlowTable t;
  t.add(fwd(300, {.app_id = 1}, {4}));
  t.add(drop(200, {.in_port = 1}));
  t.add(fwd(100, {.in_port = 1}, {2}));
  CHECK(ports_of(match_frame(t, kGoose.view(), 1)) == std::vector<PortIndex>{4});
  CHECK(ports_of(match_frame(t, kGoose.view(), 2)) == std::vector<PortIndex>{4});
}

TEST_CASE("default actions") {
  FlowTable dropping;
  CHECK(match_frame(dropping, kGoose.view(), 1).empty());
  FlowTable punting(DefaultAction::ToController);
  const auto a = match_frame(punting, kGoose.view(), 1);
  REQUIRE(a.size() == 1);
  CHECK(std::holds_alternative<ToController>(a[0]));
  // a matching drop is not a miss
  punting.add(drop(1, {.in_port = 1}));
  CHECK(match_frame(punting, kGoose.view(), 1).empty());
}

TEST_CASE("match_frame agrees with the oracle on random tables") {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> small(0, 4), prio(0, 3), port(1, 6);
  for (int round = 0; round < 500; ++round) {
    FlowTable t;
    const int n = small(rng) + 1;
    for (int i = 0; i < n; ++i) {
      MatchFields m;
      if (small(rng) < 3) m.in_port = static_cast<PortIndex>(port(rng) % 3 + 1);
      if (small(rng) < 2) m.ethertype = small(rng) < 3 ? codec::kGooseEthertype : codec::kSvEthertype;
      if (small(rng) < 1) m.app_id = static_cast<std::uint16_t>(small(rng) % 2);
      if (m.empty()) m.in_port = 1;
      FlowEntry e = small(rng) == 0 ? drop(static_cast<std::uint16_t>(prio(rng)), m)
                                    : fwd(static_cast<std::uint16_t>(prio(rng)), m,
                                          {static_cast<PortIndex>(port(rng)), static_cast<PortIndex>(port(rng))});
      try {
        t.add(e);
      } catch (const FlowError&) {
      }
    }
    for (PortIndex in = 1; in <= 3; ++in) {
      const auto got = ports_of(match_frame(t, kGoose.view(), in));
      const std::set<PortIndex> unique(got.begin(), got.end());
      CHECK(unique.size() == got.size());
      CHECK(unique == oracle(t, in));
    }
  }
}

TEST_CASE("table edits") {
  FlowTable t;
  const auto e = fwd(10, {.in_port = 1}, {2});
  CHECK_THROWS_AS(t.add(FlowEntry{1, {}, {Forward{2}}}), FlowError);
  CHECK_THROWS_AS(t.add(FlowEntry{1, {.in_port = 1}, {}}), FlowError);
  t.add(e);
  try {
    t.add(fwd(10, {.in_port = 1}, {3}));
    FAIL("duplicate");
  } catch (const FlowError& err) {
    CHECK(err.code() == FlowErrc::DuplicateEntry);
  }
  try {
    t.remove(fwd(11, {.in_port = 1}, {2}));
    FAIL("missing");
  } catch (const FlowError& err) {
    CHECK(err.code() == FlowErrc::NotFound);
  }

  const FlowTable before = t;
  const auto extra = fwd(5, {.ethertype = codec::kGooseEthertype}, {3});
  const FlowTable added = apply_flow_mod(before, {0, FlowMod::Command::Add, extra});
  CHECK(before.entries().size() == 1);
  CHECK(added.entries().size() == 2);
  CHECK(apply_flow_mod(added, {0, FlowMod::Command::Remove, extra}) == before);
}

TEST_CASE("switch duplicates frames to every output port") {
  auto net = netsim::build_topology(star());
  const auto& topo = net.topology();
  const auto sw = topo.node("sw");
  FlowTable t;
  t.add(fwd(10, {.in_port = 1}, {2, 3}));
  t.add(fwd(5, {.in_port = 1}, {4}));  // port 4 has no link
  net.attach(sw, std::make_unique<SdnSwitch>(sw, 4, t, netsim::SimTime{1000}));
  net.send(topo.port("h1", 1), netsim::make_frame(kGoose), netsim::SimTime{0});
  const auto& log = net.run_until(netsim::SimTime{5000});
  std::vector<std::pair<std::string, netsim::SimTime>> deps;
  for (const auto& e : log.events)
    if (e.kind == EventKind::FrameDeparture && e.node == sw) deps.emplace_back(topo.describe({e.node, e.port}), e.time);
  CHECK(deps == std::vector<std::pair<std::string, netsim::SimTime>>{{"sw:2", netsim::SimTime{1010}},
                                                                     {"sw:3", netsim::SimTime{1010}}});
  CHECK(test::count(log, EventKind::FrameArrival) == 3);
}

TEST_CASE("dropped frames are logged with a reason") {
  auto net = netsim::build_topology(star());
  const auto sw = net.topology().node("sw");
  net.attach(sw, std::make_unique<SdnSwitch>(sw, 4, FlowTable{}, netsim::SimTime{0}));
  net.send(net.topology().port("h1", 1), netsim::make_frame(kGoose), netsim::SimTime{0});
  const auto& log = net.run_until(netsim::SimTime{100});
  REQUIRE(test::count(log, EventKind::Drop) == 1);
  CHECK(log.events.back().label == "flow-drop");
}

TEST_CASE("PortMod goes through the controller with its latency") {
  auto net = netsim::build_topology(star());
  const auto sw = net.topology().node("sw");
  Controller ctl(netsim::SimTime{1000});
  ctl.send(net, PortMod{sw, 2, false}, netsim::SimTime{500});
  CHECK_THROWS_AS(apply_port_mod(net, PortMod{sw, 9, false}, netsim::SimTime{0}), netsim::TopologyError);
  const auto& log = net.run_until(netsim::SimTime{10'000});
  REQUIRE(log.size() == 2);
  CHECK(log.events[0].kind == EventKind::ControlMsg);
  CHECK(log.events[0].time == netsim::SimTime{1500});
  CHECK(log.events[1].kind == EventKind::PortStateChange);
  CHECK(log.events[1].label == "disable");
  CHECK_FALSE(net.port_enabled({sw, 2}));
}

TEST_CASE("FlowMod installs a new table at issue time plus latency") {
  auto net = netsim::build_topology(star());
  const auto sw = net.topology().node("sw");
  net.attach(sw, std::make_unique<SdnSwitch>(sw, 4, FlowTable{}, netsim::SimTime{0}));
  Controller ctl(netsim::SimTime{200});
  ctl.send(net, FlowMod{sw, FlowMod::Command::Add, fwd(1, {.in_port = 1}, {2})}, netsim::SimTime{0});
  net.run_until(netsim::SimTime{199});
  CHECK(net.behaviour_as<SdnSwitch>(sw).table().entries().empty());
  net.run_until(netsim::SimTime{200});
  CHECK(net.behaviour_as<SdnSwitch>(sw).table().entries().size() == 1);
}
