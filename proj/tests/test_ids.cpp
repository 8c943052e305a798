#include <doctest.h>

#include <random>

#include "gridshield/ids.hpp"
#include "gridshield/scenarios.hpp"
#include "helpers.hpp"

using namespace gridshield;
using namespace gridshield::ids;
using codec::GooseFrame;

namespace {

RuleSet only(RuleParams p) { return RuleSet({Rule{"r", std::move(p)}}); }

GooseFrame with_seq(std::uint32_t st, std::uint32_t sq) {
  auto f = test::golden_goose();
  f.st_num = st;
  f.sq_num = sq;
  return f;
}

RuleSet shipped_rules() { return scenarios::load_scenario("baseline").rules; }

ObservationRecord obs(Host h, PortIndex port, bool loop = false, std::uint64_t t = 0) {
  return {h, port, 0x10 + t, loop, SimTime{t}};
}

LocalizationErrc localize_error(std::vector<ObservationRecord> v) {
  try {
    localize(v, SimTime{0});
  } catch (const LocalizationError& e) {
    return e.code();
  }
  FAIL("expected LocalizationError");
  return LocalizationErrc::NoEvidence;
}

}  // namespace

TEST_CASE("a legal publication chain raises nothing") {
  const auto rules = shipped_rules();
  SubscriptionState state;
  GooseFrame f = with_seq(4, 0);
  std::uint64_t now = 0;
  for (int i = 0; i < 200; ++i) {
    now += 100'000;
    f = next_publication(f, i % 17 == 0, now);
    auto r = inspect(f, 6, state, rules, SimTime{now});
    CHECK_FALSE(r.abnormal());
    state = std::move(r.state);
  }
  CHECK(state.at(f.gocb_ref).st_num == f.st_num);
  CHECK(state.at(f.gocb_ref).sq_num == f.sq_num);
}

TEST_CASE("sequence regression agrees with a brute-force oracle") {
  const auto rules = only(SequenceRegression{});
  std::mt19937 rng(5);
  std::uniform_int_distribution<std::uint32_t> small(0, 4);
  for (int run = 0; run < 300; ++run) {
    SubscriptionState state;
    std::optional<std::pair<std::uint32_t, std::uint32_t>> last;
    for (int i = 0; i < 12; ++i) {
      const std::uint32_t st = small(rng), sq = small(rng);
      const bool expected = last && (st < last->first || (st == last->first && sq < last->second));
      auto r = inspect(with_seq(st, sq), 3, state, rules, SimTime{static_cast<std::uint64_t>(i)});
      REQUIRE(r.abnormal() == expected);
      if (!expected) last = {st, sq};
      state = std::move(r.state);
    }
  }
}

TEST_CASE("an alerting frame leaves the sequence state untouched") {
  const auto rules = only(SequenceRegression{});
  auto s = inspect(with_seq(5, 3), 3, {}, rules, SimTime{0}).state;
  const auto r = inspect(with_seq(2, 0), 3, s, rules, SimTime{1});
  REQUIRE(r.abnormal());
  CHECK(r.alerts[0].rule_id == "r");
  CHECK(r.state.at(test::golden_goose().gocb_ref).st_num == 5);
  CHECK(r.state.at(test::golden_goose().gocb_ref).sq_num == 3);
}

TEST_CASE("sequence skip") {
  const auto rules = only(SequenceSkip{2});
  auto s = inspect(with_seq(1, 0), 3, {}, rules, SimTime{0}).state;
  CHECK_FALSE(inspect(with_seq(1, 2), 3, s, rules, SimTime{1}).abnormal());
  CHECK(inspect(with_seq(1, 3), 3, s, rules, SimTime{1}).abnormal());
  CHECK_FALSE(inspect(with_seq(2, 0), 3, s, rules, SimTime{1}).abnormal());
}

TEST_CASE("ttl bound is inclusive") {
  const auto rules = only(TtlBound{100, 2000});
  for (auto [ttl, bad] : std::vector<std::pair<std::uint32_t, bool>>{{99, true}, {100, false}, {2000, false}, {2001, true}}) {
    auto f = with_seq(1, 0);
    f.time_allowed_to_live_ms = ttl;
    CHECK(inspect(f, 3, {}, rules, SimTime{0}).abnormal() == bad);
  }
}

TEST_CASE("publisher whitelist rejects strangers and unknown control blocks") {
  const auto f = with_seq(1, 0);
  const auto rules = only(PublisherWhitelist{{{f.gocb_ref, {f.src}}}});
  CHECK_FALSE(inspect(f, 3, {}, rules, SimTime{0}).abnormal());
  auto stranger = f;
  stranger.src = test::mac("00:1a:2b:3c:4d:05");
  CHECK(inspect(stranger, 3, {}, rules, SimTime{0}).abnormal());
  auto other = f;
  other.gocb_ref = "X/LLN0$GO$gcb9";
  CHECK(inspect(other, 3, {}, rules, SimTime{0}).abnormal());
}

TEST_CASE("ingress binding") {
  const auto f = with_seq(1, 0);
  const auto rules = only(IngressBinding{{{f.gocb_ref, {6}}}});
  CHECK_FALSE(inspect(f, 6, {}, rules, SimTime{0}).abnormal());
  CHECK(inspect(f, 3, {}, rules, SimTime{0}).abnormal());
  auto other = f;
  other.gocb_ref = "X/LLN0$GO$gcb9";
  CHECK_FALSE(inspect(other, 3, {}, rules, SimTime{0}).abnormal());
}

TEST_CASE("rate limit counts per fixed window") {
  const auto rules = only(RateLimit{3, SimTime{1000}});
  SubscriptionState s;
  std::vector<bool> flags;
  for (std::uint64_t t : {0, 100, 200, 300, 999, 1000, 1001}) {
    auto r = inspect(with_seq(1, static_cast<std::uint32_t>(t)), 3, s, rules, SimTime{t});
    flags.push_back(r.abnormal());
    s = std::move(r.state);
  }
  CHECK(flags == std::vector<bool>{false, false, false, true, true, false, false});
}

TEST_CASE("rule set validation") {
  CHECK_THROWS_AS(RuleSet({Rule{"a", SequenceRegression{}}, Rule{"a", TtlBound{}}}), ConfigError);
  CHECK_THROWS_AS(RuleSet({Rule{"", SequenceRegression{}}}), ConfigError);
  CHECK_THROWS_AS(RuleSet({Rule{"t", TtlBound{10, 5}}}), ConfigError);
  CHECK_THROWS_AS(RuleSet({Rule{"w", RateLimit{1, SimTime{0}}}}), ConfigError);
  for (int k = 0; k <= static_cast<int>(RuleKind::RateLimit); ++k)
    CHECK(parse_rule_kind(to_string(static_cast<RuleKind>(k))) == static_cast<RuleKind>(k));
}

TEST_CASE("loop tracker window boundaries") {
  LoopTracker t(7, SimTime{100});
  t.tag_loop(42, SimTime{1000});
  CHECK_FALSE(t.is_loop(42, 7, SimTime{999}));
  CHECK(t.is_loop(42, 7, SimTime{1000}));
  CHECK(t.is_loop(42, 7, SimTime{1100}));
  CHECK_FALSE(t.is_loop(42, 7, SimTime{1101}));
  CHECK_FALSE(t.is_loop(42, 3, SimTime{1050}));
  CHECK_FALSE(t.is_loop(43, 7, SimTime{1050}));
  t.prune(SimTime{2000});
  CHECK_FALSE(t.is_loop(42, 7, SimTime{1100}));
}

TEST_CASE("localization decision table") {
  using enum Host;
  SUBCASE("non-loop copy on the loop-return port blames the switch") {
    const auto v = localize(std::vector{obs(StationBusSwitch, 3), obs(StationBusSwitch, 7, false, 1)}, SimTime{9});
    CHECK(v.culprit == StationBusSwitch);
    CHECK(v.evidence.size() == 2);
    CHECK(v.decided_at == SimTime{9});
  }
  SUBCASE("switch-bound frame on the primary port blames the switch") {
    CHECK(localize(std::vector{obs(StationBusSwitch, 3)}, SimTime{0}).culprit == StationBusSwitch);
  }
  SUBCASE("PIED first on the primary port with only loop copies") {
    const auto v = localize(std::vector{obs(Pied, 3), obs(Pied, 6, false, 1), obs(Pied, 7, true, 2)}, SimTime{0});
    CHECK(v.culprit == Pied);
  }
  SUBCASE("no evidence") { CHECK(localize_error({}) == LocalizationErrc::NoEvidence); }
  SUBCASE("neither row") { CHECK(localize_error({obs(Pied, 6)}) == LocalizationErrc::Inconclusive); }
  SUBCASE("both rows") {
    CHECK(localize_error({obs(Pied, 3), obs(StationBusSwitch, 3, false, 1)}) == LocalizationErrc::Inconclusive);
  }
  SUBCASE("a non-loop port-7 copy rules out the PIED row") {
    CHECK(localize(std::vector{obs(Pied, 3), obs(Pied, 7, false, 1)}, SimTime{0}).culprit == StationBusSwitch);
  }
}

TEST_CASE("mitigation plans") {
  const auto spec = scenarios::load_scenario("attack1");
  const auto topo = netsim::Topology::build(spec.topology);
  const auto plan = plan_mitigation(topo);
  CHECK(plan.ids == topo.node("ids"));
  CHECK(plan.ids_keep == std::vector<PortIndex>{5, 6});
  std::set<std::string> facing;
  for (auto p : plan.pied_facing) facing.insert(topo.describe(p));
  CHECK(facing == std::set<std::string>{"ssw:4", "psw:5"});

  auto final_state = [&](Host h, int times) {
    auto net = netsim::Network(netsim::Topology::build(spec.topology));
    for (int i = 0; i < times; ++i)
      for (const auto& m : mitigate({h, {}, SimTime{0}}, plan)) sdn::apply_port_mod(net, m, SimTime{10 * (i + 1U)});
    net.run_until(SimTime{1000});
    std::set<std::string> disabled;
    for (netsim::NodeId n = 0; n < topo.node_count(); ++n)
      for (PortIndex p = 1; p <= topo.node_spec(n).port_count; ++p)
        if (!net.port_enabled({n, p})) disabled.insert(topo.describe({n, p}));
    return disabled;
  };

  std::set<std::string> ss_expected;
  for (PortIndex p = 1; p <= plan.ids_port_count; ++p)
    if (p != 5 && p != 6) ss_expected.insert("ids:" + std::to_string(p));
  CHECK(final_state(Host::StationBusSwitch, 1) == ss_expected);
  CHECK(final_state(Host::StationBusSwitch, 2) == ss_expected);
  CHECK(final_state(Host::Pied, 1) == facing);
  CHECK(final_state(Host::Pied, 2) == facing);
}

TEST_CASE("origin binding falls back by port") {
  IdsConfig c;
  c.hosts[test::mac("00:1a:2b:3c:4d:03")] = Host::Pied;
  c.port_origin[6] = Host::Pied;
  CHECK(origin_of(c, test::mac("00:1a:2b:3c:4d:03"), 3) == Host::Pied);
  CHECK(origin_of(c, test::mac("00:1a:2b:3c:4d:99"), 6) == Host::Pied);
  CHECK(origin_of(c, test::mac("00:1a:2b:3c:4d:99"), 3) == Host::StationBusSwitch);
  c.enabled = false;
  CHECK(c.processing_delay() == SimTime{0});
  c.enabled = true;
  c.passes = 2;
  CHECK(c.processing_delay() == SimTime{8000});
}
