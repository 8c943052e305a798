#include <doctest.h>

#include <cmath>

#include "gridshield/devices.hpp"
#include "gridshield/scenarios.hpp"
#include "helpers.hpp"

using namespace gridshield;
using namespace gridshield::devices;
using netsim::SimTime;

TEST_CASE("waveform is balanced and steps at the fault") {
  Waveform w;
  w.fault = FaultStep{SimTime{100'000}, 20'000};
  for (std::uint64_t t = 0; t < 200'000; t += 1041) {
    const auto s = w.sample(SimTime{t});
    const auto sum = std::int64_t{s.currents_ma[0]} + s.currents_ma[1] + s.currents_ma[2];
    CHECK(std::llabs(sum) <= 2);
    const std::int32_t amp = t >= 100'000 ? 20'000 : 1000;
    for (auto i : s.currents_ma) CHECK(std::abs(i) <= amp);
  }
  // a quarter period into the cycle phase A peaks
  const auto peak = Waveform{}.sample(SimTime{1'000'000 / 240});
  CHECK(peak.currents_ma[0] == doctest::Approx(1000).epsilon(0.01));
  CHECK(Waveform{}.sample(SimTime{0}).currents_ma[0] == 0);
}

TEST_CASE("sample ticks and sample counter wrap") {
  MuConfig c;
  CHECK(tick_time(c, 0) == SimTime{0});
  CHECK(tick_time(c, 1) == SimTime{1041});
  CHECK(tick_time(c, 960) == SimTime{1'000'000});
  MuState s;
  s.ticks = 958;
  c.internal_delay = SimTime{3000};
  const auto a = mu_step(c, s, {}, SimTime{10});
  const auto b = mu_step(c, s, {}, SimTime{20});
  const auto d = mu_step(c, s, {}, SimTime{30});
  CHECK(a.frame.smp_cnt == 958);
  CHECK(b.frame.smp_cnt == 959);
  CHECK(d.frame.smp_cnt == 0);
  CHECK(a.depart_at == SimTime{3010});
  CHECK(s.ticks == 961);
}

TEST_CASE("PIED trips once on overcurrent") {
  PiedConfig c;
  c.initial_st_num = 4;
  c.internal_delay = SimTime{10'000};
  auto st = initial_pied_state(c);
  auto sv = test::golden_sv();
  sv.currents_ma = {4999, -4999, 0};
  CHECK_FALSE(pied_on_sv(sv, st, c, SimTime{0}));
  sv.currents_ma = {0, -5000, 0};
  const auto trip = pied_on_sv(sv, st, c, SimTime{100});
  REQUIRE(trip);
  CHECK(trip->trip());
  CHECK(trip->st_num == 5);
  CHECK(trip->sq_num == 0);
  CHECK(trip->timestamp_us == 10'100);
  CHECK(st.trip_departs_at == SimTime{10'100});
  CHECK_FALSE(pied_on_sv(sv, st, c, SimTime{200}));
}

TEST_CASE("breaker opens once") {
  auto f = test::golden_goose();
  BreakerState s;
  f.all_data = {false};
  s = omicron_on_goose(f, s, SimTime{1});
  CHECK(s.position == BreakerPosition::Closed);
  f.all_data = {true};
  s = omicron_on_goose(f, s, SimTime{2});
  CHECK(s.position == BreakerPosition::Open);
  CHECK(s.last_trip_time == SimTime{2});
  CHECK(omicron_on_goose(f, s, SimTime{3}) == s);
}

TEST_CASE("injected frames advance sq_num and stamp the send time") {
  const auto t = test::golden_goose();
  const auto f = injected_frame(t, 3, SimTime{55'000});
  CHECK(f.sq_num == t.sq_num + 3);
  CHECK(f.timestamp_us == 55'000);
  CHECK(f.st_num == t.st_num);
}

TEST_CASE("inject enforces the host/port pairing") {
  const auto spec = scenarios::load_scenario("attack1");
  auto net = netsim::build_topology(spec.topology);
  const auto& topo = net.topology();
  const InjectionSchedule once{SimTime{0}, SimTime{0}, 1};
  CHECK_THROWS_AS(inject(net, Host::Pied, test::golden_goose(), topo.port("ssw", 6), once), netsim::TopologyError);
  CHECK_THROWS_AS(inject(net, Host::StationBusSwitch, test::golden_goose(), {topo.node("ssw"), 40}, once),
                  netsim::TopologyError);

  inject(net, Host::StationBusSwitch, test::golden_goose(), topo.port("ssw", 6), {SimTime{10}, SimTime{5}, 3});
  inject(net, Host::Pied, test::golden_goose(), topo.port("pied", 2), once);
  const auto& log = net.run_until(SimTime{1000});
  std::size_t injected_arrivals_at_ssw6 = 0, pied_departures = 0;
  for (const auto& e : log.events) {
    CHECK(e.injected);
    if (e.kind == netsim::EventKind::FrameArrival && topo.describe({e.node, e.port}) == "ssw:6")
      ++injected_arrivals_at_ssw6;
    if (e.kind == netsim::EventKind::FrameDeparture && topo.describe({e.node, e.port}) == "pied:2") ++pied_departures;
  }
  CHECK(injected_arrivals_at_ssw6 == 3);
  CHECK(pied_departures == 1);
}
