#include "gridshield/devices.hpp"

#include <cmath>
#include <numbers>

namespace gridshield::devices {

using netsim::EventKind;

WaveformSample Waveform::sample(SimTime t) const {
  const bool faulted = fault && t >= fault->at;
  const double amp_i = faulted ? fault->current_amplitude_ma : current_amplitude_ma;
  const double seconds = static_cast<double>(t.count()) * 1e-6;
  const double wt = 2.0 * std::numbers::pi * frequency_hz * seconds;
  constexpr std::array<double, 3> kPhase = {0.0, -2.0 * std::numbers::pi / 3.0, 2.0 * std::numbers::pi / 3.0};
  WaveformSample s;
  for (std::size_t i = 0; i < 3; ++i) {
    s.currents_ma[i] = static_cast<std::int32_t>(std::lround(amp_i * std::sin(wt + kPhase[i])));
    s.voltages_mv[i] = static_cast<std::int32_t>(std::lround(voltage_amplitude_mv * std::sin(wt + kPhase[i])));
  }
  return s;
}

SimTime tick_time(const MuConfig& config, std::uint64_t k) {
  return SimTime{k * 1'000'000ULL / config.samples_per_second};
}

SvEmission mu_step(const MuConfig& config, MuState& state, const WaveformSample& sample, SimTime at) {
  SvEmission e;
  e.frame.dst = config.dst;
  e.frame.src = config.src;
  e.frame.app_id = config.app_id;
  e.frame.sv_id = config.sv_id;
  e.frame.smp_cnt = static_cast<std::uint16_t>(state.ticks % config.samples_per_second);
  e.frame.currents_ma = sample.currents_ma;
  e.frame.voltages_mv = sample.voltages_mv;
  e.depart_at = at + config.internal_delay;
  ++state.ticks;
  return e;
}

MergingUnit::MergingUnit(NodeId self, MuConfig config, Waveform waveform)
    : self_(self), config_(std::move(config)), waveform_(std::move(waveform)) {
  if (config_.samples_per_second == 0) throw ConfigError("samples_per_second must be > 0");
}

void MergingUnit::start(netsim::Network& net, SimTime first_tick) {
  net.schedule(first_tick, [this](netsim::Network& n) { tick(n); });
}

void MergingUnit::tick(netsim::Network& net) {
  const SimTime now = net.now();
  const auto emission = mu_step(config_, state_, waveform_.sample(now), now);
  auto frame = netsim::make_frame(codec::encode_sv(emission.frame, config_.samples_per_second));
  net.record({.kind = EventKind::Sample, .node = self_, .port = config_.port, .digest = frame.digest});
  net.send({self_, config_.port}, std::move(frame), emission.depart_at);
  // Later ticks are anchored to the first one so rounding never accumulates.
  const SimTime origin = now - tick_time(config_, state_.ticks - 1);
  net.schedule(origin + tick_time(config_, state_.ticks), [this](netsim::Network& n) { tick(n); });
}

PiedState initial_pied_state(const PiedConfig& config) {
  PiedState s;
  s.last.dst = config.dst;
  s.last.src = config.src;
  s.last.app_id = config.app_id;
  s.last.gocb_ref = config.gocb_ref;
  s.last.dataset_ref = config.dataset_ref;
  s.last.time_allowed_to_live_ms = config.ttl_ms;
  s.last.st_num = config.initial_st_num;
  s.last.sq_num = 0;
  s.last.all_data = {false};
  return s;
}

std::optional<codec::GooseFrame> pied_on_sv(const codec::SvFrame& frame, PiedState& state, const PiedConfig& config,
                                            SimTime at) {
  if (state.latched) return std::nullopt;
  bool pickup = false;
  for (auto i : frame.currents_ma)
    if (std::abs(static_cast<std::int64_t>(i)) >= config.pickup_current_ma) pickup = true;
  if (!pickup) return std::nullopt;

  const SimTime departs = at + config.internal_delay;
  codec::GooseFrame changed = state.last;
  changed.all_data.front() = true;
  state.last = codec::next_publication(changed, true, departs.count());
  state.latched = true;
  state.published = true;
  state.trip_departs_at = departs;
  return state.last;
}

Pied::Pied(NodeId self, PiedConfig config)
    : self_(self), config_(std::move(config)), state_(initial_pied_state(config_)) {
  if (config_.pickup_current_ma <= 0) throw ConfigError("pickup_current must be > 0");
  if (config_.publish_interval.count() == 0) throw ConfigError("publish_interval must be > 0");
}

void Pied::start(netsim::Network& net, SimTime first) {
  net.schedule(first, [this](netsim::Network& n) { heartbeat(n); });
}

void Pied::publish(netsim::Network& net, const codec::GooseFrame& frame, SimTime at, codec::Digest cause) {
  const auto raw = codec::encode_goose(frame);
  for (PortIndex p : config_.goose_ports) net.send({self_, p}, netsim::make_frame(raw, false, cause), at);
}

void Pied::heartbeat(netsim::Network& net) {
  const SimTime now = net.now();
  net.schedule(now + config_.publish_interval, [this](netsim::Network& n) { heartbeat(n); });
  // A retransmission may not overtake a state change that is still being processed.
  if (state_.trip_departs_at && now < *state_.trip_departs_at) return;
  if (state_.published)
    state_.last = codec::next_publication(state_.last, false, now.count());
  else
    state_.last.timestamp_us = now.count();
  state_.published = true;
  publish(net, state_.last, now, 0);
}

void Pied::on_frame(netsim::Network& net, PortIndex, const netsim::Frame& frame) {
  const auto header = codec::peek_header(frame.bytes());
  if (!header || header->ethertype != codec::kSvEthertype) return;
  codec::SvFrame sv;
  try {
    sv = codec::decode_sv(frame.bytes(), config_.samples_per_second);
  } catch (const codec::CodecError&) {
    return;
  }
  if (auto trip = pied_on_sv(sv, state_, config_, net.now()))
    publish(net, *trip, *state_.trip_departs_at, frame.digest);
}

BreakerState omicron_on_goose(const codec::GooseFrame& frame, BreakerState state, SimTime at) {
  if (!frame.trip() || state.position == BreakerPosition::Open) return state;
  state.position = BreakerPosition::Open;
  state.last_trip_time = at;
  return state;
}

Omicron::Omicron(NodeId self, OmicronConfig config, FlagQuery flagged)
    : self_(self), config_(config), flagged_(std::move(flagged)) {}

void Omicron::on_frame(netsim::Network& net, PortIndex, const netsim::Frame& frame) {
  const auto header = codec::peek_header(frame.bytes());
  if (!header || header->ethertype != codec::kGooseEthertype) return;
  codec::GooseFrame goose;
  try {
    goose = codec::decode_goose(frame.bytes());
  } catch (const codec::CodecError&) {
    return;
  }
  if (!goose.trip() || trip_pending_ || breaker_.position == BreakerPosition::Open) return;
  if (config_.policy == BreakerPolicy::IgnoreFlagged && flagged_ && flagged_(frame.digest)) return;
  trip_pending_ = true;
  net.schedule(net.now() + config_.internal_delay, [this, goose, digest = frame.digest](netsim::Network& n) {
    trip_pending_ = false;
    const auto before = breaker_.position;
    breaker_ = omicron_on_goose(goose, breaker_, n.now());
    if (before != breaker_.position)
      n.record({.kind = EventKind::BreakerTrip, .node = self_, .digest = digest, .label = "open"});
  });
}

codec::GooseFrame injected_frame(const codec::GooseFrame& tmpl, std::uint32_t k, SimTime at) {
  codec::GooseFrame f = tmpl;
  f.sq_num = tmpl.sq_num + k;
  f.timestamp_us = at.count();
  return f;
}

void inject(netsim::Network& net, Host host, const codec::GooseFrame& tmpl, netsim::PortRef port,
            const InjectionSchedule& schedule) {
  const auto& topo = net.topology();
  if (!topo.has_port(port))
    throw netsim::TopologyError(netsim::TopologyErrc::UnknownPort, topo.describe(port));
  const auto& node_role = topo.role(port.node);
  if (node_role != role_of(host))
    throw netsim::TopologyError(netsim::TopologyErrc::InvalidSpec,
                                std::string(to_string(host)) + " cannot inject at " + topo.describe(port));
  const bool is_switch = node_role == role::kStationBusSwitch;
  for (std::uint32_t k = 0; k < schedule.count; ++k) {
    const SimTime at = schedule.start + schedule.interval * k;
    auto frame = netsim::make_frame(codec::encode_goose(injected_frame(tmpl, k, at)), true);
    if (is_switch)
      net.inject(port, std::move(frame), at);
    else
      net.send(port, std::move(frame), at);
  }
}

}  // namespace gridshield::devices
