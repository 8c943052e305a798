#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gridshield/codec.hpp"
#include "gridshield/netsim.hpp"
#include "gridshield/substation.hpp"

namespace gridshield::devices {

using netsim::NodeId;
using netsim::PortIndex;
using netsim::SimTime;

struct WaveformSample {
  std::array<std::int32_t, 3> currents_ma{};
  std::array<std::int32_t, 3> voltages_mv{};
};

/// Step change of the current amplitude at a given time.
struct FaultStep {
  SimTime at{};
  std::int32_t current_amplitude_ma = 0;
};

/// Balanced three-phase source driven by the Omicron test set.
struct Waveform {
  double frequency_hz = 60.0;
  std::int32_t current_amplitude_ma = 1000;
  std::int32_t voltage_amplitude_mv = 66395;
  std::optional<FaultStep> fault;

  WaveformSample sample(SimTime t) const;
};

struct MuConfig {
  std::uint16_t samples_per_second = 960;
  std::string source_node = "omicron";
  std::string sv_id = "MU01";
  codec::MacAddress dst;
  codec::MacAddress src;
  std::uint16_t app_id = 0x4000;
  SimTime internal_delay{};
  PortIndex port = 1;
};

struct MuState {
  std::uint64_t ticks = 0;
};

struct SvEmission {
  codec::SvFrame frame;
  SimTime depart_at{};
};

/// Time of sample tick k (floor of k / samples_per_second seconds).
SimTime tick_time(const MuConfig& config, std::uint64_t k);

/// One sample tick: builds the SV frame and advances the counter.
SvEmission mu_step(const MuConfig& config, MuState& state, const WaveformSample& sample, SimTime at);

class MergingUnit : public netsim::Node {
 public:
  MergingUnit(NodeId self, MuConfig config, Waveform waveform);

  /// Schedules tick 0 at `first_tick`; every tick schedules the next one.
  void start(netsim::Network& net, SimTime first_tick = SimTime{0});
  void on_frame(netsim::Network&, PortIndex, const netsim::Frame&) override {}

  const MuConfig& config() const noexcept { return config_; }

 private:
  void tick(netsim::Network& net);

  NodeId self_;
  MuConfig config_;
  Waveform waveform_;
  MuState state_;
};

struct PiedConfig {
  std::int32_t pickup_current_ma = 5000;
  SimTime publish_interval{100'000};
  SimTime internal_delay{};
  std::string gocb_ref = "PIED/LLN0$GO$gcb1";
  std::string dataset_ref = "PIED/LLN0$DS1";
  codec::MacAddress dst;
  codec::MacAddress src;
  std::uint16_t app_id = 1;
  std::uint32_t ttl_ms = 2000;
  std::uint32_t initial_st_num = 1;
  std::vector<PortIndex> goose_ports;
  /// Needed to decode incoming SV.
  std::uint16_t samples_per_second = 960;
};

struct PiedState {
  codec::GooseFrame last;
  bool latched = false;
  bool published = false;
  std::optional<SimTime> trip_departs_at;
};

PiedState initial_pied_state(const PiedConfig& config);

/// Instantaneous overcurrent check. On the first pickup the trip publication is
/// built (timestamped at departure, at + internal delay) and the latch is set.
std::optional<codec::GooseFrame> pied_on_sv(const codec::SvFrame& frame, PiedState& state, const PiedConfig& config,
                                            SimTime at);

class Pied : public netsim::Node {
 public:
  Pied(NodeId self, PiedConfig config);

  /// Starts the periodic publication (first one at `first`).
  void start(netsim::Network& net, SimTime first = SimTime{0});
  void on_frame(netsim::Network& net, PortIndex ingress, const netsim::Frame& frame) override;

  const PiedState& state() const noexcept { return state_; }

 private:
  void heartbeat(netsim::Network& net);
  void publish(netsim::Network& net, const codec::GooseFrame& frame, SimTime at, codec::Digest cause);

  NodeId self_;
  PiedConfig config_;
  PiedState state_;
};

enum class BreakerPosition { Closed, Open };

struct BreakerState {
  BreakerPosition position = BreakerPosition::Closed;
  std::optional<SimTime> last_trip_time;
  bool operator==(const BreakerState&) const = default;
};

/// Trip point true opens the breaker (idempotent); anything else leaves it unchanged.
BreakerState omicron_on_goose(const codec::GooseFrame& frame, BreakerState state, SimTime at);

enum class BreakerPolicy {
  /// Frames the IDS has already raised an alert on are forwarded but not acted upon.
  IgnoreFlagged,
  ActOnAll,
};

struct OmicronConfig {
  SimTime internal_delay{};
  BreakerPolicy policy = BreakerPolicy::IgnoreFlagged;
};

class Omicron : public netsim::Node {
 public:
  using FlagQuery = std::function<bool(codec::Digest)>;

  Omicron(NodeId self, OmicronConfig config, FlagQuery flagged = {});

  void on_frame(netsim::Network& net, PortIndex ingress, const netsim::Frame& frame) override;
  const BreakerState& breaker() const noexcept { return breaker_; }

 private:
  NodeId self_;
  OmicronConfig config_;
  FlagQuery flagged_;
  BreakerState breaker_;
  bool trip_pending_ = false;
};

struct InjectionSchedule {
  SimTime start{};
  SimTime interval{};
  std::uint32_t count = 1;
};

/// k-th frame of an injection run: template with sq_num + k and timestamp `at`.
codec::GooseFrame injected_frame(const codec::GooseFrame& tmpl, std::uint32_t k, SimTime at);

/// Enters attacker frames at `port` per schedule, flagged as injected in the log.
/// On a switch the frame enters as if received on that port; on the PIED it is
/// transmitted from it. Throws TopologyError (UnknownPort, InvalidSpec on a host/port mismatch).
void inject(netsim::Network& net, Host host, const codec::GooseFrame& tmpl, netsim::PortRef port,
            const InjectionSchedule& schedule);

}  // namespace gridshield::devices
