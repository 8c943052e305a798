#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gridshield/codec.hpp"
#include "gridshield/netsim.hpp"

namespace gridshield::sdn {

using netsim::NodeId;
using netsim::PortIndex;
using netsim::SimTime;

enum class FlowErrc { DuplicateEntry, NotFound, InvalidEntry };

class FlowError : public Error {
 public:
  FlowError(FlowErrc code, const std::string& what);
  FlowErrc code() const noexcept { return code_; }

 private:
  FlowErrc code_;
};

/// Unset fields are wildcards; at least one must be set.
struct MatchFields {
  std::optional<PortIndex> in_port;
  std::optional<std::uint16_t> ethertype;
  std::optional<codec::MacAddress> src_mac;
  std::optional<std::uint16_t> app_id;

  bool empty() const noexcept { return !in_port && !ethertype && !src_mac && !app_id; }
  bool operator==(const MatchFields&) const = default;
};

struct Forward {
  PortIndex port = 0;
  bool operator==(const Forward&) const = default;
};
struct Drop {
  bool operator==(const Drop&) const = default;
};
struct ToController {
  bool operator==(const ToController&) const = default;
};
using Action = std::variant<Forward, Drop, ToController>;

struct FlowEntry {
  std::uint16_t priority = 0;
  MatchFields match;
  std::vector<Action> actions;

  /// An entry whose only action is Drop; it masks every lower-priority match.
  bool is_drop() const noexcept;
  bool same_key(const FlowEntry& other) const noexcept {
    return priority == other.priority && match == other.match;
  }
  bool operator==(const FlowEntry&) const = default;
};

enum class DefaultAction { Drop, ToController };

class FlowTable {
 public:
  FlowTable() = default;
  explicit FlowTable(DefaultAction default_action) : default_action_(default_action) {}

  /// Throws FlowError::DuplicateEntry / InvalidEntry.
  void add(FlowEntry entry);
  /// Throws FlowError::NotFound.
  void remove(const FlowEntry& key);

  const std::vector<FlowEntry>& entries() const noexcept { return entries_; }
  DefaultAction default_action() const noexcept { return default_action_; }
  bool operator==(const FlowTable&) const = default;

 private:
  std::vector<FlowEntry> entries_;
  DefaultAction default_action_ = DefaultAction::Drop;
};

/// Collects every matching entry, highest priority first (table order breaks ties),
/// stopping at the first explicit Drop entry. Forward actions to the same port are
/// coalesced. With no match the default action applies; a Drop result is empty.
std::vector<Action> match_frame(const FlowTable& table, std::span<const std::uint8_t> raw, PortIndex ingress);

struct FlowMod {
  enum class Command { Add, Remove };
  NodeId switch_id = 0;
  Command command = Command::Add;
  FlowEntry entry;
};

struct PortMod {
  NodeId switch_id = 0;
  PortIndex port = 0;
  bool enable = false;
  bool operator==(const PortMod&) const = default;
};

struct PacketIn {
  NodeId switch_id = 0;
  PortIndex in_port = 0;
  codec::Digest digest = 0;
};

using ControllerMsg = std::variant<PacketIn, FlowMod, PortMod>;

/// Returns a new table; the input is left untouched.
FlowTable apply_flow_mod(FlowTable table, const FlowMod& mod);

/// Logs ControlMsg then PortStateChange at `at`. Throws TopologyError::UnknownPort.
void apply_port_mod(netsim::Network& net, const PortMod& mod, SimTime at);

std::string describe(const PortMod& mod, const netsim::Topology& topology);

/// OpenFlow-style switch: one flow table, one fixed per-frame processing delay.
class SdnSwitch : public netsim::Node {
 public:
  SdnSwitch(NodeId self, PortIndex port_count, FlowTable table, SimTime processing_delay);

  void on_frame(netsim::Network& net, PortIndex ingress, const netsim::Frame& frame) override;

  const FlowTable& table() const noexcept { return table_; }
  /// Replaces the table; every Forward port must exist on this switch.
  void install(FlowTable table);
  SimTime processing_delay() const noexcept { return processing_delay_; }

 private:
  NodeId self_;
  PortIndex port_count_;
  FlowTable table_;
  SimTime processing_delay_;
};

/// Applies one batch of forwarding actions for a frame that arrived at `at`:
/// departures at `at + delay`, PacketIn for ToController, a Drop event when nothing is emitted.
void emit(netsim::Network& net, NodeId self, PortIndex ingress, const netsim::Frame& frame,
          std::span<const Action> actions, SimTime delay);

/// Control channel with a fixed one-way latency; messages take effect at issue time + latency.
class Controller {
 public:
  explicit Controller(SimTime latency) : latency_(latency) {}

  SimTime latency() const noexcept { return latency_; }
  void send(netsim::Network& net, const ControllerMsg& msg, SimTime issued_at) const;

 private:
  SimTime latency_;
};

}  // namespace gridshield::sdn
