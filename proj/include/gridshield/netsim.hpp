#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gridshield/codec.hpp"
#include "gridshield/error.hpp"

namespace gridshield::netsim {

/// Simulated time and time deltas, in whole microseconds.
using SimTime = std::chrono::duration<std::uint64_t, std::micro>;
using NodeId = std::uint32_t;
/// 1-based, matching the port numbers printed on the devices.
using PortIndex = std::uint16_t;

struct PortRef {
  NodeId node = 0;
  PortIndex port = 0;
  auto operator<=>(const PortRef&) const = default;
};

enum class TopologyErrc { DanglingPort, DuplicateLink, UnknownNode, UnknownPort, UnlinkedPort, InvalidSpec };

std::string_view to_string(TopologyErrc code);

class TopologyError : public Error {
 public:
  TopologyError(TopologyErrc code, const std::string& what);
  TopologyErrc code() const noexcept { return code_; }

 private:
  TopologyErrc code_;
};

struct NodeSpec {
  std::string name;
  std::string role;
  PortIndex port_count = 0;
};

struct LinkSpec {
  std::string a_node;
  PortIndex a_port = 0;
  std::string b_node;
  PortIndex b_port = 0;
  SimTime latency{};
  /// Free-form tag ("sv", "goose", ...) used for delay bookkeeping.
  std::string stage;
};

struct TopologySpec {
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
};

struct Link {
  PortRef a;
  PortRef b;
  SimTime latency{};
  std::string stage;
};

/// Validated, index-resolved view of a TopologySpec.
class Topology {
 public:
  /// Throws TopologyError (UnknownNode, DanglingPort, DuplicateLink, InvalidSpec).
  static Topology build(const TopologySpec& spec);

  std::size_t node_count() const noexcept { return nodes_.size(); }
  const NodeSpec& node_spec(NodeId id) const { return nodes_.at(id); }
  const std::string& name(NodeId id) const { return nodes_.at(id).name; }
  const std::string& role(NodeId id) const { return nodes_.at(id).role; }

  std::optional<NodeId> find_node(std::string_view name) const;
  NodeId node(std::string_view name) const;
  std::vector<NodeId> nodes_with_role(std::string_view role) const;
  /// The single node with this role; throws InvalidSpec if absent or ambiguous.
  NodeId unique_role(std::string_view role) const;

  bool has_port(PortRef ref) const noexcept;
  PortRef port(std::string_view node_name, PortIndex index) const;
  /// Parses "node:port"; throws UnknownNode / UnknownPort / InvalidSpec.
  PortRef parse_port(std::string_view text) const;
  std::string describe(PortRef ref) const;

  const Link* link_at(PortRef ref) const noexcept;
  std::optional<PortRef> peer(PortRef ref) const noexcept;
  std::span<const Link> links() const noexcept { return links_; }

 private:
  std::vector<NodeSpec> nodes_;
  std::vector<Link> links_;
  std::map<PortRef, std::size_t> link_by_port_;
};

enum class EventKind {
  FrameDeparture,
  FrameArrival,
  Drop,
  ControlMsg,
  PortStateChange,
  AlertRaised,
  Observation,
  VerdictReached,
  BreakerTrip,
  Sample,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

struct SimEvent {
  SimTime time{};
  std::uint64_t seq = 0;
  EventKind kind = EventKind::FrameArrival;
  NodeId node = 0;
  /// 0 for node-level events.
  PortIndex port = 0;
  codec::Digest digest = 0;
  /// Digest of the frame that caused this one to be produced, if any.
  codec::Digest cause = 0;
  bool injected = false;
  bool loop = false;
  std::string label;

  bool operator==(const SimEvent&) const = default;
};

/// Append-only, ordered by (time, seq).
struct EventLog {
  std::vector<SimEvent> events;

  bool empty() const noexcept { return events.empty(); }
  std::size_t size() const noexcept { return events.size(); }
  bool operator==(const EventLog&) const = default;
};

/// An in-flight frame: shared immutable bytes plus the digest computed once.
struct Frame {
  std::shared_ptr<const codec::RawFrame> raw;
  codec::Digest digest = 0;
  bool injected = false;
  codec::Digest cause = 0;

  std::span<const std::uint8_t> bytes() const noexcept { return raw->view(); }
};

Frame make_frame(codec::RawFrame raw, bool injected = false, codec::Digest cause = 0);

class Network;

/// Behaviour attached to a node; invoked for every frame arriving on an enabled port.
class Node {
 public:
  virtual ~Node() = default;
  virtual void on_frame(Network& net, PortIndex ingress, const Frame& frame) = 0;
};

/// Discrete-event engine. Single-threaded; events with equal time run in insertion order.
class Network {
 public:
  explicit Network(Topology topology);

  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  ~Network();

  const Topology& topology() const noexcept { return topology_; }
  SimTime now() const noexcept { return now_; }
  const EventLog& log() const noexcept { return log_; }
  bool port_enabled(PortRef ref) const;

  void attach(NodeId node, std::unique_ptr<Node> behaviour);
  Node* behaviour(NodeId node) const noexcept;
  template <class T>
  T& behaviour_as(NodeId node) const {
    return dynamic_cast<T&>(*behaviour(node));
  }

  /// Schedules a departure on `from`; throws UnknownPort / UnlinkedPort.
  void send(PortRef from, Frame frame, SimTime at);
  /// Frame appears as if it had arrived on `at_port` (e.g. an access port with no link).
  void inject(PortRef at_port, Frame frame, SimTime at);
  void set_port_state(PortRef port, bool enabled, SimTime at);
  void schedule(SimTime at, std::function<void(Network&)> action);

  /// Appends an event stamped with the current time.
  void record(SimEvent event);

  /// Processes every pending event with time <= t_end.
  const EventLog& run_until(SimTime t_end);

 private:
  struct Departure {
    PortRef from;
    Frame frame;
  };
  struct Arrival {
    PortRef at;
    Frame frame;
    bool ingress_injection = false;
  };
  struct PortChange {
    PortRef port;
    bool enabled = true;
  };
  struct Callback {
    std::function<void(Network&)> action;
  };
  struct Pending {
    SimTime time{};
    std::uint64_t order = 0;
    std::variant<Departure, Arrival, PortChange, Callback> what;
  };
  struct Later {
    bool operator()(const Pending& a, const Pending& b) const noexcept {
      return a.time != b.time ? a.time > b.time : a.order > b.order;
    }
  };

  void push(SimTime at, decltype(Pending::what) what);
  void process(Pending& pending);
  void deliver(PortRef at, const Frame& frame);
  void check_port(PortRef ref) const;
  std::size_t port_slot(PortRef ref) const;

  Topology topology_;
  std::vector<std::size_t> port_base_;
  std::vector<bool> port_enabled_;
  std::vector<std::unique_ptr<Node>> behaviours_;
  std::vector<Pending> queue_;  // min-heap under Later
  std::uint64_t next_order_ = 0;
  SimTime now_{};
  EventLog log_;
};

/// build_topology: validated network with every port enabled and no behaviours attached.
Network build_topology(const TopologySpec& spec);

}  // namespace gridshield::netsim
