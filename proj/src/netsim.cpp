#include "gridshield/netsim.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <set>

namespace gridshield::netsim {

namespace {

constexpr std::array kEventKindNames = {
    std::pair{EventKind::FrameDeparture, std::string_view("FrameDeparture")},
    std::pair{EventKind::FrameArrival, std::string_view("FrameArrival")},
    std::pair{EventKind::Drop, std::string_view("Drop")},
    std::pair{EventKind::ControlMsg, std::string_view("ControlMsg")},
    std::pair{EventKind::PortStateChange, std::string_view("PortStateChange")},
    std::pair{EventKind::AlertRaised, std::string_view("AlertRaised")},
    std::pair{EventKind::Observation, std::string_view("Observation")},
    std::pair{EventKind::VerdictReached, std::string_view("VerdictReached")},
    std::pair{EventKind::BreakerTrip, std::string_view("BreakerTrip")},
    std::pair{EventKind::Sample, std::string_view("Sample")},
};

}  // namespace

std::string_view to_string(TopologyErrc code) {
  switch (code) {
    case TopologyErrc::DanglingPort: return "DanglingPort";
    case TopologyErrc::DuplicateLink: return "DuplicateLink";
    case TopologyErrc::UnknownNode: return "UnknownNode";
    case TopologyErrc::UnknownPort: return "UnknownPort";
    case TopologyErrc::UnlinkedPort: return "UnlinkedPort";
    case TopologyErrc::InvalidSpec: return "InvalidSpec";
  }
  return "Unknown";
}

TopologyError::TopologyError(TopologyErrc code, const std::string& what)
    : Error(std::string(to_string(code)) + ": " + what), code_(code) {}

std::string_view to_string(EventKind kind) {
  for (auto [k, name] : kEventKindNames)
    if (k == kind) return name;
  return "Unknown";
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
  for (auto [k, name] : kEventKindNames)
    if (name == text) return k;
  return std::nullopt;
}

Topology Topology::build(const TopologySpec& spec) {
  Topology t;
  std::set<std::string> names;
  for (const auto& n : spec.nodes) {
    if (n.name.empty()) throw TopologyError(TopologyErrc::InvalidSpec, "node without a name");
    if (!names.insert(n.name).second) throw TopologyError(TopologyErrc::InvalidSpec, "duplicate node " + n.name);
    t.nodes_.push_back(n);
  }
  auto resolve = [&](const std::string& node, PortIndex port) {
    const auto id = t.find_node(node);
    if (!id) throw TopologyError(TopologyErrc::UnknownNode, node);
    const PortRef ref{*id, port};
    if (!t.has_port(ref))
      throw TopologyError(TopologyErrc::DanglingPort, node + ":" + std::to_string(port));
    return ref;
  };
  for (const auto& l : spec.links) {
    const PortRef a = resolve(l.a_node, l.a_port);
    const PortRef b = resolve(l.b_node, l.b_port);
    if (a == b) throw TopologyError(TopologyErrc::InvalidSpec, "link from a port to itself: " + t.describe(a));
    for (auto ref : {a, b})
      if (t.link_by_port_.contains(ref)) throw TopologyError(TopologyErrc::DuplicateLink, t.describe(ref));
    t.link_by_port_[a] = t.links_.size();
    t.link_by_port_[b] = t.links_.size();
    t.links_.push_back(Link{a, b, l.latency, l.stage});
  }
  return t;
}

std::optional<NodeId> Topology::find_node(std::string_view name) const {
  for (NodeId i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].name == name) return i;
  return std::nullopt;
}

NodeId Topology::node(std::string_view name) const {
  if (auto id = find_node(name)) return *id;
  throw TopologyError(TopologyErrc::UnknownNode, std::string(name));
}

std::vector<NodeId> Topology::nodes_with_role(std::string_view role) const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].role == role) out.push_back(i);
  return out;
}

NodeId Topology::unique_role(std::string_view role) const {
  const auto ids = nodes_with_role(role);
  if (ids.size() != 1)
    throw TopologyError(TopologyErrc::InvalidSpec, "expected exactly one node with role " + std::string(role));
  return ids.front();
}

bool Topology::has_port(PortRef ref) const noexcept {
  return ref.node < nodes_.size() && ref.port >= 1 && ref.port <= nodes_[ref.node].port_count;
}

PortRef Topology::port(std::string_view node_name, PortIndex index) const {
  const PortRef ref{node(node_name), index};
  if (!has_port(ref)) throw TopologyError(TopologyErrc::UnknownPort, describe(ref));
  return ref;
}

PortRef Topology::parse_port(std::string_view text) const {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos)
    throw TopologyError(TopologyErrc::InvalidSpec, "expected node:port, got " + std::string(text));
  unsigned value = 0;
  const auto digits = text.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || value > 0xFFFF)
    throw TopologyError(TopologyErrc::InvalidSpec, "bad port number in " + std::string(text));
  return port(text.substr(0, colon), static_cast<PortIndex>(value));
}

std::string Topology::describe(PortRef ref) const {
  const std::string node = ref.node < nodes_.size() ? nodes_[ref.node].name : "#" + std::to_string(ref.node);
  return node + ":" + std::to_string(ref.port);
}

const Link* Topology::link_at(PortRef ref) const noexcept {
  const auto it = link_by_port_.find(ref);
  return it == link_by_port_.end() ? nullptr : &links_[it->second];
}

std::optional<PortRef> Topology::peer(PortRef ref) const noexcept {
  const Link* l = link_at(ref);
  if (!l) return std::nullopt;
  return l->a == ref ? l->b : l->a;
}

Frame make_frame(codec::RawFrame raw, bool injected, codec::Digest cause) {
  Frame f;
  f.digest = codec::digest_of(raw.bytes);
  f.raw = std::make_shared<const codec::RawFrame>(std::move(raw));
  f.injected = injected;
  f.cause = cause;
  return f;
}

Network::Network(Topology topology) : topology_(std::move(topology)) {
  std::size_t total = 0;
  for (NodeId i = 0; i < topology_.node_count(); ++i) {
    port_base_.push_back(total);
    total += topology_.node_spec(i).port_count;
  }
  port_enabled_.assign(total, true);
  behaviours_.resize(topology_.node_count());
}

Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;
Network::~Network() = default;

std::size_t Network::port_slot(PortRef ref) const { return port_base_[ref.node] + (ref.port - 1); }

void Network::check_port(PortRef ref) const {
  if (!topology_.has_port(ref)) throw TopologyError(TopologyErrc::UnknownPort, topology_.describe(ref));
}

bool Network::port_enabled(PortRef ref) const {
  check_port(ref);
  return port_enabled_[port_slot(ref)];
}

void Network::attach(NodeId node, std::unique_ptr<Node> behaviour) {
  if (node >= behaviours_.size()) throw TopologyError(TopologyErrc::UnknownNode, "#" + std::to_string(node));
  behaviours_[node] = std::move(behaviour);
}

Node* Network::behaviour(NodeId node) const noexcept {
  return node < behaviours_.size() ? behaviours_[node].get() : nullptr;
}

void Network::push(SimTime at, decltype(Pending::what) what) {
  queue_.push_back(Pending{at, next_order_++, std::move(what)});
  std::push_heap(queue_.begin(), queue_.end(), Later{});
}

void Network::send(PortRef from, Frame frame, SimTime at) {
  check_port(from);
  if (!topology_.link_at(from)) throw TopologyError(TopologyErrc::UnlinkedPort, topology_.describe(from));
  push(at, Departure{from, std::move(frame)});
}

void Network::inject(PortRef at_port, Frame frame, SimTime at) {
  check_port(at_port);
  push(at, Arrival{at_port, std::move(frame), true});
}

void Network::set_port_state(PortRef port, bool enabled, SimTime at) {
  check_port(port);
  push(at, PortChange{port, enabled});
}

void Network::schedule(SimTime at, std::function<void(Network&)> action) {
  push(at, Callback{std::move(action)});
}

void Network::record(SimEvent event) {
  event.time = now_;
  event.seq = log_.events.size();
  log_.events.push_back(std::move(event));
}

const EventLog& Network::run_until(SimTime t_end) {
  while (!queue_.empty() && queue_.front().time <= t_end) {
    std::pop_heap(queue_.begin(), queue_.end(), Later{});
    Pending pending = std::move(queue_.back());
    queue_.pop_back();
    now_ = pending.time;
    process(pending);
  }
  return log_;
}

void Network::deliver(PortRef at, const Frame& frame) {
  record({.kind = EventKind::FrameArrival,
          .node = at.node,
          .port = at.port,
          .digest = frame.digest,
          .cause = frame.cause,
          .injected = frame.injected});
  if (Node* n = behaviour(at.node)) n->on_frame(*this, at.port, frame);
}

void Network::process(Pending& pending) {
  std::visit(
      [&](auto& what) {
        using T = std::decay_t<decltype(what)>;
        if constexpr (std::is_same_v<T, Departure>) {
          record({.kind = EventKind::FrameDeparture,
                  .node = what.from.node,
                  .port = what.from.port,
                  .digest = what.frame.digest,
                  .cause = what.frame.cause,
                  .injected = what.frame.injected});
          const Link* link = topology_.link_at(what.from);
          const PortRef far = link->a == what.from ? link->b : link->a;
          for (PortRef p : {what.from, far}) {
            if (!port_enabled_[port_slot(p)]) {
              record({.kind = EventKind::Drop,
                      .node = p.node,
                      .port = p.port,
                      .digest = what.frame.digest,
                      .injected = what.frame.injected,
                      .label = "port-disabled"});
              return;
            }
          }
          push(now_ + link->latency, Arrival{far, std::move(what.frame)});
        } else if constexpr (std::is_same_v<T, Arrival>) {
          if (what.ingress_injection && !port_enabled_[port_slot(what.at)]) {
            record({.kind = EventKind::Drop,
                    .node = what.at.node,
                    .port = what.at.port,
                    .digest = what.frame.digest,
                    .injected = what.frame.injected,
                    .label = "port-disabled"});
            return;
          }
          deliver(what.at, what.frame);
        } else if constexpr (std::is_same_v<T, PortChange>) {
          port_enabled_[port_slot(what.port)] = what.enabled;
          record({.kind = EventKind::PortStateChange,
                  .node = what.port.node,
                  .port = what.port.port,
                  .label = what.enabled ? "enable" : "disable"});
        } else {
          what.action(*this);
        }
      },
      pending.what);
}

Network build_topology(const TopologySpec& spec) { return Network(Topology::build(spec)); }

}  // namespace gridshield::netsim
