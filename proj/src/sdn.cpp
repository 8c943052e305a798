#include "gridshield/sdn.hpp"

#include <algorithm>
#include <numeric>

namespace gridshield::sdn {

namespace {

std::string_view to_string(FlowErrc code) {
  switch (code) {
    case FlowErrc::DuplicateEntry: return "DuplicateEntry";
    case FlowErrc::NotFound: return "NotFound";
    case FlowErrc::InvalidEntry: return "InvalidEntry";
  }
  return "Unknown";
}

bool matches(const MatchFields& m, const std::optional<codec::FrameHeader>& header, PortIndex ingress) {
  if (m.in_port && *m.in_port != ingress) return false;
  if (m.ethertype && (!header || header->ethertype != *m.ethertype)) return false;
  if (m.src_mac && (!header || header->src != *m.src_mac)) return false;
  if (m.app_id && (!header || header->app_id != m.app_id)) return false;
  return true;
}

}  // namespace

FlowError::FlowError(FlowErrc code, const std::string& what)
    : Error(std::string(to_string(code)) + ": " + what), code_(code) {}

bool FlowEntry::is_drop() const noexcept {
  return !actions.empty() &&
         std::all_of(actions.begin(), actions.end(), [](const Action& a) { return std::holds_alternative<Drop>(a); });
}

void FlowTable::add(FlowEntry entry) {
  if (entry.match.empty()) throw FlowError(FlowErrc::InvalidEntry, "match must set at least one field");
  if (entry.actions.empty()) throw FlowError(FlowErrc::InvalidEntry, "entry without actions");
  for (const auto& e : entries_)
    if (e.same_key(entry)) throw FlowError(FlowErrc::DuplicateEntry, "entry with identical priority and match");
  entries_.push_back(std::move(entry));
}

void FlowTable::remove(const FlowEntry& key) {
  const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const FlowEntry& e) { return e.same_key(key); });
  if (it == entries_.end()) throw FlowError(FlowErrc::NotFound, "no entry with that priority and match");
  entries_.erase(it);
}

std::vector<Action> match_frame(const FlowTable& table, std::span<const std::uint8_t> raw, PortIndex ingress) {
  const auto header = codec::peek_header(raw);
  const auto& entries = table.entries();

  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return entries[a].priority > entries[b].priority; });

  std::vector<Action> out;
  bool any_match = false;
  for (std::size_t i : order) {
    const FlowEntry& e = entries[i];
    if (!matches(e.match, header, ingress)) continue;
    any_match = true;
    if (e.is_drop()) break;
    for (const Action& a : e.actions) {
      if (std::holds_alternative<Drop>(a)) continue;
      if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
    }
  }
  if (!any_match && table.default_action() == DefaultAction::ToController) out.push_back(ToController{});
  return out;
}

FlowTable apply_flow_mod(FlowTable table, const FlowMod& mod) {
  if (mod.command == FlowMod::Command::Add)
    table.add(mod.entry);
  else
    table.remove(mod.entry);
  return table;
}

std::string describe(const PortMod& mod, const netsim::Topology& topology) {
  return std::string("PortMod ") + (mod.enable ? "enable " : "disable ") +
         topology.describe({mod.switch_id, mod.port});
}

void apply_port_mod(netsim::Network& net, const PortMod& mod, SimTime at) {
  const netsim::PortRef ref{mod.switch_id, mod.port};
  if (!net.topology().has_port(ref))
    throw netsim::TopologyError(netsim::TopologyErrc::UnknownPort, net.topology().describe(ref));
  net.schedule(at, [mod, ref](netsim::Network& n) {
    n.record({.kind = netsim::EventKind::ControlMsg,
              .node = ref.node,
              .port = ref.port,
              .label = describe(mod, n.topology())});
    n.set_port_state(ref, mod.enable, n.now());
  });
}

SdnSwitch::SdnSwitch(NodeId self, PortIndex port_count, FlowTable table, SimTime processing_delay)
    : self_(self), port_count_(port_count), processing_delay_(processing_delay) {
  install(std::move(table));
}

void SdnSwitch::install(FlowTable table) {
  for (const auto& e : table.entries())
    for (const auto& a : e.actions)
      if (const auto* f = std::get_if<Forward>(&a); f && (f->port < 1 || f->port > port_count_))
        throw FlowError(FlowErrc::InvalidEntry, "Forward to a port the switch does not have: " + std::to_string(f->port));
  table_ = std::move(table);
}

void emit(netsim::Network& net, NodeId self, PortIndex ingress, const netsim::Frame& frame,
          std::span<const Action> actions, SimTime delay) {
  bool emitted = false;
  for (const Action& a : actions) {
    if (const auto* f = std::get_if<Forward>(&a)) {
      const netsim::PortRef out{self, f->port};
      if (!net.topology().link_at(out)) continue;
      netsim::Frame copy = frame;
      copy.cause = 0;
      net.send(out, std::move(copy), net.now() + delay);
      emitted = true;
    } else if (std::holds_alternative<ToController>(a)) {
      net.record({.kind = netsim::EventKind::ControlMsg,
                  .node = self,
                  .port = ingress,
                  .digest = frame.digest,
                  .label = "PacketIn"});
      emitted = true;
    }
  }
  if (!emitted)
    net.record({.kind = netsim::EventKind::Drop,
                .node = self,
                .port = ingress,
                .digest = frame.digest,
                .injected = frame.injected,
                .label = actions.empty() ? "flow-drop" : "unlinked-port"});
}

void SdnSwitch::on_frame(netsim::Network& net, PortIndex ingress, const netsim::Frame& frame) {
  const auto actions = match_frame(table_, frame.bytes(), ingress);
  emit(net, self_, ingress, frame, actions, processing_delay_);
}

void Controller::send(netsim::Network& net, const ControllerMsg& msg, SimTime issued_at) const {
  const SimTime at = issued_at + latency_;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PortMod>) {
          apply_port_mod(net, m, at);
        } else if constexpr (std::is_same_v<T, FlowMod>) {
          net.schedule(at, [m](netsim::Network& n) {
            auto& sw = n.behaviour_as<SdnSwitch>(m.switch_id);
            sw.install(apply_flow_mod(sw.table(), m));
            n.record({.kind = netsim::EventKind::ControlMsg,
                      .node = m.switch_id,
                      .label = m.command == FlowMod::Command::Add ? "FlowMod add" : "FlowMod remove"});
          });
        } else {
          net.schedule(at, [m](netsim::Network& n) {
            n.record({.kind = netsim::EventKind::ControlMsg,
                      .node = m.switch_id,
                      .port = m.in_port,
                      .digest = m.digest,
                      .label = "PacketIn"});
          });
        }
      },
      msg);
}

}  // namespace gridshield::sdn
