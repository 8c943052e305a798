#include "gridshield/scenarios.hpp"

#include <algorithm>

#include "gridshield/substation.hpp"

namespace gridshield::scenarios {

using netsim::EventKind;
using netsim::NodeId;
using netsim::PortRef;
using netsim::SimEvent;

namespace {

SimTime switch_delay(const ScenarioSpec& spec, std::string_view r) {
  if (r == role::kProcessBusSwitch) return spec.delays.t_sp;
  return spec.delays.t_ss;
}

sdn::FlowTable table_for(const ScenarioSpec& spec, const std::string& name) {
  const auto it = spec.flows.find(name);
  return it == spec.flows.end() ? sdn::FlowTable{} : it->second;
}

struct Hop {
  PortRef port;
  EventKind kind;
};

std::optional<Hop> parse_hop(const netsim::Topology& topo, const std::string& text) {
  const auto last = text.rfind(':');
  if (last == std::string::npos) return std::nullopt;
  const auto dir = text.substr(last + 1);
  if (dir != "in" && dir != "out") return std::nullopt;
  try {
    return Hop{topo.parse_port(text.substr(0, last)), dir == "in" ? EventKind::FrameArrival : EventKind::FrameDeparture};
  } catch (const netsim::TopologyError&) {
    return std::nullopt;
  }
}

/// Departure time of the frame behind an arrival event.
SimTime sent_at(const netsim::Topology& topo, const SimEvent& arrival) {
  const auto* link = topo.link_at({arrival.node, arrival.port});
  // Ingress injections on an unlinked port have no upstream departure.
  if (!link) return arrival.time;
  return arrival.time >= link->latency ? arrival.time - link->latency : SimTime{0};
}

Json digest_json(codec::Digest d) { return d == 0 ? Json(nullptr) : Json(codec::digest_hex(d)); }

}  // namespace

netsim::Network build_network(const ScenarioSpec& spec) {
  netsim::Network net(netsim::Topology::build(spec.topology));
  const auto& topo = net.topology();

  ids::IdsDevice* ids_device = nullptr;
  std::vector<devices::MergingUnit*> mus;
  std::vector<devices::Pied*> pieds;
  std::vector<NodeId> omicrons;

  for (NodeId n = 0; n < topo.node_count(); ++n) {
    const auto& ns = topo.node_spec(n);
    if (ns.role == role::kIds) {
      auto dev = std::make_unique<ids::IdsDevice>(n, ns.port_count, spec.ids, spec.rules, table_for(spec, ns.name),
                                                  sdn::Controller(spec.control_latency), ids::plan_mitigation(topo));
      ids_device = dev.get();
      net.attach(n, std::move(dev));
    } else if (ns.role == role::kProcessBusSwitch || ns.role == role::kStationBusSwitch) {
      net.attach(n, std::make_unique<sdn::SdnSwitch>(n, ns.port_count, table_for(spec, ns.name),
                                                     switch_delay(spec, ns.role)));
    } else if (ns.role == role::kMergingUnit) {
      auto dev = std::make_unique<devices::MergingUnit>(n, spec.mu, spec.waveform);
      mus.push_back(dev.get());
      net.attach(n, std::move(dev));
    } else if (ns.role == role::kPied) {
      auto dev = std::make_unique<devices::Pied>(n, spec.pied);
      pieds.push_back(dev.get());
      net.attach(n, std::move(dev));
    } else if (ns.role == role::kOmicron) {
      omicrons.push_back(n);
    } else {
      throw ConfigError("node " + ns.name + " has unknown role '" + ns.role + "'");
    }
  }
  devices::Omicron::FlagQuery flagged;
  if (ids_device && spec.ids.enabled) flagged = [ids_device](codec::Digest d) { return ids_device->flagged(d); };
  for (NodeId n : omicrons) net.attach(n, std::make_unique<devices::Omicron>(n, spec.omicron, flagged));

  for (auto* mu : mus) mu->start(net);
  for (auto* p : pieds) p->start(net);
  if (spec.injection)
    devices::inject(net, spec.injection->host, spec.injection->tmpl, spec.injection->port, spec.injection->schedule);
  return net;
}

netsim::EventLog simulate(const ScenarioSpec& spec) {
  auto net = build_network(spec);
  return net.run_until(spec.duration);
}

std::optional<codec::Digest> first_injected(const netsim::EventLog& log) {
  for (const auto& e : log.events)
    if (e.injected && e.digest != 0) return e.digest;
  return std::nullopt;
}

bool verify_forwarding_trace(const netsim::EventLog& log, const netsim::Topology& topology, codec::Digest digest,
                             const std::vector<std::string>& hops) {
  std::vector<Hop> want;
  for (const auto& h : hops) {
    const auto hop = parse_hop(topology, h);
    if (!hop) return false;
    want.push_back(*hop);
  }
  std::size_t next = 0;
  for (const auto& e : log.events) {
    if (next == want.size()) break;
    if (e.digest != digest) continue;
    if (e.kind == want[next].kind && PortRef{e.node, e.port} == want[next].port) ++next;
  }
  return next == want.size();
}

ScenarioResult score(const ScenarioSpec& spec, const netsim::EventLog& log) {
  const auto topo = netsim::Topology::build(spec.topology);
  const NodeId ids_node = topo.unique_role(role::kIds);
  const NodeId omicron = topo.unique_role(role::kOmicron);
  const NodeId pied = topo.unique_role(role::kPied);
  const NodeId ssw = topo.unique_role(role::kStationBusSwitch);

  ScenarioResult r;
  r.scenario = spec.id;

  std::set<codec::Digest> injected, alerted, reached;
  std::map<PortRef, bool> enabled;
  for (const auto& e : log.events) {
    if (e.injected && e.digest != 0) injected.insert(e.digest);
    switch (e.kind) {
      case EventKind::AlertRaised:
        ++r.alerts;
        if (!e.injected) ++r.false_positive_alerts;
        alerted.insert(e.digest);
        break;
      case EventKind::FrameArrival:
        if (e.injected && e.node == ids_node) reached.insert(e.digest);
        break;
      case EventKind::VerdictReached:
        if (!r.verdict_time) {
          r.verdict = e.label;
          r.verdict_time = e.time;
        }
        break;
      case EventKind::Observation:
        if (!r.verdict_time)
          r.evidence.push_back({.origin = parse_host(e.label).value_or(Host::StationBusSwitch),
                                .ingress = e.port,
                                .digest = e.digest,
                                .loop = e.loop,
                                .time = e.time});
        break;
      case EventKind::PortStateChange:
        if (!r.mitigation_time) r.mitigation_time = e.time;
        enabled[{e.node, e.port}] = e.label == "enable";
        break;
      case EventKind::BreakerTrip: ++r.breaker_trips; break;
      default: break;
    }
  }
  r.injected_frames = injected.size();
  r.injected_reached_ids = reached.size();
  r.injected_reached_alerted = std::count_if(reached.begin(), reached.end(),
                                             [&](codec::Digest d) { return alerted.contains(d); });
  for (const auto& [port, on] : enabled)
    if (!on) r.disabled_ports.insert(topo.describe(port));
  for (PortIndex p = 1; p <= topo.node_spec(ids_node).port_count; ++p) {
    const auto it = enabled.find({ids_node, p});
    if (it == enabled.end() || it->second) r.ids_enabled_ports.insert(p);
  }
  try {
    r.delay = delay::measure(log, topo);
  } catch (const delay::NoTripFound&) {
  }

  auto check = [&](std::string name, bool pass, std::string detail = {}) {
    r.checks.push_back({std::move(name), pass, std::move(detail)});
  };
  const auto& ex = spec.expect;

  check("verdict", r.verdict == ex.verdict, "got " + r.verdict + ", expected " + ex.verdict);
  check("no_false_positives", r.false_positive_alerts == 0,
        std::to_string(r.false_positive_alerts) + " alerts on non-injected frames");
  if (spec.injection) {
    check("injected_reached_ids", r.injected_reached_ids > 0,
          std::to_string(r.injected_reached_ids) + " of " + std::to_string(r.injected_frames) + " injected frames");
    check("injected_alerted", r.injected_reached_alerted == r.injected_reached_ids,
          std::to_string(r.injected_reached_alerted) + " of " + std::to_string(r.injected_reached_ids) +
              " injected frames reaching the IDS were alerted");
  }
  if (const auto culprit = parse_host(r.verdict)) {
    bool consistent = false;
    try {
      consistent = ids::localize(r.evidence, *r.verdict_time, spec.ids.ports).culprit == *culprit;
    } catch (const ids::LocalizationError&) {
    }
    check("evidence_consistent", consistent, std::to_string(r.evidence.size()) + " observations");
  }
  if (ex.ids_enabled_ports) {
    std::string got;
    for (auto p : r.ids_enabled_ports) got += (got.empty() ? "" : ",") + std::to_string(p);
    check("ids_enabled_ports", r.ids_enabled_ports == *ex.ids_enabled_ports, "{" + got + "}");
  }
  for (const auto& port : ex.disabled_ports) check("disabled " + port, r.disabled_ports.contains(port));

  if (r.mitigation_time) {
    const SimTime m = *r.mitigation_time;
    std::size_t leaked = 0, pied_frames = 0, healthy = 0;
    const auto culprit = parse_host(r.verdict);
    const NodeId culprit_node = culprit == Host::Pied ? pied : ssw;
    for (const auto& e : log.events) {
      if (e.kind != EventKind::FrameArrival) continue;
      const SimTime sent = sent_at(topo, e);
      if (sent < m) continue;
      if (e.node == omicron && (e.injected || alerted.contains(e.digest))) ++leaked;
      const auto peer = topo.peer({e.node, e.port});
      if (e.node == pied || (peer && peer->node == pied)) ++pied_frames;
      if (!e.injected && e.node != culprit_node && (!peer || peer->node != culprit_node)) ++healthy;
    }
    check("containment", leaked == 0, std::to_string(leaked) + " abnormal frames reached the omicron after mitigation");
    if (ex.pied_isolated)
      check("pied_isolated", pied_frames == 0, std::to_string(pied_frames) + " frames to/from the PIED after mitigation");
    if (ex.liveness)
      check("liveness", healthy > 0, std::to_string(healthy) + " healthy frames delivered after mitigation");
  } else if (ex.pied_isolated || ex.liveness || ex.ids_enabled_ports) {
    check("mitigation", false, "no mitigation took place");
  }

  if (ex.breaker_trips)
    check("breaker_trips", r.breaker_trips == *ex.breaker_trips, std::to_string(r.breaker_trips));

  if (!ex.trace.empty() || !ex.also_visits.empty()) {
    const auto first = first_injected(log);
    check("trace", first && verify_forwarding_trace(log, topo, *first, ex.trace));
    for (const auto& hop : ex.also_visits)
      check("visits " + hop, first && verify_forwarding_trace(log, topo, *first, {hop}));
  }

  if (ex.breaker_trips && *ex.breaker_trips > 0) {
    if (!r.delay) {
      check("delay_measured", false, "no fault-to-trip chain");
    } else {
      const auto& d = *r.delay;
      check("delay_additive", d.total == delay::total(d.components),
            std::to_string(d.total.count()) + " us end to end");
      auto want = spec.delays;
      want.with_ids = want.t_ids.count() > 0;
      check("delay_matches_config", d.components == want,
            "measured " + std::to_string(d.total.count()) + " us, configured " +
                std::to_string(delay::total(spec.delays).count()) + " us");
    }
  }

  r.pass = std::all_of(r.checks.begin(), r.checks.end(), [](const Check& c) { return c.pass; });
  return r;
}

Run run_scenario(const ScenarioSpec& spec) {
  Run run;
  run.log = simulate(spec);
  run.result = score(spec, run.log);
  return run;
}

Json to_json(const ScenarioResult& r) {
  Json evidence = Json::array();
  for (const auto& o : r.evidence)
    evidence.push_back({{"origin", to_string(o.origin)},
                        {"ids_port", o.ingress},
                        {"digest", codec::digest_hex(o.digest)},
                        {"loop", o.loop},
                        {"t_us", o.time.count()}});
  Json checks = Json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  Json out;
  out["scenario"] = r.scenario;
  out["pass"] = r.pass;
  out["verdict"] = r.verdict;
  out["verdict_time_us"] = r.verdict_time ? Json(r.verdict_time->count()) : Json(nullptr);
  out["evidence"] = std::move(evidence);
  out["alerts"] = r.alerts;
  out["false_positive_alerts"] = r.false_positive_alerts;
  out["injected_frames"] = r.injected_frames;
  out["injected_reached_ids"] = r.injected_reached_ids;
  out["injected_reached_alerted"] = r.injected_reached_alerted;
  out["mitigation_time_us"] = r.mitigation_time ? Json(r.mitigation_time->count()) : Json(nullptr);
  out["disabled_ports"] = r.disabled_ports;
  out["ids_enabled_ports"] = r.ids_enabled_ports;
  out["breaker_trips"] = r.breaker_trips;
  out["delay_total_us"] = r.delay ? Json(r.delay->total.count()) : Json(nullptr);
  out["checks"] = std::move(checks);
  return out;
}

void write_log(std::ostream& out, const ScenarioSpec& spec, const netsim::EventLog& log) {
  const auto topo = netsim::Topology::build(spec.topology);
  out << Json{{"type", "header"}, {"format", kLogFormat}, {"scenario", spec.id}, {"config", spec.config}}.dump()
      << '\n';
  for (const auto& e : log.events) {
    out << Json{{"type", "event"},
                {"t", e.time.count()},
                {"seq", e.seq},
                {"kind", netsim::to_string(e.kind)},
                {"node", topo.name(e.node)},
                {"port", e.port},
                {"digest", digest_json(e.digest)},
                {"cause", digest_json(e.cause)},
                {"injected", e.injected},
                {"loop", e.loop},
                {"label", e.label}}
               .dump()
        << '\n';
  }
  out << Json{{"type", "end"}, {"events", log.events.size()}}.dump() << '\n';
}

SavedLog read_log(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) -> LogFormatError {
    return LogFormatError("line " + std::to_string(lineno) + ": " + why);
  };
  auto next = [&]() -> std::optional<Json> {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        auto j = Json::parse(line);
        if (!j.is_object()) throw fail("not an object");
        return j;
      } catch (const Json::parse_error& e) {
        throw fail(e.what());
      }
    }
    return std::nullopt;
  };

  const auto header = next();
  if (!header) throw LogFormatError("empty log");
  if (header->value("type", "") != "header" || header->value("format", "") != kLogFormat)
    throw fail("expected a " + std::string(kLogFormat) + " header");
  SavedLog saved{parse_spec(header->at("config")), {}};
  const auto topo = netsim::Topology::build(saved.spec.topology);

  auto digest = [&](const Json& j) -> codec::Digest {
    if (j.is_null()) return 0;
    if (!j.is_string()) throw fail("digest must be a string");
    const auto d = codec::parse_digest(j.get<std::string>());
    if (!d) throw fail("bad digest");
    return *d;
  };

  while (auto j = next()) {
    try {
      const auto type = j->at("type").get<std::string>();
      if (type == "end") {
        if (j->at("events").get<std::size_t>() != saved.log.events.size()) throw fail("event count mismatch");
        if (next()) throw fail("content after end marker");
        return saved;
      }
      if (type != "event") throw fail("unknown line type '" + type + "'");
      SimEvent e;
      e.time = SimTime{j->at("t").get<std::uint64_t>()};
      e.seq = j->at("seq").get<std::uint64_t>();
      const auto kind = netsim::parse_event_kind(j->at("kind").get<std::string>());
      if (!kind) throw fail("unknown event kind");
      e.kind = *kind;
      const auto node = topo.find_node(j->at("node").get<std::string>());
      if (!node) throw fail("unknown node");
      e.node = *node;
      e.port = j->at("port").get<PortIndex>();
      e.digest = digest(j->at("digest"));
      e.cause = digest(j->at("cause"));
      e.injected = j->at("injected").get<bool>();
      e.loop = j->at("loop").get<bool>();
      e.label = j->at("label").get<std::string>();
      if (e.seq != saved.log.events.size()) throw fail("seq out of order");
      if (!saved.log.events.empty() && e.time < saved.log.events.back().time) throw fail("time goes backwards");
      saved.log.events.push_back(std::move(e));
    } catch (const Json::exception& ex) {
      throw fail(ex.what());
    }
  }
  throw LogFormatError("truncated log: no end marker after line " + std::to_string(lineno));
}

}  // namespace gridshield::scenarios
