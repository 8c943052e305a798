#include "gridshield/ids.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace gridshield::ids {

using netsim::EventKind;

namespace {

constexpr std::array<std::string_view, 6> kRuleNames = {
    "SequenceRegression", "SequenceSkip", "TtlBound", "PublisherWhitelist", "IngressBinding", "RateLimit"};

std::string_view to_string(LocalizationErrc code) {
  return code == LocalizationErrc::NoEvidence ? "NoEvidence" : "Inconclusive";
}

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

bool contains(const auto& range, const auto& value) {
  return std::find(range.begin(), range.end(), value) != range.end();
}

}  // namespace

std::string_view to_string(RuleKind kind) { return kRuleNames.at(static_cast<std::size_t>(kind)); }

std::optional<RuleKind> parse_rule_kind(std::string_view text) {
  for (std::size_t i = 0; i < kRuleNames.size(); ++i)
    if (kRuleNames[i] == text) return static_cast<RuleKind>(i);
  return std::nullopt;
}

RuleSet::RuleSet(std::vector<Rule> rules) : rules_(std::move(rules)) {
  std::set<std::string> ids;
  for (const auto& r : rules_) {
    if (r.id.empty()) throw ConfigError("rule id must not be empty");
    if (!ids.insert(r.id).second) throw ConfigError("duplicate rule id: " + r.id);
    if (const auto* t = std::get_if<TtlBound>(&r.params); t && t->min_ms > t->max_ms)
      throw ConfigError("rule " + r.id + ": min_ms > max_ms");
    if (const auto* rl = std::get_if<RateLimit>(&r.params); rl && rl->window.count() == 0)
      throw ConfigError("rule " + r.id + ": window must be > 0");
  }
}

InspectResult inspect(const codec::GooseFrame& frame, PortIndex ingress, SubscriptionState state,
                      const RuleSet& rules, SimTime at, codec::Digest digest) {
  InspectResult out;
  Subscription& sub = state[frame.gocb_ref];
  auto raise = [&](const Rule& r) {
    out.alerts.push_back({.time = at, .rule_id = r.id, .gocb_ref = frame.gocb_ref, .ingress = ingress, .digest = digest});
  };

  for (const Rule& rule : rules.rules()) {
    const bool violated = std::visit(
        overloaded{
            [&](const SequenceRegression&) {
              return sub.seen &&
                     (frame.st_num < sub.st_num || (frame.st_num == sub.st_num && frame.sq_num < sub.sq_num));
            },
            [&](const SequenceSkip& p) {
              return sub.seen && frame.st_num == sub.st_num && frame.sq_num > sub.sq_num &&
                     frame.sq_num - sub.sq_num > p.max_gap;
            },
            [&](const TtlBound& p) {
              return frame.time_allowed_to_live_ms < p.min_ms || frame.time_allowed_to_live_ms > p.max_ms;
            },
            [&](const PublisherWhitelist& p) {
              const auto it = p.publishers.find(frame.gocb_ref);
              return it == p.publishers.end() || !contains(it->second, frame.src);
            },
            [&](const IngressBinding& p) {
              const auto it = p.ports.find(frame.gocb_ref);
              return it != p.ports.end() && !contains(it->second, ingress);
            },
            [&](const RateLimit& p) {
              RateWindow& w = sub.rate_windows[rule.id];
              if (w.count == 0 || at >= w.start + p.window) w = {at, 0};
              return ++w.count > p.max_frames;
            },
        },
        rule.params);
    if (violated) raise(rule);
  }

  if (out.alerts.empty()) {
    sub.seen = true;
    sub.st_num = frame.st_num;
    sub.sq_num = frame.sq_num;
    sub.timestamp_us = std::max(sub.timestamp_us, frame.timestamp_us);
  }
  out.state = std::move(state);
  return out;
}

void LoopTracker::tag_loop(codec::Digest digest, SimTime at) { tags_.emplace(digest, at); }

bool LoopTracker::is_loop(codec::Digest digest, PortIndex ingress, SimTime at) const {
  if (ingress != return_port_) return false;
  const auto [lo, hi] = tags_.equal_range(digest);
  return std::any_of(lo, hi, [&](const auto& kv) { return kv.second <= at && at - kv.second <= window_; });
}

void LoopTracker::prune(SimTime now) {
  std::erase_if(tags_, [&](const auto& kv) { return kv.second + window_ < now; });
}

LocalizationError::LocalizationError(LocalizationErrc code, const std::string& what)
    : Error(std::string(to_string(code)) + ": " + what), code_(code) {}

LocalizationVerdict localize(std::span<const ObservationRecord> observations, SimTime decided_at,
                             const LocalizationPorts& ports) {
  if (observations.empty()) throw LocalizationError(LocalizationErrc::NoEvidence, "no abnormal observations");

  bool switch_row = false;
  bool all_returns_loop = true;
  for (const auto& o : observations) {
    if (o.ingress == ports.loop_return) {
      if (!o.loop) switch_row = true;
      all_returns_loop = all_returns_loop && o.loop;
    }
    if (o.ingress == ports.primary && o.origin == Host::StationBusSwitch) switch_row = true;
  }
  const auto& first = observations.front();
  const bool pied_row = first.ingress == ports.primary && first.origin == Host::Pied && all_returns_loop;

  if (switch_row == pied_row)
    throw LocalizationError(LocalizationErrc::Inconclusive,
                            switch_row ? "evidence implicates both hosts" : "evidence matches no decision row");
  return {.culprit = switch_row ? Host::StationBusSwitch : Host::Pied,
          .evidence = {observations.begin(), observations.end()},
          .decided_at = decided_at};
}

MitigationPlan plan_mitigation(const netsim::Topology& topology) {
  MitigationPlan plan;
  plan.ids = topology.unique_role(role::kIds);
  plan.ids_port_count = topology.node_spec(plan.ids).port_count;
  for (PortIndex p = 1; p <= plan.ids_port_count; ++p) {
    const auto peer = topology.peer({plan.ids, p});
    if (peer && topology.role(peer->node) != role::kStationBusSwitch) plan.ids_keep.push_back(p);
  }
  for (NodeId pied : topology.nodes_with_role(role::kPied)) {
    for (PortIndex p = 1; p <= topology.node_spec(pied).port_count; ++p) {
      const auto peer = topology.peer({pied, p});
      if (!peer) continue;
      const auto& r = topology.role(peer->node);
      if (r == role::kStationBusSwitch || r == role::kProcessBusSwitch) plan.pied_facing.push_back(*peer);
    }
  }
  std::sort(plan.pied_facing.begin(), plan.pied_facing.end());
  return plan;
}

std::vector<sdn::PortMod> mitigate(const LocalizationVerdict& verdict, const MitigationPlan& plan) {
  std::vector<sdn::PortMod> mods;
  if (verdict.culprit == Host::StationBusSwitch) {
    for (PortIndex p = 1; p <= plan.ids_port_count; ++p)
      if (!contains(plan.ids_keep, p)) mods.push_back({plan.ids, p, false});
    for (PortIndex p : plan.ids_keep) mods.push_back({plan.ids, p, true});
  } else {
    for (const auto& ref : plan.pied_facing) mods.push_back({ref.node, ref.port, false});
  }
  return mods;
}

Host origin_of(const IdsConfig& config, const codec::MacAddress& src, PortIndex ingress) {
  if (const auto it = config.hosts.find(src); it != config.hosts.end()) return it->second;
  if (const auto it = config.port_origin.find(ingress); it != config.port_origin.end()) return it->second;
  return Host::StationBusSwitch;
}

IdsDevice::IdsDevice(NodeId self, PortIndex port_count, IdsConfig config, RuleSet rules, sdn::FlowTable table,
                     sdn::Controller controller, MitigationPlan plan)
    : self_(self),
      port_count_(port_count),
      config_(std::move(config)),
      rules_(std::move(rules)),
      table_(std::move(table)),
      controller_(controller),
      plan_(std::move(plan)),
      tracker_(config_.ports.loop_return, config_.loop_window) {
  if (config_.passes == 0) throw ConfigError("ids passes must be >= 1");
  for (const auto& e : table_.entries())
    for (const auto& a : e.actions)
      if (const auto* f = std::get_if<sdn::Forward>(&a); f && (f->port < 1 || f->port > port_count_))
        throw sdn::FlowError(sdn::FlowErrc::InvalidEntry, "IDS forward to missing port " + std::to_string(f->port));
}

void IdsDevice::on_frame(netsim::Network& net, PortIndex ingress, const netsim::Frame& frame) {
  if (!config_.enabled) {
    sdn::emit(net, self_, ingress, frame, sdn::match_frame(table_, frame.bytes(), ingress), SimTime{0});
    return;
  }
  examine(net, ingress, frame);
  // The forwarding decision is taken once inspection is over.
  net.schedule(net.now() + config_.processing_delay(), [this, ingress, frame](netsim::Network& n) {
    if (verdict_ && abnormal_origin_.contains(frame.digest)) {
      n.record({.kind = EventKind::Drop,
                .node = self_,
                .port = ingress,
                .digest = frame.digest,
                .injected = frame.injected,
                .label = "quarantined"});
      return;
    }
    const auto actions = sdn::match_frame(table_, frame.bytes(), ingress);
    tracker_.prune(n.now());
    for (const auto& a : actions)
      if (const auto* f = std::get_if<sdn::Forward>(&a); f && f->port == config_.loop_out_port)
        tracker_.tag_loop(frame.digest, n.now());
    sdn::emit(n, self_, ingress, frame, actions, SimTime{0});
  });
}

void IdsDevice::examine(netsim::Network& net, PortIndex ingress, const netsim::Frame& frame) {
  const auto header = codec::peek_header(frame.bytes());
  if (!header || header->ethertype != codec::kGooseEthertype) return;

  if (tracker_.is_loop(frame.digest, ingress, net.now())) {
    // Our own copy coming back: only relevant as evidence when the original was abnormal.
    if (const auto it = abnormal_origin_.find(frame.digest); it != abnormal_origin_.end())
      observe(net, {.origin = it->second, .ingress = ingress, .digest = frame.digest, .loop = true, .time = net.now()});
    return;
  }

  std::vector<Alert> raised;
  try {
    const auto goose = codec::decode_goose(frame.bytes());
    auto result = inspect(goose, ingress, std::move(state_), rules_, net.now(), frame.digest);
    state_ = std::move(result.state);
    raised = std::move(result.alerts);
  } catch (const codec::CodecError&) {
    raised.push_back({.time = net.now(), .rule_id = std::string(kMalformedRuleId), .ingress = ingress,
                      .digest = frame.digest});
  }
  if (raised.empty()) return;

  for (auto& a : raised) {
    net.record({.kind = EventKind::AlertRaised,
                .node = self_,
                .port = ingress,
                .digest = frame.digest,
                .injected = frame.injected,
                .label = a.rule_id});
    alerts_.push_back(std::move(a));
  }
  flagged_.insert(frame.digest);
  const Host origin = origin_of(config_, header->src, ingress);
  abnormal_origin_.emplace(frame.digest, origin);
  observe(net, {.origin = origin, .ingress = ingress, .digest = frame.digest, .loop = false, .time = net.now()});
}

void IdsDevice::observe(netsim::Network& net, const ObservationRecord& obs) {
  observations_.push_back(obs);
  net.record({.kind = EventKind::Observation,
              .node = self_,
              .port = obs.ingress,
              .digest = obs.digest,
              .loop = obs.loop,
              .label = std::string(to_string(obs.origin))});
  if (verdict_ || decision_pending_) return;
  decision_pending_ = true;
  net.schedule(net.now() + config_.decision_window, [this](netsim::Network& n) { decide(n); });
}

void IdsDevice::decide(netsim::Network& net) {
  decision_pending_ = false;
  try {
    verdict_ = localize(observations_, net.now(), config_.ports);
  } catch (const LocalizationError&) {
    net.record({.kind = EventKind::VerdictReached, .node = self_, .label = "Inconclusive"});
    return;
  }
  net.record({.kind = EventKind::VerdictReached, .node = self_, .label = std::string(to_string(verdict_->culprit))});
  for (const auto& mod : mitigate(*verdict_, plan_)) controller_.send(net, mod, net.now());
}

}  // namespace gridshield::ids
