#include "gridshield/delay.hpp"

#include <algorithm>
#include <cmath>

#include "gridshield/substation.hpp"

namespace gridshield::delay {

using netsim::EventKind;
using netsim::SimEvent;

DelayComponents DelayComponents::defaults(bool with_ids) {
  using std::chrono::milliseconds;
  DelayComponents c;
  c.t_mu = milliseconds(3);
  c.t_sv = milliseconds(2);
  c.t_sp = milliseconds(1);
  c.t_pied = milliseconds(10);
  c.t_ss = milliseconds(1);
  c.t_gs = milliseconds(2);
  c.t_oc = milliseconds(4);
  c.t_ids = with_ids ? milliseconds(4) : milliseconds(0);
  c.with_ids = with_ids;
  return c;
}

SimTime total(const DelayComponents& c) {
  SimTime sum = c.t_mu + c.t_sv + c.t_sp + c.t_pied + c.t_ss + c.t_gs + c.t_oc;
  if (c.with_ids) sum += c.t_ids;
  return sum;
}

namespace {

SimTime& term_ref(DelayComponents& c, const std::string& term) {
  if (term == "t_mu") return c.t_mu;
  if (term == "t_sv") return c.t_sv;
  if (term == "t_sp") return c.t_sp;
  if (term == "t_pied") return c.t_pied;
  if (term == "t_ss") return c.t_ss;
  if (term == "t_gs") return c.t_gs;
  if (term == "t_oc") return c.t_oc;
  return c.t_ids;
}

std::string processing_term(std::string_view role) {
  if (role == role::kMergingUnit) return "t_mu";
  if (role == role::kProcessBusSwitch) return "t_sp";
  if (role == role::kPied) return "t_pied";
  if (role == role::kStationBusSwitch) return "t_ss";
  if (role == role::kOmicron) return "t_oc";
  if (role == role::kIds) return "t_ids";
  throw NoTripFound("cannot attribute processing at role " + std::string(role));
}

class Tracer {
 public:
  explicit Tracer(const netsim::EventLog& log) : log_(log) {}

  /// Latest event of `kind` at node (and port, if non-zero) with digest, at or before `before`.
  const SimEvent* latest(EventKind kind, netsim::NodeId node, netsim::PortIndex port, codec::Digest digest,
                         SimTime before) const {
    const SimEvent* best = nullptr;
    for (const auto& e : log_.events) {
      if (e.time > before) break;
      if (e.kind == kind && e.node == node && e.digest == digest && (port == 0 || e.port == port)) best = &e;
    }
    return best;
  }

  const SimEvent* earliest(EventKind kind, netsim::NodeId node, codec::Digest digest, SimTime before) const {
    for (const auto& e : log_.events) {
      if (e.time > before) break;
      if (e.kind == kind && e.node == node && e.digest == digest) return &e;
    }
    return nullptr;
  }

 private:
  const netsim::EventLog& log_;
};

[[noreturn]] void broken(const std::string& what) { throw NoTripFound("fault-to-trip chain broken: " + what); }

}  // namespace

DelayReport measure(const netsim::EventLog& log, const netsim::Topology& topology) {
  const auto trip_it = std::find_if(log.events.begin(), log.events.end(),
                                    [](const SimEvent& e) { return e.kind == EventKind::BreakerTrip; });
  if (trip_it == log.events.end()) throw NoTripFound("log contains no BreakerTrip");
  const SimEvent& trip = *trip_it;
  const Tracer tr(log);

  std::vector<Hop> hops;
  auto add = [&](netsim::NodeId node, std::string what, std::string term, SimTime start, SimTime end) {
    hops.push_back({topology.name(node), std::move(what), std::move(term), start, end});
  };

  const SimEvent* arrival = tr.earliest(EventKind::FrameArrival, trip.node, trip.digest, trip.time);
  if (!arrival) broken("no arrival of the trip frame at " + topology.name(trip.node));
  add(trip.node, "process", processing_term(topology.role(trip.node)), arrival->time, trip.time);

  bool before_pied = false;
  SimTime sample_time{};
  // Walk upstream: arrival -> link -> departure -> node processing -> arrival ...
  for (std::size_t guard = 0;; ++guard) {
    if (guard > log.events.size()) broken("cycle");
    const netsim::PortRef at{arrival->node, arrival->port};
    const netsim::Link* link = topology.link_at(at);
    if (!link) broken("arrival on unlinked port " + topology.describe(at));
    const netsim::PortRef from = link->a == at ? link->b : link->a;
    if (arrival->time < link->latency) broken("arrival before link latency");
    const SimTime sent = arrival->time - link->latency;
    const SimEvent* dep = tr.latest(EventKind::FrameDeparture, from.node, from.port, arrival->digest, sent);
    if (!dep || dep->time != sent) broken("no departure matching arrival at " + topology.describe(at));
    add(from.node, "link", before_pied ? "t_sv" : "t_gs", dep->time, arrival->time);

    const auto& role = topology.role(from.node);
    if (role == role::kMergingUnit) {
      const SimEvent* sample = tr.latest(EventKind::Sample, from.node, 0, dep->digest, dep->time);
      if (!sample) broken("no MU sample for SV departure");
      add(from.node, "sample", "t_mu", sample->time, dep->time);
      sample_time = sample->time;
      break;
    }
    const codec::Digest upstream = role == role::kPied ? dep->cause : dep->digest;
    if (role == role::kPied) {
      if (upstream == 0) broken("PIED departure without a cause");
      before_pied = true;
    }
    const SimEvent* prev = tr.latest(EventKind::FrameArrival, from.node, 0, upstream, dep->time);
    if (!prev) broken("no arrival feeding departure at " + topology.describe(from));
    add(from.node, "process", processing_term(role), prev->time, dep->time);
    arrival = prev;
  }

  std::reverse(hops.begin(), hops.end());
  DelayReport report;
  for (const auto& h : hops) term_ref(report.components, h.term) += h.end - h.start;
  report.components.with_ids = report.components.t_ids.count() > 0;
  report.sample_time = sample_time;
  report.trip_time = trip.time;
  report.total = trip.time - sample_time;
  report.hops = std::move(hops);
  return report;
}

std::vector<BudgetCheck> check_budget(const DelayReport& baseline, const DelayReport& with_ids,
                                      const DelayBudget& budget) {
  std::vector<BudgetCheck> out;
  const SimTime diff = baseline.total > budget.baseline_expected ? baseline.total - budget.baseline_expected
                                                                 : budget.baseline_expected - baseline.total;
  out.push_back({"baseline", baseline.total, budget.baseline_expected, diff <= budget.baseline_tolerance});
  out.push_back({"with_ids", with_ids.total, budget.with_ids_max, with_ids.total <= budget.with_ids_max});
  const SimTime added = with_ids.total > baseline.total ? with_ids.total - baseline.total : SimTime{0};
  out.push_back({"ids_added", added, budget.ids_added_max, added <= budget.ids_added_max});
  const auto quarter = SimTime{static_cast<std::uint64_t>(std::floor(1e6 / (4.0 * budget.mains_hz)))};
  out.push_back({"quarter_cycle", added, quarter,
                 static_cast<double>(added.count()) * 4.0 * budget.mains_hz <= 1e6});
  return out;
}

nlohmann::ordered_json to_json(const DelayComponents& c) {
  return {{"t_mu", c.t_mu.count()}, {"t_sv", c.t_sv.count()},     {"t_sp", c.t_sp.count()},
          {"t_pied", c.t_pied.count()}, {"t_ss", c.t_ss.count()}, {"t_gs", c.t_gs.count()},
          {"t_oc", c.t_oc.count()},   {"t_ids", c.t_ids.count()}, {"with_ids", c.with_ids}};
}

nlohmann::ordered_json to_json(const DelayReport& report) {
  nlohmann::ordered_json hops = nlohmann::ordered_json::array();
  for (const auto& h : report.hops)
    hops.push_back({{"node", h.node}, {"what", h.what}, {"term", h.term}, {"start_us", h.start.count()},
                    {"end_us", h.end.count()}});
  return {{"unit", "us"},
          {"components", to_json(report.components)},
          {"sample_time_us", report.sample_time.count()},
          {"trip_time_us", report.trip_time.count()},
          {"total_us", report.total.count()},
          {"sum_of_components_us", total(report.components).count()},
          {"hops", std::move(hops)}};
}

nlohmann::ordered_json to_json(const std::vector<BudgetCheck>& checks) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& c : checks)
    out.push_back({{"name", c.name}, {"measured_us", c.measured.count()}, {"limit_us", c.limit.count()},
                   {"pass", c.pass}});
  return out;
}

}  // namespace gridshield::delay
