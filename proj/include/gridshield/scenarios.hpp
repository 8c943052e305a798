#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridshield/delay.hpp"
#include "gridshield/devices.hpp"
#include "gridshield/ids.hpp"
#include "gridshield/netsim.hpp"
#include "gridshield/sdn.hpp"

namespace gridshield::scenarios {

using Json = nlohmann::ordered_json;
using netsim::PortIndex;
using netsim::SimTime;

// ---------------------------------------------------------------------------
// Configuration

/// Reads a scenario file, resolving "include" (relative to the including file)
/// and applying the rest of the document as a JSON merge patch. Throws ConfigError.
Json load_config(const std::filesystem::path& path);

/// key=value. Keys: t_mu t_sv t_sp t_pied t_ss t_gs t_oc t_ids (µs, or with a us/ms suffix),
/// with_ids, ids_passes, duration_us, or a JSON pointer ("/pied/ttl_ms=3000"). Throws ConfigError.
void apply_override(Json& config, std::string_view assignment);

struct InjectionSpec {
  Host host = Host::StationBusSwitch;
  netsim::PortRef port;
  codec::GooseFrame tmpl;
  devices::InjectionSchedule schedule;
};

struct Expectation {
  /// Culprit name, "none" for no verdict at all.
  std::string verdict = "none";
  std::optional<std::set<PortIndex>> ids_enabled_ports;
  /// Disabled ports ("node:port") that must be present at the end of the run.
  std::vector<std::string> disabled_ports;
  bool pied_isolated = false;
  bool liveness = false;
  std::optional<std::uint32_t> breaker_trips;
  /// "node:port:in|out" hops the first injected frame must take, in order.
  std::vector<std::string> trace;
  /// Hops the first injected frame must also take (unordered).
  std::vector<std::string> also_visits;
};

/// A fully parsed scenario. `config` is the merged document it was parsed from.
struct ScenarioSpec {
  std::string id;
  Json config;
  netsim::TopologySpec topology;
  std::map<std::string, codec::MacAddress> macs;
  SimTime duration{};
  SimTime control_latency{};
  delay::DelayComponents delays;
  devices::Waveform waveform;
  devices::MuConfig mu;
  devices::PiedConfig pied;
  devices::OmicronConfig omicron;
  std::map<std::string, sdn::FlowTable> flows;
  ids::IdsConfig ids;
  ids::RuleSet rules;
  std::optional<InjectionSpec> injection;
  Expectation expect;
};

/// Throws ConfigError (and TopologyError for a bad topology).
ScenarioSpec parse_spec(const Json& config);

/// Directory holding the shipped scenario files.
std::filesystem::path scenario_dir();
/// Shipped scenario by name ("baseline", "attack1", ...) or a path to a file.
ScenarioSpec load_scenario(const std::string& name_or_path, const std::vector<std::string>& overrides = {});

// ---------------------------------------------------------------------------
// Running and scoring

/// Builds and wires every device; nothing has run yet.
netsim::Network build_network(const ScenarioSpec& spec);
netsim::EventLog simulate(const ScenarioSpec& spec);

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ScenarioResult {
  std::string scenario;
  /// Culprit name, "Inconclusive", or "none".
  std::string verdict = "none";
  std::optional<SimTime> verdict_time;
  std::vector<ids::ObservationRecord> evidence;
  std::size_t alerts = 0;
  std::size_t false_positive_alerts = 0;
  std::size_t injected_frames = 0;
  std::size_t injected_reached_ids = 0;
  std::size_t injected_reached_alerted = 0;
  std::optional<SimTime> mitigation_time;
  std::set<std::string> disabled_ports;
  std::set<PortIndex> ids_enabled_ports;
  std::size_t breaker_trips = 0;
  std::optional<delay::DelayReport> delay;
  std::vector<Check> checks;
  bool pass = false;
};

/// Pure function of the log and the spec.
ScenarioResult score(const ScenarioSpec& spec, const netsim::EventLog& log);

struct Run {
  netsim::EventLog log;
  ScenarioResult result;
};

Run run_scenario(const ScenarioSpec& spec);

/// True iff the hops ("node:port:in" for an arrival, "node:port:out" for a departure)
/// appear in order among the events carrying `digest`.
bool verify_forwarding_trace(const netsim::EventLog& log, const netsim::Topology& topology, codec::Digest digest,
                             const std::vector<std::string>& hops);

/// Digest of the first injected frame in the log, if any.
std::optional<codec::Digest> first_injected(const netsim::EventLog& log);

Json to_json(const ScenarioResult& result);

// ---------------------------------------------------------------------------
// JSON-lines event log

inline constexpr std::string_view kLogFormat = "gridshield-events/1";

class LogFormatError : public Error {
 public:
  using Error::Error;
};

void write_log(std::ostream& out, const ScenarioSpec& spec, const netsim::EventLog& log);

struct SavedLog {
  ScenarioSpec spec;
  netsim::EventLog log;
};

/// Throws LogFormatError on a bad line, a missing trailer or a count mismatch.
SavedLog read_log(std::istream& in);

}  // namespace gridshield::scenarios
