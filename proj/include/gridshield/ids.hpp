#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gridshield/codec.hpp"
#include "gridshield/netsim.hpp"
#include "gridshield/sdn.hpp"
#include "gridshield/substation.hpp"

namespace gridshield::ids {

using netsim::NodeId;
using netsim::PortIndex;
using netsim::SimTime;

// ---------------------------------------------------------------------------
// Rules

/// st_num decreases, or sq_num decreases without an st_num increase.
struct SequenceRegression {};
/// Within one st_num, sq_num advances by more than max_gap.
struct SequenceSkip {
  std::uint32_t max_gap = 1;
};
/// time_allowed_to_live outside [min_ms, max_ms].
struct TtlBound {
  std::uint32_t min_ms = 1;
  std::uint32_t max_ms = 60'000;
};
/// gocb_ref -> permitted source MACs. Unlisted control blocks are rejected.
struct PublisherWhitelist {
  std::map<std::string, std::vector<codec::MacAddress>> publishers;
};
/// gocb_ref -> IDS ports the control block may arrive on. Unlisted ones are unconstrained.
struct IngressBinding {
  std::map<std::string, std::vector<PortIndex>> ports;
};
/// More than max_frames per gocb_ref inside a fixed window.
struct RateLimit {
  std::uint32_t max_frames = 10;
  SimTime window{100'000};
};

using RuleParams = std::variant<SequenceRegression, SequenceSkip, TtlBound, PublisherWhitelist, IngressBinding, RateLimit>;

enum class RuleKind { SequenceRegression, SequenceSkip, TtlBound, PublisherWhitelist, IngressBinding, RateLimit };

std::string_view to_string(RuleKind kind);
std::optional<RuleKind> parse_rule_kind(std::string_view text);

struct Rule {
  std::string id;
  RuleParams params;

  RuleKind kind() const noexcept { return static_cast<RuleKind>(params.index()); }
};

class RuleSet {
 public:
  RuleSet() = default;
  /// Throws ConfigError on duplicate rule ids.
  explicit RuleSet(std::vector<Rule> rules);

  const std::vector<Rule>& rules() const noexcept { return rules_; }

 private:
  std::vector<Rule> rules_;
};

/// Rule id used for frames on the GOOSE ethertype that fail to decode.
inline constexpr std::string_view kMalformedRuleId = "malformed";

// ---------------------------------------------------------------------------
// Inspection

struct RateWindow {
  SimTime start{};
  std::uint32_t count = 0;
};

struct Subscription {
  /// False until a frame of this control block has passed every rule.
  bool seen = false;
  std::uint32_t st_num = 0;
  std::uint32_t sq_num = 0;
  std::uint64_t timestamp_us = 0;
  std::map<std::string, RateWindow> rate_windows;
};

/// Per gocb_ref. Sequence fields track the last frame that raised no alert.
using SubscriptionState = std::map<std::string, Subscription>;

struct Alert {
  SimTime time{};
  std::string rule_id;
  std::string gocb_ref;
  PortIndex ingress = 0;
  codec::Digest digest = 0;
};

struct InspectResult {
  SubscriptionState state;
  std::vector<Alert> alerts;

  bool abnormal() const noexcept { return !alerts.empty(); }
};

InspectResult inspect(const codec::GooseFrame& frame, PortIndex ingress, SubscriptionState state,
                      const RuleSet& rules, SimTime at, codec::Digest digest = 0);

// ---------------------------------------------------------------------------
// Loop correlation

/// Remembers digests the IDS re-forwarded so their return on the loop port can be recognised.
class LoopTracker {
 public:
  LoopTracker(PortIndex return_port, SimTime window) : return_port_(return_port), window_(window) {}

  void tag_loop(codec::Digest digest, SimTime at);
  /// True iff ingress is the return port and the digest was tagged within [at - window, at].
  bool is_loop(codec::Digest digest, PortIndex ingress, SimTime at) const;
  /// Forgets tags that can no longer match anything at or after `now`.
  void prune(SimTime now);

 private:
  PortIndex return_port_;
  SimTime window_;
  std::multimap<codec::Digest, SimTime> tags_;
};

// ---------------------------------------------------------------------------
// Localization

/// One abnormal frame seen by the IDS with its origin hypothesis and IDS port.
struct ObservationRecord {
  Host origin = Host::StationBusSwitch;
  PortIndex ingress = 0;
  codec::Digest digest = 0;
  bool loop = false;
  SimTime time{};
  bool operator==(const ObservationRecord&) const = default;
};

struct LocalizationVerdict {
  Host culprit = Host::StationBusSwitch;
  std::vector<ObservationRecord> evidence;
  SimTime decided_at{};
};

enum class LocalizationErrc { NoEvidence, Inconclusive };

class LocalizationError : public Error {
 public:
  LocalizationError(LocalizationErrc code, const std::string& what);
  LocalizationErrc code() const noexcept { return code_; }

 private:
  LocalizationErrc code_;
};

struct LocalizationPorts {
  /// Where traffic from the station bus first reaches the IDS.
  PortIndex primary = 3;
  /// Where the IDS's own re-forwarded copies come back.
  PortIndex loop_return = 7;
};

/// Decision table over abnormal observations (in arrival order):
///  StationBusSwitch when a non-loop abnormal copy reaches the loop-return port, or an
///    abnormal frame on the primary port binds to the station-bus switch;
///  PIED when the first abnormal observation is on the primary port and binds to the PIED,
///    and every abnormal copy on the loop-return port is a loop;
///  otherwise (or if both rows hold) LocalizationError::Inconclusive.
LocalizationVerdict localize(std::span<const ObservationRecord> observations, SimTime decided_at,
                             const LocalizationPorts& ports = {});

// ---------------------------------------------------------------------------
// Mitigation

struct MitigationPlan {
  NodeId ids = 0;
  PortIndex ids_port_count = 0;
  /// IDS ports whose neighbour is not the station-bus switch.
  std::vector<PortIndex> ids_keep;
  /// Switch ports linked to the PIED.
  std::vector<netsim::PortRef> pied_facing;
};

/// Derives the plan from node roles and links.
MitigationPlan plan_mitigation(const netsim::Topology& topology);

/// StationBusSwitch: disable every IDS port except ids_keep, then enable ids_keep.
/// PIED: disable every switch port facing it.
std::vector<sdn::PortMod> mitigate(const LocalizationVerdict& verdict, const MitigationPlan& plan);

// ---------------------------------------------------------------------------
// Device

struct IdsConfig {
  /// With the IDS disabled the device is a zero-delay forwarder.
  bool enabled = true;
  SimTime inspection_delay{4000};
  std::uint32_t passes = 1;
  PortIndex loop_out_port = 4;
  LocalizationPorts ports;
  SimTime loop_window{10'000};
  SimTime decision_window{10'000};
  std::map<codec::MacAddress, Host> hosts;
  std::map<PortIndex, Host> port_origin;

  SimTime processing_delay() const noexcept { return enabled ? inspection_delay * passes : SimTime{0}; }
};

/// Source-MAC binding first, then the per-port fallback, then StationBusSwitch.
Host origin_of(const IdsConfig& config, const codec::MacAddress& src, PortIndex ingress);

class IdsDevice : public netsim::Node {
 public:
  IdsDevice(NodeId self, PortIndex port_count, IdsConfig config, RuleSet rules, sdn::FlowTable table,
            sdn::Controller controller, MitigationPlan plan);

  void on_frame(netsim::Network& net, PortIndex ingress, const netsim::Frame& frame) override;

  /// True once an alert has been raised for this digest.
  bool flagged(codec::Digest digest) const { return flagged_.contains(digest); }
  const std::vector<Alert>& alerts() const noexcept { return alerts_; }
  const std::vector<ObservationRecord>& observations() const noexcept { return observations_; }
  const std::optional<LocalizationVerdict>& verdict() const noexcept { return verdict_; }
  const SubscriptionState& state() const noexcept { return state_; }

 private:
  void examine(netsim::Network& net, PortIndex ingress, const netsim::Frame& frame);
  void observe(netsim::Network& net, const ObservationRecord& obs);
  void decide(netsim::Network& net);

  NodeId self_;
  PortIndex port_count_;
  IdsConfig config_;
  RuleSet rules_;
  sdn::FlowTable table_;
  sdn::Controller controller_;
  MitigationPlan plan_;
  LoopTracker tracker_;
  SubscriptionState state_;
  std::set<codec::Digest> flagged_;
  std::map<codec::Digest, Host> abnormal_origin_;
  std::vector<Alert> alerts_;
  std::vector<ObservationRecord> observations_;
  std::optional<LocalizationVerdict> verdict_;
  bool decision_pending_ = false;
};

}  // namespace gridshield::ids
