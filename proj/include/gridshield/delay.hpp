#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "gridshield/netsim.hpp"

namespace gridshield::delay {

using netsim::SimTime;

/// Fault-to-trip delay terms. t_sv/t_gs are link latencies before/after the PIED.
struct DelayComponents {
  SimTime t_mu{};
  SimTime t_sv{};
  SimTime t_sp{};
  SimTime t_pied{};
  SimTime t_ss{};
  SimTime t_gs{};
  SimTime t_oc{};
  SimTime t_ids{};
  bool with_ids = false;

  /// 3 + 2 + 1 + 10 + 1 + 2 + 4 = 23 ms; t_ids = 4 ms when enabled.
  static DelayComponents defaults(bool with_ids);
  bool operator==(const DelayComponents&) const = default;
};

/// Sum of the seven base terms, plus t_ids iff with_ids.
SimTime total(const DelayComponents& c);

class NoTripFound : public Error {
 public:
  using Error::Error;
};

/// One attributed interval of the fault-to-trip chain.
struct Hop {
  std::string node;
  /// "process", "link" or "sample".
  std::string what;
  /// Delay term the interval is charged to ("t_mu", "t_sv", ...).
  std::string term;
  SimTime start{};
  SimTime end{};
};

struct DelayReport {
  DelayComponents components;
  SimTime sample_time{};
  SimTime trip_time{};
  SimTime total{};
  std::vector<Hop> hops;
};

/// Follows the first BreakerTrip back to the MU sample that caused it and charges
/// every interval to a term by node role. Throws NoTripFound.
DelayReport measure(const netsim::EventLog& log, const netsim::Topology& topology);

struct DelayBudget {
  SimTime baseline_expected{23'000};
  SimTime baseline_tolerance{500};
  SimTime with_ids_max{27'000};
  SimTime ids_added_max{4'000};
  double mains_hz = 60.0;
};

struct BudgetCheck {
  std::string name;
  SimTime measured{};
  SimTime limit{};
  bool pass = false;
};

/// baseline, with_ids, ids_added and quarter_cycle checks.
std::vector<BudgetCheck> check_budget(const DelayReport& baseline, const DelayReport& with_ids,
                                      const DelayBudget& budget = {});

nlohmann::ordered_json to_json(const DelayComponents& c);
nlohmann::ordered_json to_json(const DelayReport& report);
nlohmann::ordered_json to_json(const std::vector<BudgetCheck>& checks);

}  // namespace gridshield::delay
