#pragma once

#include <optional>
#include <string_view>

namespace gridshield {

/// Node roles of the simulated digital substation.
namespace role {
inline constexpr std::string_view kOmicron = "omicron";
inline constexpr std::string_view kMergingUnit = "merging_unit";
inline constexpr std::string_view kProcessBusSwitch = "process_bus_switch";
inline constexpr std::string_view kPied = "pied";
inline constexpr std::string_view kStationBusSwitch = "station_bus_switch";
inline constexpr std::string_view kIds = "ids";
}  // namespace role

/// Hosts that can originate abnormal GOOSE traffic.
enum class Host { StationBusSwitch, Pied };

constexpr std::string_view to_string(Host host) noexcept {
  return host == Host::StationBusSwitch ? "StationBusSwitch" : "PIED";
}

constexpr std::optional<Host> parse_host(std::string_view text) noexcept {
  if (text == "StationBusSwitch") return Host::StationBusSwitch;
  if (text == "PIED") return Host::Pied;
  return std::nullopt;
}

constexpr std::string_view role_of(Host host) noexcept {
  return host == Host::StationBusSwitch ? role::kStationBusSwitch : role::kPied;
}

}  // namespace gridshield
