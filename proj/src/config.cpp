#include <charconv>
#include <cmath>
#include <fstream>

#include "gridshield/scenarios.hpp"
#include "gridshield/substation.hpp"

#ifndef GRIDSHIELD_SCENARIO_DIR
#define GRIDSHIELD_SCENARIO_DIR "scenarios"
#endif

namespace gridshield::scenarios {

namespace fs = std::filesystem;

namespace {

constexpr int kMaxIncludeDepth = 8;

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Json load_rec(const fs::path& path, int depth) {
  if (depth > kMaxIncludeDepth) throw ConfigError("include nesting too deep at " + path.string());
  Json doc = read_json(path);
  if (!doc.is_object()) throw ConfigError(path.string() + ": top level must be an object");
  if (!doc.contains("include")) return doc;
  const auto& inc = doc["include"];
  if (!inc.is_string()) throw ConfigError(path.string() + ": include must be a string");
  Json base = load_rec(path.parent_path() / inc.get<std::string>(), depth + 1);
  doc.erase("include");
  base.merge_patch(doc);
  return base;
}

std::uint64_t parse_uint(std::string_view text, std::string_view what) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size())
    throw ConfigError("bad " + std::string(what) + ": '" + std::string(text) + "'");
  return v;
}

/// "4000", "4000us" or "4ms" (fractional milliseconds allowed) -> microseconds.
std::uint64_t parse_micros(std::string_view text) {
  if (text.ends_with("us")) return parse_uint(text.substr(0, text.size() - 2), "duration");
  if (text.ends_with("ms")) {
    const std::string num(text.substr(0, text.size() - 2));
    std::size_t used = 0;
    double ms = 0;
    try {
      ms = std::stod(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != num.size() || num.empty() || !(ms >= 0)) throw ConfigError("bad duration: '" + std::string(text) + "'");
    return static_cast<std::uint64_t>(std::llround(ms * 1000.0));
  }
  return parse_uint(text, "duration");
}

bool parse_bool(std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("bad boolean: '" + std::string(text) + "'");
}

/// Splits a stage's total latency evenly over its links (remainder to the first).
void spread_stage(Json& config, const std::string& stage, std::uint64_t total_us) {
  std::vector<Json*> links;
  for (auto& l : config.at("links"))
    if (l.value("stage", "") == stage) links.push_back(&l);
  if (links.empty()) throw ConfigError("no links with stage '" + stage + "' to override");
  const std::uint64_t each = total_us / links.size();
  for (auto* l : links) (*l)["latency_us"] = each;
  (*links.front())["latency_us"] = each + total_us % links.size();
}

// --- typed accessors --------------------------------------------------------

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

SimTime micros(const Json& j, const char* key, SimTime fallback) {
  return SimTime{get_or<std::uint64_t>(j, key, fallback.count())};
}

std::uint16_t u16(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    std::uint64_t v = 0;
    const bool hex = s.starts_with("0x") || s.starts_with("0X");
    const char* b = s.data() + (hex ? 2 : 0);
    const auto [p, ec] = std::from_chars(b, s.data() + s.size(), v, hex ? 16 : 10);
    if (ec != std::errc{} || p != s.data() + s.size() || v > 0xFFFF) throw ConfigError("bad 16-bit value: " + s);
    return static_cast<std::uint16_t>(v);
  }
  const auto v = j.get<std::uint64_t>();
  if (v > 0xFFFF) throw ConfigError("16-bit value out of range: " + std::to_string(v));
  return static_cast<std::uint16_t>(v);
}

Host host(const Json& j) {
  const auto s = j.get<std::string>();
  const auto h = parse_host(s);
  if (!h) throw ConfigError("unknown host '" + s + "' (expected StationBusSwitch or PIED)");
  return *h;
}

std::pair<std::string, PortIndex> split_port(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0) throw ConfigError("expected node:port, got '" + text + "'");
  const auto port = parse_uint(std::string_view(text).substr(colon + 1), "port");
  if (port == 0 || port > 0xFFFF) throw ConfigError("bad port in '" + text + "'");
  return {text.substr(0, colon), static_cast<PortIndex>(port)};
}

sdn::Action action(const std::string& text) {
  if (text == "drop") return sdn::Drop{};
  if (text == "controller") return sdn::ToController{};
  if (text.starts_with("forward:")) {
    const auto p = parse_uint(std::string_view(text).substr(8), "forward port");
    if (p == 0 || p > 0xFFFF) throw ConfigError("bad forward port: " + text);
    return sdn::Forward{static_cast<PortIndex>(p)};
  }
  throw ConfigError("unknown action '" + text + "'");
}

sdn::FlowTable flow_table(const Json& j) {
  const auto def = get_or<std::string>(j, "default", "drop");
  if (def != "drop" && def != "controller") throw ConfigError("flow default must be drop or controller");
  sdn::FlowTable table(def == "drop" ? sdn::DefaultAction::Drop : sdn::DefaultAction::ToController);
  for (const auto& e : j.value("entries", Json::array())) {
    sdn::FlowEntry entry;
    entry.priority = u16(e.at("priority"));
    const auto& m = e.at("match");
    if (m.contains("in_port")) entry.match.in_port = u16(m["in_port"]);
    if (m.contains("ethertype")) entry.match.ethertype = u16(m["ethertype"]);
    if (m.contains("src_mac")) entry.match.src_mac = codec::MacAddress::parse(m["src_mac"].get<std::string>());
    if (m.contains("app_id")) entry.match.app_id = u16(m["app_id"]);
    for (const auto& a : e.at("actions")) entry.actions.push_back(action(a.get<std::string>()));
    try {
      table.add(std::move(entry));
    } catch (const sdn::FlowError& err) {
      throw ConfigError(std::string("flow table: ") + err.what());
    }
  }
  return table;
}

codec::MacAddress mac_ref(const Json& j, const std::map<std::string, codec::MacAddress>& macs) {
  const auto s = j.get<std::string>();
  if (const auto it = macs.find(s); it != macs.end()) return it->second;
  return codec::MacAddress::parse(s);
}

ids::Rule rule(const Json& j, const std::map<std::string, codec::MacAddress>& macs) {
  ids::Rule r;
  r.id = j.at("id").get<std::string>();
  const auto kind_name = j.at("kind").get<std::string>();
  const auto kind = ids::parse_rule_kind(kind_name);
  if (!kind) throw ConfigError("unknown rule kind '" + kind_name + "'");
  switch (*kind) {
    case ids::RuleKind::SequenceRegression: r.params = ids::SequenceRegression{}; break;
    case ids::RuleKind::SequenceSkip: r.params = ids::SequenceSkip{get_or<std::uint32_t>(j, "max_gap", 1)}; break;
    case ids::RuleKind::TtlBound:
      r.params = ids::TtlBound{get_or<std::uint32_t>(j, "min_ms", 1), get_or<std::uint32_t>(j, "max_ms", 60'000)};
      break;
    case ids::RuleKind::PublisherWhitelist: {
      ids::PublisherWhitelist p;
      for (const auto& [gocb, list] : j.at("publishers").items())
        for (const auto& m : list) p.publishers[gocb].push_back(mac_ref(m, macs));
      r.params = std::move(p);
      break;
    }
    case ids::RuleKind::IngressBinding: {
      ids::IngressBinding p;
      for (const auto& [gocb, list] : j.at("ports").items())
        for (const auto& port : list) p.ports[gocb].push_back(u16(port));
      r.params = std::move(p);
      break;
    }
    case ids::RuleKind::RateLimit:
      r.params = ids::RateLimit{get_or<std::uint32_t>(j, "max_frames", 10), micros(j, "window_us", SimTime{100'000})};
      break;
  }
  return r;
}

void parse_expect(const Json& j, Expectation& e) {
  e.verdict = get_or<std::string>(j, "verdict", "none");
  if (e.verdict != "none" && e.verdict != "Inconclusive" && !parse_host(e.verdict))
    throw ConfigError("expect.verdict: unknown value '" + e.verdict + "'");
  if (j.contains("ids_enabled_ports")) {
    std::set<PortIndex> ports;
    for (const auto& p : j["ids_enabled_ports"]) ports.insert(u16(p));
    e.ids_enabled_ports = std::move(ports);
  }
  e.disabled_ports = get_or<std::vector<std::string>>(j, "disabled_ports", {});
  e.pied_isolated = get_or<bool>(j, "pied_isolated", false);
  e.liveness = get_or<bool>(j, "liveness", false);
  if (j.contains("breaker_trips")) e.breaker_trips = j["breaker_trips"].get<std::uint32_t>();
  e.trace = get_or<std::vector<std::string>>(j, "trace", {});
  e.also_visits = get_or<std::vector<std::string>>(j, "also_visits", {});
}

ScenarioSpec parse_spec_impl(const Json& config) {
  ScenarioSpec spec;
  spec.id = config.at("id").get<std::string>();
  spec.config = config;

  for (const auto& n : config.at("nodes")) {
    netsim::NodeSpec ns{n.at("name").get<std::string>(), n.at("role").get<std::string>(), u16(n.at("ports"))};
    if (n.contains("mac")) spec.macs[ns.name] = codec::MacAddress::parse(n["mac"].get<std::string>());
    spec.topology.nodes.push_back(std::move(ns));
  }
  for (const auto& l : config.at("links")) {
    const auto [an, ap] = split_port(l.at("a").get<std::string>());
    const auto [bn, bp] = split_port(l.at("b").get<std::string>());
    spec.topology.links.push_back(
        {an, ap, bn, bp, SimTime{l.at("latency_us").get<std::uint64_t>()}, get_or<std::string>(l, "stage", "")});
  }
  const auto topo = netsim::Topology::build(spec.topology);
  auto mac_of_role = [&](std::string_view r) {
    const auto& name = topo.name(topo.unique_role(r));
    const auto it = spec.macs.find(name);
    if (it == spec.macs.end()) throw ConfigError("node " + name + " needs a mac");
    return it->second;
  };

  spec.duration = SimTime{config.at("duration_us").get<std::uint64_t>()};
  spec.control_latency = micros(config, "control_latency_us", SimTime{1000});

  // Delay terms: device delays are configured directly, stage terms are link sums.
  const auto& d = config.at("delays_us");
  auto& c = spec.delays;
  c.t_mu = SimTime{d.at("t_mu").get<std::uint64_t>()};
  c.t_sp = SimTime{d.at("t_sp").get<std::uint64_t>()};
  c.t_pied = SimTime{d.at("t_pied").get<std::uint64_t>()};
  c.t_ss = SimTime{d.at("t_ss").get<std::uint64_t>()};
  c.t_oc = SimTime{d.at("t_oc").get<std::uint64_t>()};
  const auto passes = get_or<std::uint32_t>(config, "ids_passes", 1);
  if (passes == 0) throw ConfigError("ids_passes must be >= 1");
  c.with_ids = get_or<bool>(config, "with_ids", true);
  c.t_ids = c.with_ids ? SimTime{d.at("t_ids").get<std::uint64_t>()} * passes : SimTime{0};
  for (const auto& l : topo.links()) {
    if (l.stage == "sv") c.t_sv += l.latency;
    if (l.stage == "goose") c.t_gs += l.latency;
  }

  const auto& w = config.at("waveform");
  spec.waveform.frequency_hz = get_or<double>(w, "frequency_hz", 60.0);
  spec.waveform.current_amplitude_ma = get_or<std::int32_t>(w, "current_amplitude_ma", 1000);
  spec.waveform.voltage_amplitude_mv = get_or<std::int32_t>(w, "voltage_amplitude_mv", 66395);
  if (w.contains("fault") && !w["fault"].is_null())
    spec.waveform.fault = devices::FaultStep{SimTime{w["fault"].at("at_us").get<std::uint64_t>()},
                                             w["fault"].at("current_amplitude_ma").get<std::int32_t>()};

  const auto& mu = config.at("mu");
  spec.mu.samples_per_second = u16(mu.at("samples_per_second"));
  spec.mu.sv_id = mu.at("sv_id").get<std::string>();
  spec.mu.dst = codec::MacAddress::parse(mu.at("dst").get<std::string>());
  spec.mu.src = mac_of_role(role::kMergingUnit);
  spec.mu.app_id = mu.contains("app_id") ? u16(mu["app_id"]) : std::uint16_t{0x4000};
  spec.mu.port = mu.contains("port") ? u16(mu["port"]) : PortIndex{1};
  spec.mu.internal_delay = c.t_mu;

  const auto& pied = config.at("pied");
  auto& p = spec.pied;
  p.pickup_current_ma = pied.at("pickup_current_ma").get<std::int32_t>();
  p.publish_interval = SimTime{pied.at("publish_interval_us").get<std::uint64_t>()};
  p.internal_delay = c.t_pied;
  p.gocb_ref = pied.at("gocb_ref").get<std::string>();
  p.dataset_ref = pied.at("dataset_ref").get<std::string>();
  p.dst = codec::MacAddress::parse(pied.at("dst").get<std::string>());
  p.src = mac_of_role(role::kPied);
  p.app_id = u16(pied.at("app_id"));
  p.ttl_ms = pied.at("ttl_ms").get<std::uint32_t>();
  p.initial_st_num = get_or<std::uint32_t>(pied, "initial_st_num", 1);
  for (const auto& gp : pied.at("goose_ports")) p.goose_ports.push_back(u16(gp));
  p.samples_per_second = spec.mu.samples_per_second;

  const auto policy = get_or<std::string>(config.value("omicron", Json::object()), "policy", "ignore_flagged");
  if (policy != "ignore_flagged" && policy != "act_on_all") throw ConfigError("omicron.policy: unknown '" + policy + "'");
  spec.omicron.policy = policy == "ignore_flagged" ? devices::BreakerPolicy::IgnoreFlagged : devices::BreakerPolicy::ActOnAll;
  spec.omicron.internal_delay = c.t_oc;

  for (const auto& [name, table] : config.at("flows").items()) {
    if (!topo.find_node(name)) throw ConfigError("flows: unknown node '" + name + "'");
    spec.flows[name] = flow_table(table);
  }

  const auto& ij = config.at("ids");
  auto& ic = spec.ids;
  ic.enabled = c.with_ids;
  ic.inspection_delay = SimTime{d.at("t_ids").get<std::uint64_t>()};
  ic.passes = passes;
  ic.loop_out_port = ij.contains("loop_out_port") ? u16(ij["loop_out_port"]) : PortIndex{4};
  ic.ports.primary = ij.contains("primary_port") ? u16(ij["primary_port"]) : PortIndex{3};
  ic.ports.loop_return = ij.contains("loop_return_port") ? u16(ij["loop_return_port"]) : PortIndex{7};
  ic.loop_window = micros(ij, "loop_window_us", SimTime{10'000});
  ic.decision_window = micros(ij, "decision_window_us", SimTime{10'000});
  const Json hosts = ij.value("hosts", Json::object());
  const Json port_origin = ij.value("port_origin", Json::object());
  for (const auto& [node, h] : hosts.items()) {
    const auto it = spec.macs.find(node);
    if (it == spec.macs.end()) throw ConfigError("ids.hosts: node '" + node + "' has no mac");
    ic.hosts[it->second] = host(h);
  }
  for (const auto& [port, h] : port_origin.items())
    ic.port_origin[static_cast<PortIndex>(parse_uint(port, "port"))] = host(h);
  std::vector<ids::Rule> rules;
  for (const auto& r : ij.at("rules")) rules.push_back(rule(r, spec.macs));
  spec.rules = ids::RuleSet(std::move(rules));

  if (config.contains("injection") && !config["injection"].is_null()) {
    const auto& inj = config["injection"];
    InjectionSpec is;
    is.host = host(inj.at("host"));
    const auto [node, port] = split_port(inj.at("port").get<std::string>());
    is.port = topo.port(node, port);
    is.schedule = {SimTime{inj.at("start_us").get<std::uint64_t>()}, micros(inj, "interval_us", SimTime{0}),
                   get_or<std::uint32_t>(inj, "count", 1)};
    const auto& f = inj.at("frame");
    auto& t = is.tmpl;
    t.dst = f.contains("dst") ? codec::MacAddress::parse(f["dst"].get<std::string>()) : p.dst;
    t.src = mac_ref(f.at("src"), spec.macs);
    t.app_id = f.contains("app_id") ? u16(f["app_id"]) : p.app_id;
    t.gocb_ref = get_or<std::string>(f, "gocb_ref", p.gocb_ref);
    t.dataset_ref = get_or<std::string>(f, "dataset_ref", p.dataset_ref);
    t.time_allowed_to_live_ms = get_or<std::uint32_t>(f, "ttl_ms", p.ttl_ms);
    t.st_num = f.at("st_num").get<std::uint32_t>();
    t.sq_num = get_or<std::uint32_t>(f, "sq_num", 0);
    t.test = get_or<bool>(f, "test", false);
    t.all_data = {get_or<bool>(f, "trip", true)};
    try {
      codec::validate(t);
    } catch (const codec::CodecError& e) {
      throw ConfigError(std::string("injection.frame: ") + e.what());
    }
    spec.injection = std::move(is);
  }

  if (config.contains("expect")) parse_expect(config["expect"], spec.expect);
  return spec;
}

}  // namespace

Json load_config(const fs::path& path) { return load_rec(path, 0); }

void apply_override(Json& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ConfigError("override must be key=value: '" + std::string(assignment) + "'");
  const std::string key(assignment.substr(0, eq));
  const std::string value(assignment.substr(eq + 1));

  if (key.starts_with("/")) {
    Json parsed;
    try {
      parsed = Json::parse(value);
    } catch (const Json::parse_error&) {
      parsed = value;
    }
    try {
      config[Json::json_pointer(key)] = std::move(parsed);
    } catch (const Json::exception& e) {
      throw ConfigError("override " + key + ": " + e.what());
    }
    return;
  }
  static const std::set<std::string> kDeviceTerms = {"t_mu", "t_sp", "t_pied", "t_ss", "t_oc", "t_ids"};
  if (kDeviceTerms.contains(key)) {
    config["delays_us"][key] = parse_micros(value);
  } else if (key == "t_sv") {
    spread_stage(config, "sv", parse_micros(value));
  } else if (key == "t_gs") {
    spread_stage(config, "goose", parse_micros(value));
  } else if (key == "with_ids") {
    config["with_ids"] = parse_bool(value);
  } else if (key == "ids_passes") {
    config["ids_passes"] = parse_uint(value, "ids_passes");
  } else if (key == "duration_us" || key == "duration") {
    config["duration_us"] = parse_micros(value);
  } else {
    throw ConfigError("unknown override key '" + key + "'");
  }
}

ScenarioSpec parse_spec(const Json& config) {
  try {
    return parse_spec_impl(config);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("scenario config: ") + e.what());
  }
}

fs::path scenario_dir() {
  if (const char* env = std::getenv("GRIDSHIELD_SCENARIO_DIR")) return env;
  return GRIDSHIELD_SCENARIO_DIR;
}

ScenarioSpec load_scenario(const std::string& name_or_path, const std::vector<std::string>& overrides) {
  fs::path path = name_or_path;
  if (!name_or_path.ends_with(".json") && name_or_path.find('/') == std::string::npos)
    path = scenario_dir() / (name_or_path + ".json");
  if (!fs::exists(path)) throw ConfigError("unknown scenario '" + name_or_path + "'");
  Json config = load_config(path);
  for (const auto& o : overrides) apply_override(config, o);
  return parse_spec(config);
}

}  // namespace gridshield::scenarios
