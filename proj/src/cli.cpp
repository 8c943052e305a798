#include "gridshield/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "gridshield/scenarios.hpp"

namespace gridshield::cli {

namespace fs = std::filesystem;
using scenarios::Json;

namespace {

enum class Verbosity { Quiet, Error, Info, Debug };

Verbosity verbosity_from_env() {
  const char* v = std::getenv("GRIDSHIELD_LOG");
  if (!v) return Verbosity::Info;
  const std::string s(v);
  if (s == "quiet" || s == "off") return Verbosity::Quiet;
  if (s == "error") return Verbosity::Error;
  if (s == "debug") return Verbosity::Debug;
  return Verbosity::Info;
}

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
  if (!f) throw ConfigError("write failed: " + path.string());
}

Json delay_document(const scenarios::ScenarioSpec& spec, const scenarios::ScenarioResult& result) {
  Json doc;
  doc["scenario"] = spec.id;
  doc["configured"] = delay::to_json(spec.delays);
  doc["configured_total_us"] = delay::total(spec.delays).count();
  doc["trip"] = result.delay.has_value();
  doc["measured"] = result.delay ? Json(delay::to_json(*result.delay)) : Json(nullptr);
  return doc;
}

void write_outputs(const fs::path& dir, const scenarios::ScenarioSpec& spec, const scenarios::ScenarioResult& result,
                   const netsim::EventLog* log) {
  fs::create_directories(dir);
  if (log) {
    std::ostringstream events;
    scenarios::write_log(events, spec, *log);
    write_file(dir / "events.jsonl", events.str());
  }
  write_file(dir / "result.json", scenarios::to_json(result).dump(2) + "\n");
  write_file(dir / "delay_report.json", delay_document(spec, result).dump(2) + "\n");
}

void summarize(std::ostream& out, Verbosity v, const scenarios::ScenarioResult& r) {
  if (v < Verbosity::Info && r.pass) return;
  if (v == Verbosity::Quiet) return;
  out << r.scenario << ": " << (r.pass ? "PASS" : "FAIL") << "  verdict=" << r.verdict << "  alerts=" << r.alerts
      << "  breaker_trips=" << r.breaker_trips;
  if (r.delay) out << "  delay=" << r.delay->total.count() << "us";
  out << '\n';
  for (const auto& c : r.checks)
    if (v == Verbosity::Debug || !c.pass)
      out << "  " << (c.pass ? "ok   " : "FAIL ") << c.name << (c.detail.empty() ? "" : "  (" + c.detail + ")")
          << '\n';
}

struct JobOutcome {
  int code = kExitPass;
  std::string text;
  std::string error;
};

JobOutcome run_one(const std::string& scenario, const std::vector<std::string>& overrides, const fs::path& out_dir,
                   Verbosity v) {
  JobOutcome o;
  try {
    const auto spec = scenarios::load_scenario(scenario, overrides);
    const auto run = scenarios::run_scenario(spec);
    write_outputs(out_dir, spec, run.result, &run.log);
    std::ostringstream text;
    summarize(text, v, run.result);
    if (v == Verbosity::Debug) text << "  " << run.log.size() << " events -> " << out_dir.string() << '\n';
    o.text = text.str();
    o.code = run.result.pass ? kExitPass : kExitFail;
  } catch (const Error& e) {
    o.code = kExitUsage;
    o.error = scenario + ": " + e.what();
  } catch (const std::exception& e) {
    o.code = kExitUsage;
    o.error = scenario + ": " + e.what();
  }
  return o;
}

int cmd_run(const std::vector<std::string>& names, const std::string& config, const std::vector<std::string>& overrides,
            const fs::path& out_dir, unsigned jobs, std::ostream& out, std::ostream& err, Verbosity v) {
  std::vector<std::string> all = names;
  if (!config.empty()) all.push_back(config);
  if (all.empty()) {
    err << "run: give --scenario or --config\n";
    return kExitUsage;
  }
  auto dir_for = [&](const std::string& s) {
    return all.size() == 1 ? out_dir : out_dir / fs::path(s).stem();
  };

  std::vector<JobOutcome> outcomes(all.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < all.size(); i = next++) outcomes[i] = run_one(all[i], overrides, dir_for(all[i]), v);
  };
  const unsigned n = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(all.size())));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int code = kExitPass;
  for (const auto& o : outcomes) {
    out << o.text;
    if (!o.error.empty() && v != Verbosity::Quiet) err << "error: " << o.error << '\n';
    code = std::max(code, o.code);
  }
  return code;
}

int cmd_replay(const std::string& log_path, const std::string& out_dir, std::ostream& out, std::ostream& err,
               Verbosity v) {
  try {
    std::ifstream in(log_path);
    if (!in) throw ConfigError("cannot open " + log_path);
    const auto saved = scenarios::read_log(in);
    const auto result = scenarios::score(saved.spec, saved.log);
    if (!out_dir.empty()) write_outputs(out_dir, saved.spec, result, nullptr);
    summarize(out, v, result);
    return result.pass ? kExitPass : kExitFail;
  } catch (const std::exception& e) {
    if (v != Verbosity::Quiet) err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace

int run_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Substation network simulator with an IDS-integrated SDN switch"};
  app.require_subcommand(1);

  std::vector<std::string> scenario_names;
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = "out";
  unsigned jobs = 1;
  auto* run = app.add_subcommand("run", "Run scenarios and write events.jsonl, result.json, delay_report.json");
  run->add_option("--scenario", scenario_names, "Shipped scenario name or file (repeatable)");
  run->add_option("--config", config_path, "Scenario config file");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--override", overrides, "key=value config override (repeatable)");
  run->add_option("--jobs", jobs, "Scenarios run in parallel")->check(CLI::PositiveNumber);

  std::string log_path;
  std::string replay_out;
  auto* replay = app.add_subcommand("replay", "Re-score a saved events.jsonl");
  replay->add_option("log", log_path, "Event log")->required();
  replay->add_option("--out", replay_out, "Write result.json and delay_report.json here");

  std::ostringstream cli_out, cli_err;
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, cli_out, cli_err);
    out << cli_out.str();
    err << cli_err.str();
    return code == 0 ? kExitPass : kExitUsage;
  }

  const auto v = verbosity_from_env();
  if (*run) return cmd_run(scenario_names, config_path, overrides, out_dir, jobs, out, err, v);
  return cmd_replay(log_path, replay_out, out, err, v);
}

}  // namespace gridshield::cli
