// Command-line front end: run scenarios, drive dumps on a live run over the
// control channel, and verify recorded event files offline.
//
// Exit codes: 0 clean, 1 invariant violation, 2 usage or config error.

#include <algorithm>
#include <chrono>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dblog/checks.hpp"
#include "dblog/codec.hpp"
#include "dblog/control.hpp"
#include "dblog/harness.hpp"
#include "dblog/sinks.hpp"
#include "dblog/workload.hpp"

namespace {

using namespace dblog;

PrimaryKey parse_component_list(const std::string& text) {
  PrimaryKey key;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    std::string part = text.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      std::int64_t n = std::stoll(part, &used);
      if (used == part.size()) {
        key.components.emplace_back(n);
      } else {
        key.components.emplace_back(part);
      }
    } catch (const std::exception&) {
      key.components.emplace_back(part);
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return key;
}

// `all`, `table:<name>`, or `keys:<name>:k1,k2,...` (single-column keys).
void apply_scope(DumpPlan& plan, const std::string& scope) {
  if (scope == "all") {
    plan.scope = DumpScope::all_tables;
    return;
  }
  if (scope.starts_with("table:")) {
    plan.scope = DumpScope::table;
    plan.table = scope.substr(6);
    if (plan.table.empty()) throw ConfigError("table scope needs a name");
    return;
  }
  if (scope.starts_with("keys:")) {
    std::string rest = scope.substr(5);
    std::size_t colon = rest.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("keys scope needs keys: use keys:<table>:k1,k2");
    }
    plan.scope = DumpScope::keys;
    plan.table = rest.substr(0, colon);
    std::string list = rest.substr(colon + 1);
    std::size_t p = 0;
    while (p <= list.size()) {
      std::size_t c = list.find(',', p);
      std::string part =
          list.substr(p, c == std::string::npos ? std::string::npos : c - p);
      if (!part.empty()) plan.keys.push_back(parse_component_list(part));
      if (c == std::string::npos) break;
      p = c + 1;
    }
    if (plan.keys.empty()) throw ConfigError("keys scope with empty key list");
    return;
  }
  throw ConfigError("unknown scope '" + scope + "'");
}

ojson control_call(const std::string& dir, const ojson& request,
                   std::uint64_t timeout_ms) {
  ControlClient client{std::filesystem::path(dir)};
  return client.call(request, std::chrono::milliseconds(timeout_ms));
}

int print_control_response(const ojson& rsp) {
  if (!rsp.value("ok", false)) {
    std::cerr << "error: " << rsp.value("error", std::string("unknown"))
              << std::endl;
    return 2;
  }
  if (rsp.contains("dump_id")) {
    std::cout << "dump_id: " << rsp["dump_id"].get<std::string>() << '\n';
  }
  if (rsp.contains("complete")) {
    std::cout << "paused: " << (rsp.value("paused", false) ? "yes" : "no")
              << "  complete: " << (rsp.value("complete", false) ? "yes" : "no")
              << '\n';
  }
  if (rsp.contains("tables")) {
    for (const auto& t : rsp["tables"]) {
      std::cout << "  " << t.value("table", std::string{}) << ": "
                << t.value("status", std::string{});
      if (!t["last_key"].is_null()) {
        std::cout << " last_key=" << t["last_key"].dump();
      }
      std::cout << '\n';
    }
  }
  return 0;
}

int verify_command(const std::string& events_path,
                   const std::string& workload_path, bool allow_redelivery) {
  std::vector<OutputEvent> events = read_events_file(events_path);

  std::vector<Violation> violations =
      check_stream_wellformed(events, allow_redelivery);
  auto ntt = check_no_time_travel(events, allow_redelivery);
  violations.insert(violations.end(), ntt.begin(), ntt.end());

  std::string diff;
  if (!workload_path.empty()) {
    std::vector<WorkloadOp> journal = read_workload_file(workload_path);
    StateMap oracle = oracle_final_state(journal);
    StateMap materialized = materialize(events);
    std::size_t diffs = 0;
    std::ostringstream ss;
    for (const auto& [k, v] : oracle) {
      auto it = materialized.find(k);
      if (it == materialized.end()) {
        ss << "missing: " << k.first << " " << display_key(k.second) << '\n';
        ++diffs;
      } else if (it->second != v) {
        ss << "mismatch: " << k.first << " " << display_key(k.second) << '\n';
        ++diffs;
      }
      if (diffs > 10) break;
    }
    for (const auto& [k, v] : materialized) {
      if (!oracle.contains(k)) {
        ss << "extra: " << k.first << " " << display_key(k.second) << '\n';
        ++diffs;
        if (diffs > 15) break;
      }
    }
    if (diffs > 0) {
      violations.push_back(
          {"materialization", std::to_string(diffs) + "+ differences vs oracle"});
      diff = ss.str();
    }
  }

  std::cout << events.size() << " events checked\n";
  for (const Violation& v : violations) {
    std::cout << "VIOLATION [" << v.invariant << "] " << v.evidence << '\n';
  }
  if (!diff.empty()) std::cout << diff;
  std::cout << (violations.empty() ? "RESULT: PASS" : "RESULT: FAIL")
            << std::endl;
  return violations.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "dblog: watermark-based change-data-capture over a simulated source"};
  app.require_subcommand(1);

  // --- run ---
  auto* run = app.add_subcommand(
      "run", "run a scenario to quiescence and verify its invariants");
  std::string config_path, scope = "all", mode_name = "deterministic";
  ScenarioConfig ov;
  std::uint64_t dump_at = 0, throttle = 0;
  std::size_t chunk_size = 100, table_count = 2, rows = 100, pk_arity = 1,
              value_columns = 2;
  run->add_option("--config", config_path, "scenario file (JSON)");
  run->add_option("--seed", ov.seed, "scenario seed");
  run->add_option("--mode", mode_name, "deterministic|free")
      ->check(CLI::IsMember({"deterministic", "det", "free", "free-running"}));
  run->add_option("--tables", table_count, "number of generated tables");
  run->add_option("--rows", rows, "initial rows per table");
  run->add_option("--pk-arity", pk_arity, "primary key arity (1-3)");
  run->add_option("--value-columns", value_columns, "non-key columns per table");
  run->add_option("--writers", ov.writers, "concurrent writers");
  run->add_option("--ops", ov.writer_ops, "total writer operations");
  run->add_option("--dump-at", dump_at, "trigger the dump at this step");
  run->add_option("--scope", scope, "all | table:<name> | keys:<table>:k1,k2");
  run->add_option("--chunk-size", chunk_size, "rows per chunk")
      ->check(CLI::PositiveNumber);
  run->add_option("--throttle", throttle,
                  "min log-processing steps between chunks");
  run->add_flag("--read-lag", ov.read_lag, "enable the read-lag adversary");
  run->add_option("--sink-fail-every", ov.sink_fail_every,
                  "inject a transient sink failure every k writes");
  run->add_option("--buffer-capacity", ov.buffer_capacity, "output buffer size");
  run->add_option("--out", ov.out_path, "sink file (canonical line format)");
  run->add_option("--workload-out", ov.workload_out, "write the committed ops");
  run->add_option("--report", ov.report_path, "write the run report (JSON)");
  run->add_option("--state-dir", ov.state_dir, "file-backed state store root");
  run->add_option("--control-socket", ov.control_dir,
                  "serve the dump API from this directory (implies free mode)");
  run->add_option("--linger-ms", ov.linger_ms,
                  "keep serving the control channel this long after quiescence");

  // --- control verbs ---
  std::string ctl_dir, ctl_table, ctl_keys, ctl_dump_id;
  std::uint64_t ctl_timeout = 10000, ctl_throttle = 0;
  std::size_t ctl_chunk = 1000;
  bool ctl_all = false;

  auto add_ctl = [&](CLI::App* sub) {
    sub->add_option("--control-socket", ctl_dir,
                    "control directory of the live run")
        ->required();
    sub->add_option("--timeout-ms", ctl_timeout, "response timeout");
  };
  auto* dump = app.add_subcommand("dump", "trigger a dump on a live run");
  add_ctl(dump);
  dump->add_option("--table", ctl_table, "dump one table");
  dump->add_option("--keys", ctl_keys, "dump specific keys: <table>:k1,k2");
  dump->add_flag("--all", ctl_all, "dump all tables (default)");
  dump->add_option("--chunk-size", ctl_chunk, "rows per chunk");
  dump->add_option("--throttle", ctl_throttle,
                   "min log-processing steps between chunks");

  auto* pause = app.add_subcommand("pause", "pause the running dump");
  add_ctl(pause);
  pause->add_option("--dump-id", ctl_dump_id, "dump to pause (default latest)");

  auto* resume = app.add_subcommand("resume", "resume a paused dump");
  add_ctl(resume);
  resume->add_option("--dump-id", ctl_dump_id, "dump to resume (default latest)");

  auto* status = app.add_subcommand("status", "show per-table dump checkpoints");
  add_ctl(status);
  status->add_option("--dump-id", ctl_dump_id, "dump to inspect (default latest)");

  // --- verify ---
  auto* verify = app.add_subcommand("verify", "check a recorded events file");
  std::string events_path, workload_path;
  bool allow_redelivery = false;
  verify->add_option("--events", events_path, "events file")->required();
  verify->add_option("--workload", workload_path,
                     "committed ops file for the completeness oracle");
  verify->add_flag("--allow-redelivery", allow_redelivery,
                   "tolerate exact duplicates after crash or takeover");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      ScenarioConfig cfg;
      if (!config_path.empty()) cfg = load_scenario_file(config_path);

      auto given = [&](const std::string& name) {
        return run->count(name) > 0;
      };
      if (given("--seed")) cfg.seed = ov.seed;
      if (given("--mode")) {
        cfg.mode = (mode_name == "free" || mode_name == "free-running")
                       ? RunMode::free_running
                       : RunMode::deterministic;
      }
      if (given("--writers")) cfg.writers = ov.writers;
      if (given("--ops")) cfg.writer_ops = ov.writer_ops;
      if (given("--read-lag")) cfg.read_lag = ov.read_lag;
      if (given("--sink-fail-every")) cfg.sink_fail_every = ov.sink_fail_every;
      if (given("--buffer-capacity")) cfg.buffer_capacity = ov.buffer_capacity;
      if (given("--out")) cfg.out_path = ov.out_path;
      if (given("--state-dir")) cfg.state_dir = ov.state_dir;
      if (given("--workload-out")) cfg.workload_out = ov.workload_out;
      if (given("--report")) cfg.report_path = ov.report_path;
      if (given("--control-socket")) {
        cfg.control_dir = ov.control_dir;
        cfg.mode = RunMode::free_running;
      }
      if (given("--linger-ms")) cfg.linger_ms = ov.linger_ms;

      if (cfg.tables.empty() || given("--tables") || given("--rows") ||
          given("--pk-arity") || given("--value-columns")) {
        cfg.tables.clear();
        for (std::size_t i = 0; i < table_count; ++i) {
          TableSpec spec;
          spec.name = "t" + std::to_string(i + 1);
          spec.pk_arity = pk_arity;
          spec.value_columns = value_columns;
          spec.initial_rows = rows;
          cfg.tables.push_back(std::move(spec));
        }
      }

      if (given("--dump-at") || given("--scope")) {
        DumpPlan plan;
        if (cfg.dump) plan = *cfg.dump;
        if (given("--dump-at")) plan.at_step = dump_at;
        if (given("--scope")) apply_scope(plan, scope);
        if (given("--chunk-size")) plan.chunk_size = chunk_size;
        if (given("--throttle")) plan.throttle = throttle;
        cfg.dump = plan;
      } else if (cfg.dump) {
        if (given("--chunk-size")) cfg.dump->chunk_size = chunk_size;
        if (given("--throttle")) cfg.dump->throttle = throttle;
      }

      RunReport report = run_scenario(cfg);
      std::cout << report.summary();
      std::cout << (report.passed() ? "RESULT: PASS" : "RESULT: FAIL")
                << std::endl;
      return report.passed() ? 0 : 1;
    }
    if (dump->parsed()) {
      ojson req;
      req["cmd"] = "dump";
      if (!ctl_keys.empty()) {
        DumpPlan plan;
        apply_scope(plan, "keys:" + ctl_keys);
        req["scope"] = "keys";
        req["table"] = plan.table;
        ojson keys = ojson::array();
        for (const auto& k : plan.keys) keys.push_back(key_to_json(k));
        req["keys"] = keys;
      } else if (!ctl_table.empty()) {
        req["scope"] = "table";
        req["table"] = ctl_table;
      } else {
        req["scope"] = "all";
      }
      req["chunk_size"] = ctl_chunk;
      req["throttle"] = ctl_throttle;
      return print_control_response(control_call(ctl_dir, req, ctl_timeout));
    }
    if (pause->parsed() || resume->parsed() || status->parsed()) {
      ojson req;
      req["cmd"] =
          pause->parsed() ? "pause" : resume->parsed() ? "resume" : "status";
      if (!ctl_dump_id.empty()) req["dump_id"] = ctl_dump_id;
      return print_control_response(control_call(ctl_dir, req, ctl_timeout));
    }
    if (verify->parsed()) {
      return verify_command(events_path, workload_path, allow_redelivery);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const DecodeError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 2;
}
