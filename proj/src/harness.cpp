#include "dblog/harness.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <thread>

#include "dblog/control.hpp"

namespace dblog {

namespace {

constexpr std::uint64_t kNoExpiry = std::uint64_t{1} << 62;

RunMode mode_from_string(const std::string& s) {
  if (s == "deterministic" || s == "det") return RunMode::deterministic;
  if (s == "free" || s == "free-running") return RunMode::free_running;
  throw ConfigError("unknown mode '" + s + "'");
}

DumpScope scope_from_name(const std::string& s) {
  if (s == "all") return DumpScope::all_tables;
  if (s == "table") return DumpScope::table;
  if (s == "keys") return DumpScope::keys;
  throw ConfigError("unknown dump scope '" + s + "'");
}

}  // namespace

ojson scenario_to_json(const ScenarioConfig& cfg) {
  ojson j;
  j["seed"] = cfg.seed;
  j["mode"] = cfg.mode == RunMode::deterministic ? "deterministic" : "free";
  ojson tables = ojson::array();
  for (const TableSpec& t : cfg.tables) {
    ojson tj;
    tj["name"] = t.name;
    tj["pk_arity"] = t.pk_arity;
    tj["value_columns"] = t.value_columns;
    tj["initial_rows"] = t.initial_rows;
    tables.push_back(tj);
  }
  j["tables"] = tables;
  j["writers"] = cfg.writers;
  j["writer_ops"] = cfg.writer_ops;
  j["mix"] = {{"create", cfg.mix.create_w},
              {"update", cfg.mix.update_w},
              {"delete", cfg.mix.delete_w}};
  if (cfg.dump) {
    ojson d;
    d["at_step"] = cfg.dump->at_step;
    d["scope"] = std::string(to_string(cfg.dump->scope));
    d["table"] = cfg.dump->table;
    ojson keys = ojson::array();
    for (const auto& k : cfg.dump->keys) keys.push_back(key_to_json(k));
    d["keys"] = keys;
    d["chunk_size"] = cfg.dump->chunk_size;
    d["throttle"] = cfg.dump->throttle;
    j["dump"] = d;
  }
  if (cfg.pause_plan) {
    j["pause"] = {{"pause_at_step", cfg.pause_plan->pause_at_step},
                  {"resume_at_step", cfg.pause_plan->resume_at_step}};
  }
  if (cfg.crash) {
    const char* kind = cfg.crash->kind == CrashKind::mid_window ? "mid"
                       : cfg.crash->kind == CrashKind::before_checkpoint
                           ? "pre"
                           : "post";
    j["crash"] = {{"boundary", cfg.crash->boundary}, {"kind", kind}};
  }
  if (cfg.ha) {
    j["ha"] = {{"kill_at_step", cfg.ha->kill_at_step},
               {"lease_duration", cfg.ha->lease_duration}};
  }
  j["read_lag"] = cfg.read_lag;
  j["sink_fail_every"] = cfg.sink_fail_every;
  j["buffer_capacity"] = cfg.buffer_capacity;
  j["logpos_interval"] = cfg.logpos_interval;
  if (!cfg.out_path.empty()) j["out"] = cfg.out_path;
  if (!cfg.state_dir.empty()) j["state_dir"] = cfg.state_dir;
  if (!cfg.workload_out.empty()) j["workload_out"] = cfg.workload_out;
  if (!cfg.report_path.empty()) j["report"] = cfg.report_path;
  if (!cfg.control_dir.empty()) j["control_dir"] = cfg.control_dir;
  j["linger_ms"] = cfg.linger_ms;
  return j;
}

ScenarioConfig scenario_from_json(const ojson& j) {
  ScenarioConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("mode")) cfg.mode = mode_from_string(j.at("mode"));
  if (j.contains("tables")) {
    for (const auto& tj : j.at("tables")) {
      TableSpec t;
      t.name = tj.at("name").get<std::string>();
      t.pk_arity = tj.value("pk_arity", t.pk_arity);
      t.value_columns = tj.value("value_columns", t.value_columns);
      t.initial_rows = tj.value("initial_rows", t.initial_rows);
      cfg.tables.push_back(std::move(t));
    }
  }
  cfg.writers = j.value("writers", cfg.writers);
  cfg.writer_ops = j.value("writer_ops", cfg.writer_ops);
  if (j.contains("mix")) {
    cfg.mix.create_w = j.at("mix").value("create", cfg.mix.create_w);
    cfg.mix.update_w = j.at("mix").value("update", cfg.mix.update_w);
    cfg.mix.delete_w = j.at("mix").value("delete", cfg.mix.delete_w);
  }
  if (j.contains("dump")) {
    const auto& d = j.at("dump");
    DumpPlan plan;
    plan.at_step = d.value("at_step", plan.at_step);
    plan.scope = scope_from_name(d.value("scope", std::string("all")));
    plan.table = d.value("table", std::string{});
    if (d.contains("keys")) {
      for (const auto& k : d.at("keys")) {
        plan.keys.push_back(key_from_json(k, "dump.keys"));
      }
    }
    plan.chunk_size = d.value("chunk_size", plan.chunk_size);
    plan.throttle = d.value("throttle", plan.throttle);
    cfg.dump = plan;
  }
  if (j.contains("pause")) {
    PausePlan p;
    p.pause_at_step = j.at("pause").value("pause_at_step", std::uint64_t{0});
    p.resume_at_step = j.at("pause").value("resume_at_step", std::uint64_t{0});
    cfg.pause_plan = p;
  }
  if (j.contains("crash")) {
    CrashPlan c;
    c.boundary = j.at("crash").value("boundary", c.boundary);
    std::string kind = j.at("crash").value("kind", std::string("post"));
    if (kind == "pre") {
      c.kind = CrashKind::before_checkpoint;
    } else if (kind == "mid") {
      c.kind = CrashKind::mid_window;
    } else if (kind == "post") {
      c.kind = CrashKind::after_checkpoint;
    } else {
      throw ConfigError("unknown crash kind '" + kind + "'");
    }
    cfg.crash = c;
  }
  if (j.contains("ha")) {
    HaPlan h;
    h.kill_at_step = j.at("ha").value("kill_at_step", h.kill_at_step);
    h.lease_duration = j.at("ha").value("lease_duration", h.lease_duration);
    cfg.ha = h;
  }
  cfg.read_lag = j.value("read_lag", cfg.read_lag);
  cfg.sink_fail_every = j.value("sink_fail_every", cfg.sink_fail_every);
  cfg.buffer_capacity = j.value("buffer_capacity", cfg.buffer_capacity);
  cfg.logpos_interval = j.value("logpos_interval", cfg.logpos_interval);
  cfg.out_path = j.value("out", cfg.out_path);
  cfg.state_dir = j.value("state_dir", cfg.state_dir);
  cfg.workload_out = j.value("workload_out", cfg.workload_out);
  cfg.report_path = j.value("report", cfg.report_path);
  cfg.control_dir = j.value("control_dir", cfg.control_dir);
  cfg.linger_ms = j.value("linger_ms", cfg.linger_ms);
  return cfg;
}

ScenarioConfig load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
  ojson j = ojson::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw ConfigError("scenario file '" + path.string() + "' is not valid JSON");
  }
  return scenario_from_json(j);
}

ojson RunReport::to_json() const {
  ojson j;
  j["scheduler_steps"] = scheduler_steps;
  j["events_delivered"] = events_delivered;
  j["log_events"] = log_events;
  j["dump_rows"] = dump_rows;
  j["windows"] = windows;
  j["epochs"] = epochs;
  j["final_epoch"] = final_epoch;
  j["pause_episodes"] = pause_episodes.size();
  ojson v = ojson::array();
  for (const Violation& violation : violations) {
    v.push_back({{"invariant", violation.invariant},
                 {"evidence", violation.evidence}});
  }
  j["violations"] = v;
  j["notes"] = notes;
  j["diff"] = diff;
  j["passed"] = passed();
  return j;
}

std::string RunReport::summary() const {
  std::ostringstream ss;
  ss << "delivered " << events_delivered << " events (" << log_events
     << " log, " << dump_rows << " dump) over " << windows << " windows, "
     << epochs << " epoch(s), " << pause_episodes.size()
     << " pause episode(s)\n";
  for (const std::string& n : notes) ss << "note: " << n << '\n';
  if (violations.empty()) {
    ss << "all invariants hold\n";
  } else {
    for (const Violation& v : violations) {
      ss << "VIOLATION [" << v.invariant << "] " << v.evidence << '\n';
    }
    if (!diff.empty()) ss << diff;
  }
  return ss.str();
}

namespace {

void validate_config(const ScenarioConfig& cfg) {
  if (cfg.tables.empty()) throw ConfigError("scenario needs at least one table");
  if (cfg.writers < 1) throw ConfigError("scenario needs at least one writer");
  if (cfg.buffer_capacity < 1) throw ConfigError("buffer capacity must be >= 1");
  if (cfg.dump && cfg.dump->chunk_size < 1) {
    throw ConfigError("chunk_size must be >= 1");
  }
  if (cfg.dump && cfg.dump->scope != DumpScope::all_tables &&
      cfg.dump->table.empty()) {
    throw ConfigError("dump scope needs a table name");
  }
  if (cfg.pause_plan && !cfg.dump) {
    throw ConfigError("pause plan without a dump plan");
  }
  if (cfg.pause_plan &&
      cfg.pause_plan->resume_at_step <= cfg.pause_plan->pause_at_step) {
    throw ConfigError("resume must come after pause");
  }
  if ((cfg.crash || cfg.ha) && cfg.mode != RunMode::deterministic) {
    throw ConfigError("crash and failover plans need deterministic mode");
  }
  if (cfg.crash && cfg.ha) {
    throw ConfigError("crash and failover plans are mutually exclusive");
  }
  if ((cfg.crash || cfg.ha) && !cfg.dump) {
    throw ConfigError("crash and failover plans need a dump plan");
  }
  if (!cfg.control_dir.empty() && cfg.mode != RunMode::free_running) {
    throw ConfigError("the control channel needs free-running mode");
  }
}

struct Instance {
  std::string id;
  std::uint64_t epoch{};
  std::unique_ptr<OutputBuffer> buffer;
  std::unique_ptr<WatermarkEngine> engine;
  std::unique_ptr<Delivery> delivery;
  std::unique_ptr<DumpCoordinator> coordinator;
};

struct Accumulators {
  std::vector<PauseEpisode> episodes;
  std::vector<WindowTrace> traces;
  std::vector<ChunkJournalEntry> chunks;

  void merge(const Instance& inst) {
    const auto& ep = inst.engine->pause_episodes();
    episodes.insert(episodes.end(), ep.begin(), ep.end());
    const auto& tr = inst.engine->window_traces();
    traces.insert(traces.end(), tr.begin(), tr.end());
    const auto& ch = inst.coordinator->chunk_journal();
    chunks.insert(chunks.end(), ch.begin(), ch.end());
  }
};

std::unique_ptr<Instance> build_instance(
    const ScenarioConfig& cfg, SimDatabase& db, CoordinationBackend& backend,
    Sink& sink, UuidGenerator& uuids, const std::string& id, std::uint64_t now,
    std::uint64_t lease_duration, Lsn capture_start, bool recover) {
  Role role = backend.acquire_leadership(id, lease_duration, now);
  if (!role.active) return nullptr;

  Lsn from = capture_start;
  if (auto raw = backend.get_state("logpos", ReadMode::linearizable)) {
    from = ojson::parse(*raw).at("lsn").get<Lsn>();
  } else {
    ojson j;
    j["lsn"] = capture_start;
    backend.put_state("logpos", j.dump(), role.epoch);
  }

  auto inst = std::make_unique<Instance>();
  inst->id = id;
  inst->epoch = role.epoch;
  sink.begin_epoch();
  inst->buffer = std::make_unique<OutputBuffer>(cfg.buffer_capacity);

  EngineConfig ecfg;
  ecfg.read_lag_adversary = cfg.read_lag;
  ecfg.adversary_seed = cfg.seed ^ (0xadd5eed0ULL * (role.epoch + 1));
  ecfg.blocking_appends = cfg.mode == RunMode::free_running;
  inst->engine =
      std::make_unique<WatermarkEngine>(db, *inst->buffer, uuids, ecfg, from);

  DeliveryPolicy policy;
  inst->delivery = std::make_unique<Delivery>(*inst->buffer, sink, policy);

  DumpCoordinator::Options opts;
  opts.logpos_interval = cfg.logpos_interval;
  opts.lease_duration = lease_duration == kNoExpiry ? 0 : lease_duration;
  opts.instance_id = id;
  inst->coordinator = std::make_unique<DumpCoordinator>(
      *inst->engine, db, backend, *inst->delivery, role.epoch, uuids, opts);
  if (recover) inst->coordinator->recover();
  return inst;
}

DumpRequest request_from_plan(const DumpPlan& plan) {
  DumpRequest req;
  req.scope = plan.scope;
  req.table = plan.table;
  req.keys = plan.keys;
  req.chunk_size = plan.chunk_size;
  req.throttle = plan.throttle;
  return req;
}

struct RunnerState {
  SimDatabase db;
  std::unique_ptr<CoordinationBackend> backend;
  std::unique_ptr<Sink> base_sink;
  std::unique_ptr<FaultInjectionSink> flaky;
  Sink* sink = nullptr;
  Workload workload;
  std::vector<WorkloadOp> journal;
  Lsn capture_start = 0;
  Accumulators accum;
  std::optional<Uuid> dump_id;
  std::optional<DumpStatusSnapshot> final_dump_status;
  std::uint64_t final_epoch = 1;
  std::uint64_t scheduler_steps = 0;
  std::vector<std::string> notes;
  std::vector<Violation> runtime_violations;
};

void assemble(const ScenarioConfig& cfg, RunnerState& rs) {
  create_tables(rs.db, cfg.tables);
  rs.workload = generate_workload(cfg.tables, cfg.writers, cfg.writer_ops,
                                  cfg.mix, cfg.seed);
  for (const WorkloadOp& op : rs.workload.initial) {
    apply_op(rs.db, op);
    rs.journal.push_back(op);
  }
  rs.capture_start = rs.db.head_lsn();

  if (cfg.state_dir.empty()) {
    rs.backend = std::make_unique<InProcessCoordination>();
  } else {
    rs.backend = std::make_unique<FileCoordination>(cfg.state_dir);
  }
  if (cfg.out_path.empty()) {
    rs.base_sink = std::make_unique<MemorySink>();
  } else {
    rs.base_sink = std::make_unique<FileSink>(cfg.out_path);
  }
  rs.sink = rs.base_sink.get();
  if (cfg.sink_fail_every > 0) {
    rs.flaky = std::make_unique<FaultInjectionSink>(*rs.base_sink,
                                                    cfg.sink_fail_every);
    rs.sink = rs.flaky.get();
  }
}

// ---------------------------------------------------------------------------
// Deterministic runner: a seeded scheduler owns every actor and steps one
// bounded action at a time, so a (seed, config) pair replays identically.

void run_deterministic(const ScenarioConfig& cfg, RunnerState& rs) {
  UuidGenerator uuids(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 sched_rng(cfg.seed);

  std::uint64_t lease_duration = cfg.ha ? cfg.ha->lease_duration : kNoExpiry;
  auto inst = build_instance(cfg, rs.db, *rs.backend, *rs.sink, uuids, "A",
                             /*now=*/0, lease_duration, rs.capture_start,
                             /*recover=*/false);
  if (!inst) throw DblogError("initial instance failed to acquire leadership");

  std::vector<std::size_t> writer_pos(cfg.writers, 0);
  bool dump_sent = !cfg.dump.has_value();
  bool pause_sent = !cfg.pause_plan.has_value();
  bool resume_sent = !cfg.pause_plan.has_value();
  bool ha_killed = !cfg.ha.has_value();
  bool crash_done = !cfg.crash.has_value();
  int restarts = 0;

  std::uint64_t& steps = rs.scheduler_steps;
  std::uint64_t stall = 0;

  auto writers_done = [&] {
    for (std::size_t w = 0; w < cfg.writers; ++w) {
      if (writer_pos[w] < rs.workload.writer_ops[w].size()) return false;
    }
    return true;
  };

  auto plans_done = [&] {
    return dump_sent && pause_sent && resume_sent && ha_killed && crash_done;
  };

  auto quiescent = [&] {
    return plans_done() && inst && writers_done() &&
           inst->coordinator->idle() && !inst->engine->window_in_flight() &&
           inst->engine->caught_up() && inst->buffer->empty() &&
           inst->delivery->delivered_seq() == inst->buffer->last_assigned_seq();
  };

  auto diagnose = [&] {
    std::ostringstream ss;
    ss << "stuck after " << steps << " steps:";
    if (!writers_done()) ss << " writers-pending";
    if (!plans_done()) ss << " plans-pending";
    if (!inst) {
      ss << " no-active-instance";
    } else {
      if (inst->engine->window_in_flight()) ss << " window-open";
      if (!inst->engine->caught_up()) ss << " tail-behind";
      if (!inst->buffer->empty())
        ss << " buffer=" << inst->buffer->size();
      if (!inst->coordinator->idle()) ss << " dump-active";
      if (inst->coordinator->halted()) ss << " dump-halted";
      if (inst->delivery->permanently_failed()) ss << " delivery-failed";
    }
    return ss.str();
  };

  const std::size_t actor_count = cfg.writers + 3;
  std::uniform_int_distribution<std::size_t> pick_actor(0, actor_count - 1);

  while (true) {
    ++steps;

    if (!dump_sent && steps >= cfg.dump->at_step && inst) {
      try {
        rs.dump_id = inst->coordinator->request_dump(request_from_plan(*cfg.dump));
      } catch (const DblogError& e) {
        rs.runtime_violations.push_back({"control", e.what()});
      }
      dump_sent = true;
    }
    if (!pause_sent && dump_sent && steps >= cfg.pause_plan->pause_at_step &&
        inst && rs.dump_id) {
      try {
        inst->coordinator->pause_dump(*rs.dump_id);
      } catch (const ContractViolation& e) {
        rs.notes.push_back(std::string("pause skipped: ") + e.what());
      }
      pause_sent = true;
    }
    if (!resume_sent && pause_sent && steps >= cfg.pause_plan->resume_at_step &&
        inst && rs.dump_id) {
      try {
        inst->coordinator->resume_dump(*rs.dump_id);
      } catch (const ContractViolation& e) {
        rs.notes.push_back(std::string("resume skipped: ") + e.what());
      }
      resume_sent = true;
    }
    if (!ha_killed && steps >= cfg.ha->kill_at_step && inst) {
      // Process loss: no release, the lease must expire on its own.
      rs.accum.merge(*inst);
      inst.reset();
      ha_killed = true;
    }

    if (inst && inst->delivery->permanently_failed()) {
      rs.runtime_violations.push_back(
          {"delivery", "sink permanently failed: " +
                           inst->delivery->failure_reason()});
      break;
    }
    if (quiescent()) break;

    std::size_t idx = pick_actor(sched_rng);
    bool progressed = false;
    if (idx < cfg.writers) {
      std::size_t w = idx;
      if (writer_pos[w] < rs.workload.writer_ops[w].size()) {
        const WorkloadOp& op = rs.workload.writer_ops[w][writer_pos[w]];
        apply_op(rs.db, op);
        rs.journal.push_back(op);
        ++writer_pos[w];
        progressed = true;
      }
    } else if (idx == cfg.writers) {
      progressed = inst ? inst->engine->step() : false;
    } else if (idx == cfg.writers + 1) {
      progressed = inst ? inst->delivery->step() : false;
    } else {
      if (inst) {
        progressed = inst->coordinator->step(steps);
        if (!crash_done) {
          bool hit = false;
          switch (cfg.crash->kind) {
            case CrashKind::after_checkpoint:
              hit = inst->coordinator->chunks_checkpointed() >=
                    cfg.crash->boundary;
              break;
            case CrashKind::before_checkpoint:
              hit = inst->coordinator->chunks_completed() >=
                        cfg.crash->boundary &&
                    inst->coordinator->chunks_checkpointed() <
                        cfg.crash->boundary;
              break;
            case CrashKind::mid_window:
              hit = inst->engine->window_in_flight() &&
                    inst->coordinator->chunks_completed() + 1 >=
                        cfg.crash->boundary;
              break;
          }
          if (hit) {
            rs.accum.merge(*inst);
            rs.backend->release_leadership(inst->id, inst->epoch, steps);
            inst.reset();
            inst = build_instance(cfg, rs.db, *rs.backend, *rs.sink, uuids,
                                  "A-r" + std::to_string(++restarts), steps,
                                  lease_duration, rs.capture_start,
                                  /*recover=*/true);
            if (!inst) throw DblogError("restart failed to acquire leadership");
            crash_done = true;
            progressed = true;
          }
        }
      } else {
        // Standby: keep trying to take over.
        inst = build_instance(cfg, rs.db, *rs.backend, *rs.sink, uuids, "B",
                              steps, lease_duration, rs.capture_start,
                              /*recover=*/true);
        progressed = inst != nullptr;
      }
    }

    stall = progressed ? 0 : stall + 1;
    if (stall > cfg.deadlock_limit) {
      rs.runtime_violations.push_back({"progress", diagnose()});
      break;
    }
  }

  if (inst) {
    rs.accum.merge(*inst);
    rs.final_epoch = inst->epoch;
    if (rs.dump_id) {
      try {
        rs.final_dump_status = inst->coordinator->dump_status(*rs.dump_id);
      } catch (const DblogError&) {
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Free-running runner: real threads, same invariants.

void run_free(const ScenarioConfig& cfg, RunnerState& rs) {
  UuidGenerator uuids(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  auto inst = build_instance(cfg, rs.db, *rs.backend, *rs.sink, uuids, "A",
                             /*now=*/0, kNoExpiry, rs.capture_start,
                             /*recover=*/false);
  if (!inst) throw DblogError("initial instance failed to acquire leadership");

  std::mutex journal_mu;
  std::atomic<std::uint64_t> committed_ops{0};
  std::atomic<bool> stop_engine{false};

  std::vector<std::thread> writers;
  for (std::size_t w = 0; w < cfg.writers; ++w) {
    writers.emplace_back([&, w] {
      for (const WorkloadOp& op : rs.workload.writer_ops[w]) {
        apply_op(rs.db, op);
        {
          std::lock_guard lock(journal_mu);
          rs.journal.push_back(op);
        }
        committed_ops.fetch_add(1);
        if ((committed_ops.load() & 63) == 0) std::this_thread::yield();
      }
    });
  }

  auto start = std::chrono::steady_clock::now();
  auto now_ms = [&] {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start)
            .count());
  };

  std::thread engine_thread([&] {
    while (!stop_engine.load()) {
      inst->coordinator->step(now_ms());
      bool progressed = inst->engine->step();
      if (!progressed) std::this_thread::sleep_for(std::chrono::microseconds(100));
    }
  });
  std::thread delivery_thread([&] { inst->delivery->run(); });

  std::optional<ControlServer> control;
  if (!cfg.control_dir.empty()) control.emplace(cfg.control_dir);

  bool dump_sent = !cfg.dump.has_value();
  bool pause_sent = !cfg.pause_plan.has_value();
  bool resume_sent = !cfg.pause_plan.has_value();
  bool writers_joined = false;
  bool shutdown_requested = false;
  auto last_command = std::chrono::steady_clock::now();

  auto handle_control = [&] {
    if (!control) return;
    for (const ControlRequest& req : control->poll()) {
      last_command = std::chrono::steady_clock::now();
      ojson rsp;
      try {
        std::string cmd = req.payload.value("cmd", std::string{});
        if (cmd == "ping") {
          rsp["ok"] = true;
        } else if (cmd == "dump") {
          DumpRequest dreq;
          dreq.scope = scope_from_name(req.payload.value("scope", std::string("all")));
          dreq.table = req.payload.value("table", std::string{});
          if (req.payload.contains("keys")) {
            for (const auto& k : req.payload.at("keys")) {
              dreq.keys.push_back(key_from_json(k, "keys"));
            }
          }
          dreq.chunk_size = req.payload.value("chunk_size", std::size_t{1000});
          dreq.throttle = req.payload.value("throttle", std::uint64_t{0});
          Uuid id = inst->coordinator->request_dump(dreq);
          rs.dump_id = id;
          rsp["ok"] = true;
          rsp["dump_id"] = id.to_string();
        } else if (cmd == "pause" || cmd == "resume" || cmd == "status") {
          std::optional<Uuid> id;
          if (req.payload.contains("dump_id")) {
            id = Uuid::parse(req.payload.at("dump_id").get<std::string>());
            if (!id) throw ConfigError("bad dump_id");
          } else {
            id = inst->coordinator->latest_dump_id();
            if (!id) throw ConfigError("no dump has been requested");
          }
          if (cmd == "pause") {
            inst->coordinator->pause_dump(*id);
            rsp["ok"] = true;
          } else if (cmd == "resume") {
            inst->coordinator->resume_dump(*id);
            rsp["ok"] = true;
          } else {
            DumpStatusSnapshot snap = inst->coordinator->dump_status(*id);
            rsp["ok"] = true;
            rsp["dump_id"] = snap.dump_id.to_string();
            rsp["paused"] = snap.paused;
            rsp["pause_requested"] = snap.pause_requested;
            rsp["complete"] = snap.complete;
            ojson tables = ojson::array();
            for (const DumpCheckpoint& cp : snap.tables) {
              ojson tj;
              tj["table"] = cp.table;
              tj["status"] = std::string(to_string(cp.status));
              tj["last_key"] =
                  cp.last_key ? key_to_json(*cp.last_key) : ojson(nullptr);
              tables.push_back(tj);
            }
            rsp["tables"] = tables;
          }
        } else if (cmd == "shutdown") {
          shutdown_requested = true;
          rsp["ok"] = true;
        } else {
          throw ConfigError("unknown command '" + cmd + "'");
        }
      } catch (const std::exception& e) {
        rsp = ojson{{"ok", false}, {"error", e.what()}};
      }
      control->respond(req.id, rsp);
    }
  };

  auto quiescent = [&] {
    return writers_joined && dump_sent && pause_sent && resume_sent &&
           inst->coordinator->idle() && !inst->engine->window_in_flight() &&
           inst->engine->caught_up() && inst->buffer->empty() &&
           inst->delivery->delivered_seq() == inst->buffer->last_assigned_seq();
  };

  while (true) {
    if (!writers_joined) {
      bool all_done = committed_ops.load() >=
                      cfg.writer_ops;  // every generated op committed
      if (all_done) {
        for (auto& t : writers) t.join();
        writers.clear();
        writers_joined = true;
      }
    }
    if (!dump_sent && committed_ops.load() >= cfg.dump->at_step) {
      try {
        rs.dump_id = inst->coordinator->request_dump(request_from_plan(*cfg.dump));
      } catch (const DblogError& e) {
        rs.runtime_violations.push_back({"control", e.what()});
      }
      dump_sent = true;
    }
    if (!pause_sent && dump_sent && rs.dump_id &&
        committed_ops.load() >= cfg.pause_plan->pause_at_step) {
      try {
        inst->coordinator->pause_dump(*rs.dump_id);
      } catch (const ContractViolation& e) {
        rs.notes.push_back(std::string("pause skipped: ") + e.what());
      }
      pause_sent = true;
    }
    if (!resume_sent && pause_sent && rs.dump_id &&
        committed_ops.load() >= cfg.pause_plan->resume_at_step) {
      try {
        inst->coordinator->resume_dump(*rs.dump_id);
      } catch (const ContractViolation& e) {
        rs.notes.push_back(std::string("resume skipped: ") + e.what());
      }
      resume_sent = true;
    }

    handle_control();

    if (inst->delivery->permanently_failed()) {
      rs.runtime_violations.push_back(
          {"delivery",
           "sink permanently failed: " + inst->delivery->failure_reason()});
      break;
    }

    if (quiescent()) {
      if (shutdown_requested || !control) break;
      auto idle = std::chrono::steady_clock::now() - last_command;
      if (idle > std::chrono::milliseconds(cfg.linger_ms)) break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }

  for (auto& t : writers) t.join();
  stop_engine.store(true);
  engine_thread.join();
  inst->buffer->close();
  delivery_thread.join();

  rs.scheduler_steps = inst->engine->ops_executed();
  rs.accum.merge(*inst);
  rs.final_epoch = inst->epoch;
  if (rs.dump_id) {
    try {
      rs.final_dump_status = inst->coordinator->dump_status(*rs.dump_id);
    } catch (const DblogError&) {
    }
  }
}

}  // namespace

RunArtifacts run_scenario_full(const ScenarioConfig& cfg) {
  validate_config(cfg);

  RunnerState rs;
  assemble(cfg, rs);

  if (cfg.mode == RunMode::deterministic) {
    run_deterministic(cfg, rs);
  } else {
    run_free(cfg, rs);
  }

  RunArtifacts art;
  art.journal = std::move(rs.journal);
  art.traces = std::move(rs.accum.traces);
  art.chunk_journal = std::move(rs.accum.chunks);
  art.lease_journal = rs.backend->lease_journal();
  art.committed = rs.db.log_snapshot();
  art.oracle = oracle_final_state(art.journal);
  art.capture_start = rs.capture_start;

  if (cfg.out_path.empty()) {
    art.events = static_cast<MemorySink*>(rs.base_sink.get())->events();
  } else {
    art.events = read_events_file(cfg.out_path);
  }

  RunReport& report = art.report;
  report.scheduler_steps = rs.scheduler_steps;
  report.pause_episodes = rs.accum.episodes;
  report.windows = art.traces.size();
  report.final_epoch = rs.final_epoch;
  report.events_delivered = art.events.size();
  for (const OutputEvent& e : art.events) {
    if (e.origin == Origin::log) {
      ++report.log_events;
    } else {
      ++report.dump_rows;
    }
  }
  report.epochs = split_epochs(art.events).size();
  report.notes = rs.notes;
  report.violations = rs.runtime_violations;

  // The simulator's live state and the journal oracle are two independent
  // replays of the same committed history; they must agree exactly.
  {
    StateMap source_state;
    for (const std::string& table : rs.db.table_names()) {
      for (auto& [key, value] : rs.db.current_state(table)) {
        source_state.emplace(TableKey{table, key}, value);
      }
    }
    if (source_state != art.oracle) {
      report.violations.push_back(
          {"source-oracle", "simulator state diverged from journal replay"});
    }
  }

  bool redelivery = cfg.crash.has_value() || cfg.ha.has_value();

  CompletenessSpec cspec;
  cspec.committed = &art.committed;
  cspec.capture_start = art.capture_start;
  cspec.oracle = &art.oracle;
  cspec.at_least_once = redelivery;
  bool dump_requested = cfg.dump.has_value();
  bool dump_complete =
      rs.final_dump_status.has_value() && rs.final_dump_status->complete;
  cspec.expect_exact_state = !dump_requested || dump_complete;
  if (dump_complete) {
    if (cfg.dump->scope == DumpScope::keys) {
      for (const PrimaryKey& k : cfg.dump->keys) {
        cspec.dumped_keys.emplace_back(cfg.dump->table, k);
      }
    } else {
      for (const DumpCheckpoint& cp : rs.final_dump_status->tables) {
        if (cp.status == DumpStatus::complete) {
          cspec.fully_dumped_tables.insert(cp.table);
        }
      }
    }
  }
  if (dump_requested && !dump_complete) {
    report.notes.push_back("dump did not complete; state check relaxed");
  }

  auto add = [&](std::vector<Violation> v) {
    report.violations.insert(report.violations.end(),
                             std::make_move_iterator(v.begin()),
                             std::make_move_iterator(v.end()));
  };
  add(check_no_time_travel(art.events, redelivery));
  add(check_completeness(art.events, cspec, &report.diff));
  add(check_window_dedup(art.traces));
  add(check_non_stall(report.pause_episodes));
  add(check_no_locks(rs.db.lock_journal()));
  add(check_chunk_progression(art.chunk_journal));
  if (redelivery) add(check_redelivery_bounds(art.traces));
  add(check_lease_exclusivity(art.lease_journal));

  if (!cfg.workload_out.empty()) {
    write_workload_file(cfg.workload_out, art.journal);
  }
  if (!cfg.report_path.empty()) {
    std::ofstream out(cfg.report_path, std::ios::trunc);
    out << report.to_json().dump(2) << '\n';
  }
  return art;
}

RunReport run_scenario(const ScenarioConfig& cfg) {
  return run_scenario_full(cfg).report;
}

}  // namespace dblog
