#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dblog/checks.hpp"
#include "dblog/codec.hpp"
#include "dblog/coordination.hpp"
#include "dblog/dump_coordinator.hpp"
#include "dblog/workload.hpp"

namespace dblog {

enum class RunMode { deterministic, free_running };

struct DumpPlan {
  std::uint64_t at_step = 0;  // scheduler step (deterministic) or committed ops
  DumpScope scope = DumpScope::all_tables;
  std::string table;
  std::vector<PrimaryKey> keys;
  std::size_t chunk_size = 100;
  std::uint64_t throttle = 0;
};

struct PausePlan {
  std::uint64_t pause_at_step = 0;
  std::uint64_t resume_at_step = 0;
};

enum class CrashKind {
  before_checkpoint,  // chunk closed, checkpoint not yet persisted
  after_checkpoint,   // checkpoint persisted
  mid_window,         // window still open; its watermarks become orphans
};

// Kill the engine around the given chunk boundary, then restart it from the
// persisted checkpoints and log position.
struct CrashPlan {
  std::size_t boundary = 1;  // 1-based completed-chunk index
  CrashKind kind = CrashKind::after_checkpoint;
};

// Kill the active instance outright at a step; a standby takes over once
// the lease expires.
struct HaPlan {
  std::uint64_t kill_at_step = 0;
  std::uint64_t lease_duration = 2000;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  RunMode mode = RunMode::deterministic;
  std::vector<TableSpec> tables;
  std::size_t writers = 2;
  std::size_t writer_ops = 0;
  OpMix mix{};
  std::optional<DumpPlan> dump;
  std::optional<PausePlan> pause_plan;
  std::optional<CrashPlan> crash;
  std::optional<HaPlan> ha;
  bool read_lag = false;
  int sink_fail_every = 0;
  std::size_t buffer_capacity = 65536;
  std::uint64_t logpos_interval = 100;
  std::uint64_t deadlock_limit = 2'000'000;
  std::string out_path;
  std::string state_dir;
  std::string workload_out;
  std::string report_path;
  std::string control_dir;
  std::uint64_t linger_ms = 0;
};

ScenarioConfig scenario_from_json(const ojson& j);
ojson scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig load_scenario_file(const std::filesystem::path& path);

struct RunReport {
  std::uint64_t scheduler_steps{};
  std::uint64_t events_delivered{};
  std::uint64_t log_events{};
  std::uint64_t dump_rows{};
  std::uint64_t windows{};
  std::uint64_t epochs{1};
  std::uint64_t final_epoch{1};
  std::vector<PauseEpisode> pause_episodes;
  std::vector<Violation> violations;
  std::vector<std::string> notes;
  std::string diff;

  bool passed() const { return violations.empty(); }
  ojson to_json() const;
  std::string summary() const;
};

struct RunArtifacts {
  RunReport report;
  std::vector<OutputEvent> events;
  std::vector<WorkloadOp> journal;
  std::vector<WindowTrace> traces;
  std::vector<ChunkJournalEntry> chunk_journal;
  std::vector<LeaseJournalEntry> lease_journal;
  std::vector<LogEvent> committed;
  StateMap oracle;
  Lsn capture_start = 0;
};

// Drives the full stack to quiescence under the configured mode and runs
// every checker; the report lists violations with evidence.
RunArtifacts run_scenario_full(const ScenarioConfig& cfg);
RunReport run_scenario(const ScenarioConfig& cfg);

}  // namespace dblog
