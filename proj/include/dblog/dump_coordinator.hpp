#pragma once

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dblog/capture.hpp"
#include "dblog/coordination.hpp"
#include "dblog/source_db.hpp"
#include "dblog/types.hpp"
#include "dblog/watermark_engine.hpp"

namespace dblog {

enum class DumpScope { all_tables, table, keys };

std::string_view to_string(DumpScope s);

enum class DumpStatus { pending, running, paused, complete };

std::string_view to_string(DumpStatus s);

struct DumpRequest {
  Uuid dump_id{};  // assigned at request time when nil
  DumpScope scope{DumpScope::all_tables};
  std::string table;             // table/keys scope
  std::vector<PrimaryKey> keys;  // keys scope
  std::size_t chunk_size = 1000;
  // Minimum engine steps of pure log processing between consecutive windows.
  std::uint64_t throttle = 0;
};

struct DumpCheckpoint {
  Uuid dump_id{};
  std::string table;
  std::optional<PrimaryKey> last_key;  // none iff no chunk completed yet
  DumpStatus status{DumpStatus::pending};
};

struct DumpStatusSnapshot {
  Uuid dump_id{};
  bool pause_requested{};
  bool paused{};
  bool complete{};
  std::vector<DumpCheckpoint> tables;
};

// One entry per chunk the engine ran; the harness checks range progression
// and re-selection rules from this.
struct ChunkJournalEntry {
  std::string table;
  std::optional<PrimaryKey> after;
  std::optional<PrimaryKey> last_key;
  bool exhausted{};
  bool checkpointed{};
  std::size_t rows_emitted{};
};

// Schedules chunks on the engine, persists per-table progress so dumps
// resume from the last completed chunk, and applies control commands at
// chunk boundaries. A chunk's checkpoint is persisted only after the sink
// acknowledged every row of that chunk, so a checkpointed chunk can never
// lose rows to a crash.
class DumpCoordinator {
 public:
  struct Options {
    std::uint64_t logpos_interval = 100;  // persist logpos every N deliveries
    std::uint64_t lease_duration = 0;     // 0 = no lease maintenance
    std::string instance_id;
  };

  DumpCoordinator(WatermarkEngine& engine, SimDatabase& db,
                  CoordinationBackend& backend, Delivery& delivery,
                  std::uint64_t epoch, UuidGenerator& uuids, Options options);

  // Control API; safe to call from any context. Validation is synchronous,
  // effects apply at the next chunk boundary.
  Uuid request_dump(DumpRequest request);
  void pause_dump(const Uuid& dump_id);
  void resume_dump(const Uuid& dump_id);
  DumpStatusSnapshot dump_status(const Uuid& dump_id) const;
  std::optional<Uuid> latest_dump_id() const;

  // Reloads persisted dumps and checkpoints after a restart or takeover.
  void recover();

  // One control step: applies commands, persists progress, schedules the
  // next chunk when the throttle allows. Returns whether anything happened.
  bool step(std::uint64_t now);

  bool idle() const;        // no incomplete dump and nothing in flight
  bool halted() const { return halted_; }
  bool demoted() const { return demoted_; }
  std::size_t chunks_completed() const;
  std::size_t chunks_checkpointed() const;
  const std::vector<ChunkJournalEntry>& chunk_journal() const {
    return journal_;
  }

 private:
  struct ActiveDump {
    DumpRequest request;
    std::vector<std::string> tables;  // lexicographic processing order
    std::map<std::string, DumpCheckpoint> checkpoints;
    std::size_t current_table = 0;
    bool pause_requested = false;
    bool paused = false;
    bool complete = false;
  };

  enum class Wait { none, window, durability };

  struct Command {
    enum class Kind { pause, resume } kind;
    Uuid dump_id;
  };

  void persist_meta(const ActiveDump& dump);
  void persist_checkpoint(const DumpCheckpoint& cp);
  void persist_logpos_if_due();
  void renew_lease_if_due(std::uint64_t now);
  bool apply_commands();
  bool advance_dump();
  bool handle_outcome(const ChunkOutcome& outcome);
  std::optional<ChunkRequest> next_chunk_request(ActiveDump& dump);
  std::string checkpoint_path(const Uuid& dump_id, const std::string& table) const;

  WatermarkEngine& engine_;
  SimDatabase& db_;
  CoordinationBackend& backend_;
  Delivery& delivery_;
  std::uint64_t epoch_;
  UuidGenerator& uuids_;
  Options options_;

  mutable std::mutex mu_;
  std::deque<Command> mailbox_;
  std::map<Uuid, ActiveDump> dumps_;
  std::optional<Uuid> active_dump_;  // the one incomplete dump, if any
  std::vector<Uuid> request_order_;

  Wait wait_ = Wait::none;
  std::optional<ChunkOutcome> awaiting_outcome_;
  std::vector<ChunkJournalEntry> journal_;

  std::uint64_t last_logpos_persist_count_ = 0;
  std::uint64_t last_renew_ = 0;
  bool halted_ = false;   // state store failed; dump stops, log capture continues
  bool demoted_ = false;  // lease lost; instance must stop writing state
};

}  // namespace dblog
