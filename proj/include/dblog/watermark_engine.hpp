#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dblog/capture.hpp"
#include "dblog/output_buffer.hpp"
#include "dblog/source_db.hpp"
#include "dblog/types.hpp"

namespace dblog {

struct EngineConfig {
  std::size_t default_chunk_size = 1000;
  // When set, the chunk select reads at a position drawn uniformly between
  // the low-watermark write and the current head instead of exactly the
  // low-watermark position — the weakest read the algorithm tolerates.
  bool read_lag_adversary = false;
  std::uint64_t adversary_seed = 0;
  // Free-running mode blocks on a full buffer; deterministic mode retries
  // the step instead.
  bool blocking_appends = false;
};

struct ChunkRequest {
  std::string table;
  std::optional<PrimaryKey> after;  // range scope: keys strictly greater
  std::vector<PrimaryKey> keys;     // keys scope when non-empty (sorted)
  std::size_t chunk_size = 0;       // 0 = engine default
};

struct ChunkOutcome {
  std::string table;
  bool exhausted{};  // range select returned no rows
  std::optional<PrimaryKey> last_key;
  std::size_t rows_selected{};
  std::size_t rows_emitted{};
  std::uint64_t last_seq{};  // buffer seq high-water when the window closed
};

// Instrumentation per window, consumed by the verification harness.
struct WindowTrace {
  std::string table;
  Uuid lw;
  Uuid hw;
  Lsn lw_lsn{};
  Lsn hw_lsn{};
  Lsn select_as_of{};
  std::optional<PrimaryKey> after;
  std::vector<PrimaryKey> chunk_keys;         // as selected
  std::vector<PrimaryKey> window_event_keys;  // same-table keys seen inside the window
  std::vector<PrimaryKey> emitted_keys;       // chunk rows that reached the buffer
};

// Watermark-based chunk selection over a tailed log. One chunk is in flight
// at a time; each chunk is bracketed by low/high watermark writes, and any
// key that changes inside that window is dropped from the selected chunk so
// the chunk can never override newer log state.
//
// Sequencing per chunk: pause tail -> write lw -> select (as-of >= lw) ->
// write hw -> resume tail; then the regular event loop removes colliding
// keys until it sees hw, at which point surviving rows are appended to the
// output in ascending key order.
class WatermarkEngine {
 public:
  WatermarkEngine(SimDatabase& db, OutputBuffer& buf, UuidGenerator& uuids,
                  EngineConfig cfg, Lsn start_from);

  // Schedules the next chunk; contract violation while one is in flight.
  void begin_chunk(ChunkRequest request);
  bool window_in_flight() const { return window_in_flight_; }
  std::optional<ChunkOutcome> take_outcome();

  // One bounded operation: a watermark write, a chunk select, one event
  // consumed, or a batch of chunk-row appends. Returns whether the engine
  // made observable progress.
  bool step();

  // Convenience for library use and tests: runs the pending chunk to
  // completion (the buffer must have room for the chunk plus window events).
  ChunkOutcome run_chunk(ChunkRequest request);

  bool caught_up() const;

  std::uint64_t ops_executed() const { return ops_; }
  std::uint64_t events_consumed() const { return tail_.events_consumed(); }
  Lsn last_consumed_lsn() const { return tail_.position(); }
  std::uint64_t tail_steps_since_window() const { return tail_steps_since_window_; }
  std::uint64_t windows_closed() const { return windows_closed_; }
  const std::vector<PauseEpisode>& pause_episodes() const {
    return tail_.pause_episodes();
  }
  const std::vector<WindowTrace>& window_traces() const { return traces_; }

 private:
  enum class Phase { tailing, write_lw, select_chunk, write_hw, flush_chunk };

  bool step_tailing();
  void process_event(const LogEvent& e);
  bool flush_pending_rows();
  Lsn pick_select_as_of();
  bool forward_to_buffer(OutputEvent e);

  SimDatabase& db_;
  OutputBuffer& buf_;
  UuidGenerator& uuids_;
  EngineConfig cfg_;
  LogTail tail_;
  std::mt19937_64 adversary_rng_;

  Phase phase_ = Phase::tailing;
  std::uint64_t ops_ = 0;
  std::uint64_t tail_steps_since_window_ = 0;
  std::uint64_t windows_closed_ = 0;

  std::optional<ChunkRequest> request_;
  bool window_in_flight_ = false;
  bool inwindow_ = false;
  WatermarkPair pair_{};
  Lsn lw_lsn_ = 0;
  std::map<PrimaryKey, std::pair<RowImage, std::uint64_t>, KeyLess> chunk_;
  std::vector<std::pair<PrimaryKey, std::pair<RowImage, std::uint64_t>>> pending_rows_;
  std::size_t flush_index_ = 0;
  ChunkOutcome building_outcome_{};
  std::optional<ChunkOutcome> outcome_;
  WindowTrace trace_{};
  std::vector<WindowTrace> traces_;
};

}  // namespace dblog
