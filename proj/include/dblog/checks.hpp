#pragma once

#include <set>
#include <string>
#include <vector>

#include "dblog/capture.hpp"
#include "dblog/coordination.hpp"
#include "dblog/dump_coordinator.hpp"
#include "dblog/types.hpp"
#include "dblog/watermark_engine.hpp"
#include "dblog/workload.hpp"

namespace dblog {

struct Violation {
  std::string invariant;
  std::string evidence;
};

// Splits a delivered stream into engine epochs: a seq that does not
// increase marks a takeover or restart.
std::vector<std::vector<OutputEvent>> split_epochs(
    const std::vector<OutputEvent>& events);

// No time-travel: per (table, key), versions never regress in delivery
// order. With `allow_redelivery`, an exact duplicate of an already
// delivered event is tolerated (at-least-once after crash or takeover);
// anything else older than the per-key high-water is flagged.
std::vector<Violation> check_no_time_travel(
    const std::vector<OutputEvent>& events, bool allow_redelivery = false);

struct CompletenessSpec {
  const std::vector<LogEvent>* committed = nullptr;  // full source log
  Lsn capture_start = 0;                             // engine subscribed here
  const StateMap* oracle = nullptr;                  // journal replay referee
  std::set<std::string> fully_dumped_tables;
  std::vector<TableKey> dumped_keys;  // keys-scope dumps that completed
  bool at_least_once = false;         // crash/takeover runs re-deliver a tail
  bool expect_exact_state = true;     // false when a dump was left incomplete
};

// Verifies (a) log capture: every committed non-watermark event after the
// capture start appears as a log-origin event in LSN order — exactly once,
// or at least once with contiguous per-epoch re-delivery when allowed; and
// (b) state: materializing the sink equals the expected final state.
std::vector<Violation> check_completeness(
    const std::vector<OutputEvent>& events, const CompletenessSpec& spec,
    std::string* diff_out = nullptr);

// Every pause episode spans exactly two watermark writes plus one chunk
// select, regardless of chunk size or in-window traffic.
std::vector<Violation> check_non_stall(
    const std::vector<PauseEpisode>& episodes);

// Window dedup soundness: a chunk row survives to the output only if its
// key saw no log event inside the window; emitted rows are exactly the
// selected ones minus the collided ones, in ascending key order.
std::vector<Violation> check_window_dedup(
    const std::vector<WindowTrace>& traces);

// The engine must take no table locks at all; the journal records any.
std::vector<Violation> check_no_locks(const std::vector<LockRecord>& journal);

// Chunk ranges advance monotonically from the persisted checkpoint: a
// completed (checkpointed) chunk's range is never selected again; only an
// in-flight chunk may be re-run after a crash.
std::vector<Violation> check_chunk_progression(
    const std::vector<ChunkJournalEntry>& journal);

// At most the in-flight chunk is re-emitted: a key emitted as a dump row by
// more than one window must come from re-runs of the same chunk start.
std::vector<Violation> check_redelivery_bounds(
    const std::vector<WindowTrace>& traces);

// Intervals of active leadership never overlap, and epochs increase.
std::vector<Violation> check_lease_exclusivity(
    const std::vector<LeaseJournalEntry>& journal);

// Stream shape alone, no source needed: seq advances one at a time per
// epoch, log-origin LSNs strictly increase per epoch, dump rows carry no
// LSN and op update. Used by offline verification.
std::vector<Violation> check_stream_wellformed(
    const std::vector<OutputEvent>& events, bool allow_redelivery = false);

}  // namespace dblog
