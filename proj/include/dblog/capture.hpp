#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "dblog/output_buffer.hpp"
#include "dblog/sinks.hpp"
#include "dblog/source_db.hpp"
#include "dblog/types.hpp"

namespace dblog {

// Converts a committed log event to the unified output format. Watermark
// events are consumed by the engine internally and never reach the output;
// passing one here is a contract violation.
OutputEvent to_output_event(const LogEvent& e);

struct PauseEpisode {
  std::uint64_t begin_op{};  // engine op index of the first paused operation
  std::uint64_t end_op{};    // engine op index of the last paused operation
  std::uint64_t ops() const { return end_op - begin_op + 1; }
};

// Cursor wrapper with pause/resume accounting. Pausing stops consumption
// only; the cursor position is untouched, so nothing is lost while paused.
class LogTail {
 public:
  explicit LogTail(LogCursor cursor) : cursor_(cursor) {}

  void pause(std::uint64_t at_op);
  void resume(std::uint64_t at_op);
  bool paused() const { return paused_; }

  // One event in LSN order, or nullopt while paused or caught up.
  std::optional<LogEvent> next();

  std::uint64_t events_consumed() const { return events_consumed_; }
  Lsn position() const { return cursor_.position(); }
  const std::vector<PauseEpisode>& pause_episodes() const { return episodes_; }

 private:
  LogCursor cursor_;
  bool paused_ = false;
  std::uint64_t events_consumed_ = 0;
  std::uint64_t open_begin_ = 0;
  std::vector<PauseEpisode> episodes_;
};

struct DeliveryPolicy {
  int max_retries = 3;
  // Doubling backoff from this base; steps in deterministic mode,
  // milliseconds when free-running.
  std::uint64_t backoff_base_steps = 1;
  std::chrono::milliseconds backoff_base{2};
};

// Consumes the output buffer and writes to the sink in seq order, exactly
// once per event on the happy path. Transient sink failures are retried
// with doubling backoff and never reorder; exhausted retries halt delivery.
class Delivery {
 public:
  Delivery(OutputBuffer& buf, Sink& sink, DeliveryPolicy policy = {});

  // Deterministic mode: one bounded action (deliver, tick a backoff, or
  // nothing). Returns whether anything happened.
  bool step();

  // Free-running mode: loop until the buffer is closed and drained.
  void run();

  std::uint64_t delivered_count() const { return delivered_count_.load(); }
  std::uint64_t delivered_seq() const { return delivered_seq_.load(); }
  Lsn delivered_log_lsn() const { return delivered_log_lsn_.load(); }
  bool permanently_failed() const { return failed_.load(); }
  std::string failure_reason() const;

 private:
  bool deliver_or_retry(const OutputEvent& e);  // true once written
  void note_delivered(const OutputEvent& e);

  OutputBuffer& buf_;
  Sink& sink_;
  DeliveryPolicy policy_;

  std::optional<OutputEvent> pending_;
  int attempts_ = 0;
  std::uint64_t backoff_remaining_ = 0;

  std::atomic<std::uint64_t> delivered_count_{0};
  std::atomic<std::uint64_t> delivered_seq_{0};
  std::atomic<Lsn> delivered_log_lsn_{0};
  std::atomic<bool> failed_{false};
  mutable std::mutex reason_mu_;
  std::string failure_reason_;
};

}  // namespace dblog
