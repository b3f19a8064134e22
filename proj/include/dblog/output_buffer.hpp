#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>

#include "dblog/types.hpp"

namespace dblog {

// Bounded FIFO between the engine (single producer) and the delivery
// context (single consumer). Sequence numbers are stamped at append time,
// strictly increasing with no gaps.
class OutputBuffer {
 public:
  explicit OutputBuffer(std::size_t capacity = 65536);

  // Blocking append: waits while full (bounded back-pressure). Returns the
  // assigned seq. Throws ContractViolation if the buffer is closed.
  std::uint64_t append(OutputEvent e);

  // Non-blocking append for deterministic stepping. Returns the assigned
  // seq, or nullopt when full.
  std::optional<std::uint64_t> try_append(OutputEvent e);

  std::optional<OutputEvent> try_pop();

  // Blocks until an event is available or the buffer is closed and drained.
  std::optional<OutputEvent> pop_wait();

  void close();
  bool closed() const;
  bool empty() const;
  bool full() const;
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }

  // Seq of the most recently appended event; 0 if none yet.
  std::uint64_t last_assigned_seq() const;

 private:
  std::uint64_t stamp_and_push(OutputEvent&& e);

  mutable std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<OutputEvent> queue_;
  std::size_t capacity_;
  std::uint64_t next_seq_ = 1;
  bool closed_ = false;
};

}  // namespace dblog
