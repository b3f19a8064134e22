#include "dblog/output_buffer.hpp"

namespace dblog {

OutputBuffer::OutputBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("buffer capacity must be positive");
}

std::uint64_t OutputBuffer::stamp_and_push(OutputEvent&& e) {
  e.seq = next_seq_++;
  std::uint64_t seq = e.seq;
  queue_.push_back(std::move(e));
  return seq;
}

std::uint64_t OutputBuffer::append(OutputEvent e) {
  std::uint64_t seq;
  {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return queue_.size() < capacity_ || closed_; });
    if (closed_) throw ContractViolation("append to closed output buffer");
    seq = stamp_and_push(std::move(e));
  }
  not_empty_.notify_one();
  return seq;
}

std::optional<std::uint64_t> OutputBuffer::try_append(OutputEvent e) {
  std::uint64_t seq;
  {
    std::lock_guard lock(mu_);
    if (closed_) throw ContractViolation("append to closed output buffer");
    if (queue_.size() >= capacity_) return std::nullopt;
    seq = stamp_and_push(std::move(e));
  }
  not_empty_.notify_one();
  return seq;
}

std::optional<OutputEvent> OutputBuffer::try_pop() {
  std::optional<OutputEvent> out;
  {
    std::lock_guard lock(mu_);
    if (queue_.empty()) return std::nullopt;
    out = std::move(queue_.front());
    queue_.pop_front();
  }
  not_full_.notify_one();
  return out;
}

std::optional<OutputEvent> OutputBuffer::pop_wait() {
  std::optional<OutputEvent> out;
  {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;  // closed and drained
    out = std::move(queue_.front());
    queue_.pop_front();
  }
  not_full_.notify_one();
  return out;
}

void OutputBuffer::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  not_empty_.notify_all();
  not_full_.notify_all();
}

bool OutputBuffer::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

bool OutputBuffer::empty() const {
  std::lock_guard lock(mu_);
  return queue_.empty();
}

bool OutputBuffer::full() const {
  std::lock_guard lock(mu_);
  return queue_.size() >= capacity_;
}

std::size_t OutputBuffer::size() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

std::uint64_t OutputBuffer::last_assigned_seq() const {
  std::lock_guard lock(mu_);
  return next_seq_ - 1;
}

}  // namespace dblog
