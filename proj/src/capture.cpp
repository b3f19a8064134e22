#include "dblog/capture.hpp"

#include <thread>

namespace dblog {

OutputEvent to_output_event(const LogEvent& e) {
  if (e.is_watermark) {
    throw ContractViolation("watermark events never become output events");
  }
  OutputEvent out;
  out.table = e.table;
  out.op = e.op;
  out.key = e.key;
  out.row = e.row;
  out.origin = Origin::log;
  out.lsn = e.lsn;
  out.version = e.version;
  return out;
}

void LogTail::pause(std::uint64_t at_op) {
  if (paused_) throw ContractViolation("log processing already paused");
  paused_ = true;
  open_begin_ = at_op;
}

void LogTail::resume(std::uint64_t at_op) {
  if (!paused_) throw ContractViolation("log processing not paused");
  paused_ = false;
  episodes_.push_back(PauseEpisode{open_begin_, at_op});
}

std::optional<LogEvent> LogTail::next() {
  if (paused_) return std::nullopt;
  auto e = cursor_.next();
  if (e) ++events_consumed_;
  return e;
}

Delivery::Delivery(OutputBuffer& buf, Sink& sink, DeliveryPolicy policy)
    : buf_(buf), sink_(sink), policy_(policy) {}

void Delivery::note_delivered(const OutputEvent& e) {
  delivered_seq_.store(e.seq);
  delivered_count_.fetch_add(1);
  if (e.origin == Origin::log) delivered_log_lsn_.store(e.lsn.value());
}

bool Delivery::step() {
  if (failed_.load()) return false;
  if (backoff_remaining_ > 0) {
    --backoff_remaining_;
    return true;
  }
  if (!pending_) {
    pending_ = buf_.try_pop();
    if (!pending_) return false;
    attempts_ = 0;
  }
  try {
    sink_.write(*pending_);
  } catch (const SinkError& err) {
    ++attempts_;
    if (!err.retryable || attempts_ > policy_.max_retries) {
      failed_.store(true);
      std::lock_guard lock(reason_mu_);
      failure_reason_ = err.what();
      return false;
    }
    backoff_remaining_ = policy_.backoff_base_steps << (attempts_ - 1);
    return true;
  }
  note_delivered(*pending_);
  pending_.reset();
  return true;
}

bool Delivery::deliver_or_retry(const OutputEvent& e) {
  for (int attempt = 0;; ++attempt) {
    try {
      sink_.write(e);
      note_delivered(e);
      return true;
    } catch (const SinkError& err) {
      if (!err.retryable || attempt >= policy_.max_retries) {
        failed_.store(true);
        std::lock_guard lock(reason_mu_);
        failure_reason_ = err.what();
        return false;
      }
      std::this_thread::sleep_for(policy_.backoff_base * (1 << attempt));
    }
  }
}

void Delivery::run() {
  while (true) {
    auto e = buf_.pop_wait();
    if (!e) return;  // closed and drained
    if (!deliver_or_retry(*e)) return;
  }
}

std::string Delivery::failure_reason() const {
  std::lock_guard lock(reason_mu_);
  return failure_reason_;
}

}  // namespace dblog
