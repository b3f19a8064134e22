#include "dblog/watermark_engine.hpp"

#include <algorithm>

#include "dblog/codec.hpp"

namespace dblog {

WatermarkEngine::WatermarkEngine(SimDatabase& db, OutputBuffer& buf,
                                 UuidGenerator& uuids, EngineConfig cfg,
                                 Lsn start_from)
    : db_(db),
      buf_(buf),
      uuids_(uuids),
      cfg_(cfg),
      tail_(db.subscribe_log(start_from)),
      adversary_rng_(cfg.adversary_seed) {}

void WatermarkEngine::begin_chunk(ChunkRequest request) {
  if (window_in_flight_ || request_) {
    throw ContractViolation("a chunk is already in flight");
  }
  if (request.chunk_size == 0) request.chunk_size = cfg_.default_chunk_size;
  if (!request.keys.empty()) {
    if (!std::is_sorted(request.keys.begin(), request.keys.end(), KeyLess{})) {
      throw ContractViolation("keys-scope chunk must be sorted ascending");
    }
  }
  request_ = std::move(request);
}

std::optional<ChunkOutcome> WatermarkEngine::take_outcome() {
  auto out = std::move(outcome_);
  outcome_.reset();
  return out;
}

bool WatermarkEngine::caught_up() const {
  return phase_ == Phase::tailing && !window_in_flight_ && !request_ &&
         tail_.position() >= db_.head_lsn();
}

Lsn WatermarkEngine::pick_select_as_of() {
  // The select must observe at least everything committed up to the low
  // watermark write; anything between that and the current head is equally
  // legal and is what the adversary exercises.
  if (!cfg_.read_lag_adversary) return lw_lsn_;
  Lsn head = db_.head_lsn();
  std::uniform_int_distribution<Lsn> dist(lw_lsn_, head);
  return dist(adversary_rng_);
}

bool WatermarkEngine::forward_to_buffer(OutputEvent e) {
  if (cfg_.blocking_appends) {
    buf_.append(std::move(e));
    return true;
  }
  return buf_.try_append(std::move(e)).has_value();
}

bool WatermarkEngine::step() {
  ++ops_;
  if (phase_ == Phase::tailing && request_ && !window_in_flight_) {
    phase_ = Phase::write_lw;
  }

  switch (phase_) {
    case Phase::write_lw: {
      // Steps 1-2: pause log event processing, write the low watermark.
      pair_ = make_watermark_pair(uuids_);
      tail_.pause(ops_);
      window_in_flight_ = true;
      inwindow_ = false;
      LogEvent e = db_.update_watermark(pair_.lw);
      lw_lsn_ = e.lsn;
      trace_ = WindowTrace{};
      trace_.table = request_->table;
      trace_.lw = pair_.lw;
      trace_.hw = pair_.hw;
      trace_.lw_lsn = e.lsn;
      trace_.after = request_->after;
      building_outcome_ = ChunkOutcome{};
      building_outcome_.table = request_->table;
      phase_ = Phase::select_chunk;
      return true;
    }

    case Phase::select_chunk: {
      // Step 3: select the chunk with a non-stale read.
      Lsn as_of = pick_select_as_of();
      trace_.select_as_of = as_of;
      std::vector<SelectedRow> rows;
      if (request_->keys.empty()) {
        rows = db_.snapshot_select_range(request_->table, request_->after,
                                         request_->chunk_size, as_of);
      } else {
        rows = db_.snapshot_select_keys(request_->table, request_->keys, as_of);
      }
      chunk_.clear();
      for (SelectedRow& r : rows) {
        trace_.chunk_keys.push_back(r.key);
        chunk_.emplace(std::move(r.key),
                       std::make_pair(std::move(r.row), r.version));
      }
      building_outcome_.rows_selected = rows.size();
      if (request_->keys.empty()) {
        building_outcome_.exhausted = rows.empty();
        if (!rows.empty()) {
          building_outcome_.last_key = std::prev(chunk_.end())->first;
        }
      } else {
        // Keys scope advances past requested keys whether or not they exist.
        building_outcome_.exhausted = false;
        building_outcome_.last_key = request_->keys.back();
      }
      phase_ = Phase::write_hw;
      return true;
    }

    case Phase::write_hw: {
      // Steps 4-5: write the high watermark, resume log event processing.
      LogEvent e = db_.update_watermark(pair_.hw);
      trace_.hw_lsn = e.lsn;
      tail_.resume(ops_);
      phase_ = Phase::tailing;
      return true;
    }

    case Phase::flush_chunk:
      return flush_pending_rows();

    case Phase::tailing:
      return step_tailing();
  }
  return false;
}

bool WatermarkEngine::step_tailing() {
  if (!window_in_flight_) ++tail_steps_since_window_;
  // Consuming an event hands it to the buffer; skip the read while full so
  // nothing is consumed-and-held.
  if (!cfg_.blocking_appends && buf_.full()) return false;
  auto e = tail_.next();
  if (!e) return false;
  process_event(*e);
  return true;
}

void WatermarkEngine::process_event(const LogEvent& e) {
  if (!window_in_flight_) {
    // Watermarks from an aborted window are inert: skip by UUID mismatch.
    if (!e.is_watermark) forward_to_buffer(to_output_event(e));
    return;
  }

  if (!inwindow_) {
    if (!e.is_watermark) {
      forward_to_buffer(to_output_event(e));
      return;
    }
    if (*e.watermark_value == pair_.lw) {
      inwindow_ = true;
      return;
    }
    if (*e.watermark_value == pair_.hw) {
      // Commit order makes hw-before-lw impossible.
      throw ContractViolation("high watermark observed before low watermark");
    }
    return;  // orphan watermark
  }

  if (!e.is_watermark) {
    // Step 6: drop chunk rows whose key changed inside the window. A delete
    // supersedes the chunk row exactly like any other change.
    if (e.table == trace_.table) {
      trace_.window_event_keys.push_back(e.key);
      chunk_.erase(e.key);
    }
    forward_to_buffer(to_output_event(e));
    return;
  }
  if (*e.watermark_value == pair_.hw) {
    // Step 7: stage surviving rows, ascending key order.
    pending_rows_.assign(chunk_.begin(), chunk_.end());
    chunk_.clear();
    flush_index_ = 0;
    inwindow_ = false;
    phase_ = Phase::flush_chunk;
    return;
  }
  if (*e.watermark_value == pair_.lw) {
    throw ContractViolation("low watermark observed twice");
  }
  // orphan watermark inside the window: skip
}

bool WatermarkEngine::flush_pending_rows() {
  bool progressed = false;
  while (flush_index_ < pending_rows_.size()) {
    auto& [key, row_version] = pending_rows_[flush_index_];
    OutputEvent e = OutputEvent::dump_row(trace_.table, key, row_version.first,
                                          row_version.second);
    if (!forward_to_buffer(std::move(e))) return progressed;  // buffer full
    trace_.emitted_keys.push_back(key);
    ++flush_index_;
    progressed = true;
  }

  building_outcome_.rows_emitted = pending_rows_.size();
  building_outcome_.last_seq = buf_.last_assigned_seq();
  pending_rows_.clear();
  traces_.push_back(std::move(trace_));
  trace_ = WindowTrace{};
  outcome_ = building_outcome_;
  request_.reset();
  window_in_flight_ = false;
  ++windows_closed_;
  tail_steps_since_window_ = 0;
  phase_ = Phase::tailing;
  return true;
}

ChunkOutcome WatermarkEngine::run_chunk(ChunkRequest request) {
  begin_chunk(std::move(request));
  while (true) {
    step();
    if (auto outcome = take_outcome()) return *outcome;
    if (!window_in_flight_ && !request_) {
      throw ContractViolation("chunk vanished without an outcome");
    }
  }
}

}  // namespace dblog
