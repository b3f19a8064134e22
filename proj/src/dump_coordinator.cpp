#include "dblog/dump_coordinator.hpp"

#include <algorithm>

#include "dblog/codec.hpp"

namespace dblog {

std::string_view to_string(DumpScope s) {
  switch (s) {
    case DumpScope::all_tables:
      return "all";
    case DumpScope::table:
      return "table";
    case DumpScope::keys:
      return "keys";
  }
  return "?";
}

std::string_view to_string(DumpStatus s) {
  switch (s) {
    case DumpStatus::pending:
      return "pending";
    case DumpStatus::running:
      return "running";
    case DumpStatus::paused:
      return "paused";
    case DumpStatus::complete:
      return "complete";
  }
  return "?";
}

namespace {

std::optional<DumpStatus> status_from_string(const std::string& s) {
  if (s == "pending") return DumpStatus::pending;
  if (s == "running") return DumpStatus::running;
  if (s == "paused") return DumpStatus::paused;
  if (s == "complete") return DumpStatus::complete;
  return std::nullopt;
}

std::optional<DumpScope> scope_from_string(const std::string& s) {
  if (s == "all") return DumpScope::all_tables;
  if (s == "table") return DumpScope::table;
  if (s == "keys") return DumpScope::keys;
  return std::nullopt;
}

std::string checkpoint_to_string(const DumpCheckpoint& cp) {
  ojson j;
  j["dump_id"] = cp.dump_id.to_string();
  j["table"] = cp.table;
  j["last_key"] = cp.last_key ? key_to_json(*cp.last_key) : ojson(nullptr);
  j["status"] = std::string(to_string(cp.status));
  return j.dump();
}

DumpCheckpoint checkpoint_from_string(const std::string& s) {
  ojson j = ojson::parse(s);
  DumpCheckpoint cp;
  cp.dump_id = Uuid::parse(j.at("dump_id").get<std::string>()).value();
  cp.table = j.at("table").get<std::string>();
  if (!j.at("last_key").is_null()) {
    cp.last_key = key_from_json(j.at("last_key"), "last_key");
  }
  cp.status = status_from_string(j.at("status").get<std::string>()).value();
  return cp;
}

}  // namespace

DumpCoordinator::DumpCoordinator(WatermarkEngine& engine, SimDatabase& db,
                                 CoordinationBackend& backend,
                                 Delivery& delivery, std::uint64_t epoch,
                                 UuidGenerator& uuids, Options options)
    : engine_(engine),
      db_(db),
      backend_(backend),
      delivery_(delivery),
      epoch_(epoch),
      uuids_(uuids),
      options_(std::move(options)) {}

std::string DumpCoordinator::checkpoint_path(const Uuid& dump_id,
                                             const std::string& table) const {
  return "checkpoints/" + dump_id.to_string() + "/" + table;
}

void DumpCoordinator::persist_meta(const ActiveDump& dump) {
  ojson j;
  j["dump_id"] = dump.request.dump_id.to_string();
  j["scope"] = std::string(to_string(dump.request.scope));
  j["table"] = dump.request.table;
  ojson keys = ojson::array();
  for (const auto& k : dump.request.keys) keys.push_back(key_to_json(k));
  j["keys"] = keys;
  j["chunk_size"] = dump.request.chunk_size;
  j["throttle"] = dump.request.throttle;
  j["tables"] = dump.tables;
  backend_.put_state("dumps/" + dump.request.dump_id.to_string(), j.dump(),
                     epoch_);
}

void DumpCoordinator::persist_checkpoint(const DumpCheckpoint& cp) {
  backend_.put_state(checkpoint_path(cp.dump_id, cp.table),
                     checkpoint_to_string(cp), epoch_);
}

Uuid DumpCoordinator::request_dump(DumpRequest request) {
  std::lock_guard lock(mu_);
  if (halted_) throw StateStoreError("dump coordinator halted");
  if (demoted_) throw LeaseError("instance demoted");
  if (active_dump_) {
    throw ContractViolation("a dump is already in progress");
  }
  if (request.chunk_size < 1) throw ConfigError("chunk_size must be >= 1");

  ActiveDump dump;
  switch (request.scope) {
    case DumpScope::all_tables:
      dump.tables = db_.table_names();  // already lexicographic
      break;
    case DumpScope::table:
      db_.table_schema(request.table);  // existence check
      dump.tables = {request.table};
      break;
    case DumpScope::keys: {
      db_.table_schema(request.table);
      if (request.keys.empty()) throw ConfigError("keys scope with empty key list");
      std::sort(request.keys.begin(), request.keys.end(), KeyLess{});
      auto dup = std::adjacent_find(
          request.keys.begin(), request.keys.end(),
          [](const PrimaryKey& a, const PrimaryKey& b) { return a == b; });
      if (dup != request.keys.end()) {
        throw ConfigError("keys scope lists duplicate key " + display_key(*dup));
      }
      dump.tables = {request.table};
      break;
    }
  }

  if (request.dump_id.is_nil()) request.dump_id = uuids_.next();
  Uuid id = request.dump_id;
  dump.request = std::move(request);
  for (const auto& table : dump.tables) {
    DumpCheckpoint cp;
    cp.dump_id = id;
    cp.table = table;
    cp.status = DumpStatus::pending;
    dump.checkpoints.emplace(table, cp);
  }
  dump.complete = dump.tables.empty();

  persist_meta(dump);
  for (const auto& [table, cp] : dump.checkpoints) persist_checkpoint(cp);

  dumps_.emplace(id, std::move(dump));
  request_order_.push_back(id);
  if (!dumps_.at(id).complete) active_dump_ = id;
  return id;
}

void DumpCoordinator::pause_dump(const Uuid& dump_id) {
  std::lock_guard lock(mu_);
  auto it = dumps_.find(dump_id);
  if (it == dumps_.end()) throw ConfigError("unknown dump id");
  ActiveDump& dump = it->second;
  if (dump.complete) throw ContractViolation("dump already complete");
  if (dump.paused || dump.pause_requested) {
    throw ContractViolation("dump already paused");
  }
  mailbox_.push_back(Command{Command::Kind::pause, dump_id});
  dump.pause_requested = true;
}

void DumpCoordinator::resume_dump(const Uuid& dump_id) {
  std::lock_guard lock(mu_);
  auto it = dumps_.find(dump_id);
  if (it == dumps_.end()) throw ConfigError("unknown dump id");
  ActiveDump& dump = it->second;
  if (dump.complete) throw ContractViolation("dump already complete");
  if (!dump.paused && !dump.pause_requested) {
    throw ContractViolation("dump is not paused");
  }
  mailbox_.push_back(Command{Command::Kind::resume, dump_id});
}

DumpStatusSnapshot DumpCoordinator::dump_status(const Uuid& dump_id) const {
  std::lock_guard lock(mu_);
  auto it = dumps_.find(dump_id);
  if (it == dumps_.end()) throw ConfigError("unknown dump id");
  const ActiveDump& dump = it->second;
  DumpStatusSnapshot snap;
  snap.dump_id = dump_id;
  snap.pause_requested = dump.pause_requested;
  snap.paused = dump.paused;
  snap.complete = dump.complete;
  for (const auto& table : dump.tables) {
    snap.tables.push_back(dump.checkpoints.at(table));
  }
  return snap;
}

std::optional<Uuid> DumpCoordinator::latest_dump_id() const {
  std::lock_guard lock(mu_);
  if (request_order_.empty()) return std::nullopt;
  return request_order_.back();
}

void DumpCoordinator::recover() {
  std::lock_guard lock(mu_);
  for (const std::string& key : backend_.list_state("dumps/")) {
    auto raw = backend_.get_state(key, ReadMode::linearizable);
    if (!raw) continue;
    ojson j = ojson::parse(*raw);
    ActiveDump dump;
    dump.request.dump_id = Uuid::parse(j.at("dump_id").get<std::string>()).value();
    dump.request.scope = scope_from_string(j.at("scope").get<std::string>()).value();
    dump.request.table = j.at("table").get<std::string>();
    for (const auto& k : j.at("keys")) {
      dump.request.keys.push_back(key_from_json(k, "keys"));
    }
    dump.request.chunk_size = j.at("chunk_size").get<std::size_t>();
    dump.request.throttle = j.at("throttle").get<std::uint64_t>();
    dump.tables = j.at("tables").get<std::vector<std::string>>();

    bool all_complete = true;
    bool any_paused = false;
    dump.current_table = dump.tables.size();
    for (std::size_t i = 0; i < dump.tables.size(); ++i) {
      const std::string& table = dump.tables[i];
      DumpCheckpoint cp;
      auto cp_raw = backend_.get_state(
          checkpoint_path(dump.request.dump_id, table), ReadMode::linearizable);
      if (cp_raw) {
        cp = checkpoint_from_string(*cp_raw);
      } else {
        cp.dump_id = dump.request.dump_id;
        cp.table = table;
      }
      if (cp.status != DumpStatus::complete) {
        all_complete = false;
        dump.current_table = std::min(dump.current_table, i);
      }
      if (cp.status == DumpStatus::paused) any_paused = true;
      dump.checkpoints.emplace(table, std::move(cp));
    }
    dump.complete = all_complete;
    dump.paused = any_paused;

    Uuid id = dump.request.dump_id;
    dumps_.insert_or_assign(id, std::move(dump));
    request_order_.push_back(id);
    if (!dumps_.at(id).complete) active_dump_ = id;
  }
}

void DumpCoordinator::persist_logpos_if_due() {
  std::uint64_t delivered = delivery_.delivered_count();
  if (delivered - last_logpos_persist_count_ < options_.logpos_interval) return;
  Lsn lsn = delivery_.delivered_log_lsn();
  if (lsn == 0) return;
  ojson j;
  j["lsn"] = lsn;
  backend_.put_state("logpos", j.dump(), epoch_);
  last_logpos_persist_count_ = delivered;
}

void DumpCoordinator::renew_lease_if_due(std::uint64_t now) {
  if (options_.lease_duration == 0 || demoted_) return;
  if (now - last_renew_ < options_.lease_duration / 2) return;
  try {
    backend_.renew_leadership(options_.instance_id, epoch_,
                              options_.lease_duration, now);
    last_renew_ = now;
  } catch (const LeaseError&) {
    demoted_ = true;
  }
}

bool DumpCoordinator::apply_commands() {
  // Commands take effect only at chunk boundaries; an open window always
  // completes first.
  if (wait_ != Wait::none || engine_.window_in_flight()) return false;
  bool progressed = false;
  while (!mailbox_.empty()) {
    Command cmd = mailbox_.front();
    mailbox_.pop_front();
    auto it = dumps_.find(cmd.dump_id);
    if (it == dumps_.end()) continue;
    ActiveDump& dump = it->second;
    if (cmd.kind == Command::Kind::pause) {
      dump.paused = true;
      dump.pause_requested = false;
      if (dump.current_table < dump.tables.size()) {
        DumpCheckpoint& cp = dump.checkpoints.at(dump.tables[dump.current_table]);
        if (cp.status == DumpStatus::running) {
          cp.status = DumpStatus::paused;
          try {
            persist_checkpoint(cp);
          } catch (const StateStoreError&) {
            halted_ = true;
          }
        }
      }
    } else {
      dump.paused = false;
      dump.pause_requested = false;
      if (dump.current_table < dump.tables.size()) {
        DumpCheckpoint& cp = dump.checkpoints.at(dump.tables[dump.current_table]);
        if (cp.status == DumpStatus::paused) {
          cp.status = DumpStatus::running;
          try {
            persist_checkpoint(cp);
          } catch (const StateStoreError&) {
            halted_ = true;
          }
        }
      }
    }
    progressed = true;
  }
  return progressed;
}

bool DumpCoordinator::handle_outcome(const ChunkOutcome& outcome) {
  // Called once the sink acknowledged everything up to the chunk's last seq.
  if (!active_dump_) return false;
  ActiveDump& dump = dumps_.at(*active_dump_);
  DumpCheckpoint& cp = dump.checkpoints.at(outcome.table);

  if (outcome.exhausted) {
    cp.status = DumpStatus::complete;
  } else {
    cp.last_key = outcome.last_key;
    if (dump.request.scope == DumpScope::keys) {
      // Completion for keys scope: every requested key is covered.
      if (!dump.request.keys.empty() &&
          compare_keys(*cp.last_key, dump.request.keys.back()) !=
              Ordering::less) {
        cp.status = DumpStatus::complete;
      }
    }
  }

  try {
    persist_checkpoint(cp);
  } catch (const StateStoreError&) {
    halted_ = true;  // fail-stop for the dump; log capture continues
    return true;
  }
  journal_.back().checkpointed = true;

  if (cp.status == DumpStatus::complete) {
    ++dump.current_table;
    if (dump.current_table >= dump.tables.size()) {
      dump.complete = true;
      active_dump_.reset();
    }
  }
  return true;
}

std::optional<ChunkRequest> DumpCoordinator::next_chunk_request(ActiveDump& dump) {
  while (dump.current_table < dump.tables.size()) {
    const std::string& table = dump.tables[dump.current_table];
    DumpCheckpoint& cp = dump.checkpoints.at(table);
    if (cp.status == DumpStatus::complete) {
      ++dump.current_table;
      continue;
    }

    ChunkRequest req;
    req.table = table;
    req.chunk_size = dump.request.chunk_size;
    if (dump.request.scope == DumpScope::keys) {
      std::vector<PrimaryKey> remaining;
      for (const PrimaryKey& k : dump.request.keys) {
        if (!cp.last_key || compare_keys(k, *cp.last_key) == Ordering::greater) {
          remaining.push_back(k);
        }
      }
      if (remaining.empty()) {
        cp.status = DumpStatus::complete;
        try {
          persist_checkpoint(cp);
        } catch (const StateStoreError&) {
          halted_ = true;
          return std::nullopt;
        }
        ++dump.current_table;
        continue;
      }
      if (remaining.size() > dump.request.chunk_size) {
        remaining.resize(dump.request.chunk_size);
      }
      req.keys = std::move(remaining);
    } else {
      req.after = cp.last_key;
    }

    if (cp.status == DumpStatus::pending) {
      cp.status = DumpStatus::running;
      try {
        persist_checkpoint(cp);
      } catch (const StateStoreError&) {
        halted_ = true;
        return std::nullopt;
      }
    }
    return req;
  }

  dump.complete = true;
  active_dump_.reset();
  return std::nullopt;
}

bool DumpCoordinator::step(std::uint64_t now) {
  std::lock_guard lock(mu_);
  renew_lease_if_due(now);
  if (demoted_) return false;

  bool progressed = false;

  if (wait_ == Wait::window) {
    if (auto outcome = engine_.take_outcome()) {
      ChunkJournalEntry entry;
      entry.table = outcome->table;
      entry.after = dumps_.at(*active_dump_)
                        .checkpoints.at(outcome->table)
                        .last_key;
      entry.exhausted = outcome->exhausted;
      entry.last_key = outcome->last_key;
      entry.rows_emitted = outcome->rows_emitted;
      journal_.push_back(std::move(entry));
      awaiting_outcome_ = std::move(outcome);
      wait_ = Wait::durability;
      // The durability wait is evaluated on a later step; a crash landing
      // here must find the chunk completed but not yet checkpointed.
      return true;
    }
  }

  if (wait_ == Wait::durability) {
    // A checkpointed chunk must be durable: wait until delivery passed the
    // chunk's last appended seq before persisting progress.
    if (halted_ || delivery_.permanently_failed()) {
      awaiting_outcome_.reset();
      wait_ = Wait::none;
      progressed = true;
    } else if (delivery_.delivered_seq() >= awaiting_outcome_->last_seq) {
      handle_outcome(*awaiting_outcome_);
      awaiting_outcome_.reset();
      wait_ = Wait::none;
      progressed = true;
    }
  }

  progressed |= apply_commands();
  if (!halted_) {
    try {
      persist_logpos_if_due();
    } catch (const StateStoreError&) {
      halted_ = true;
    }
  }

  if (active_dump_ && wait_ == Wait::none && !halted_ &&
      !engine_.window_in_flight() && !delivery_.permanently_failed()) {
    ActiveDump& dump = dumps_.at(*active_dump_);
    if (!dump.paused && !dump.complete) {
      bool throttled = engine_.windows_closed() > 0 &&
                       engine_.tail_steps_since_window() <
                           dump.request.throttle;
      if (!throttled) {
        if (auto req = next_chunk_request(dump)) {
          engine_.begin_chunk(std::move(*req));
          wait_ = Wait::window;
          progressed = true;
        }
      }
    }
  }

  return progressed;
}

bool DumpCoordinator::idle() const {
  std::lock_guard lock(mu_);
  if (halted_ || demoted_) return true;  // dump is dead, nothing to wait for
  return !active_dump_ && wait_ == Wait::none && mailbox_.empty();
}

std::size_t DumpCoordinator::chunks_completed() const {
  std::lock_guard lock(mu_);
  return journal_.size();
}

std::size_t DumpCoordinator::chunks_checkpointed() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& e : journal_) n += e.checkpointed ? 1 : 0;
  return n;
}

}  // namespace dblog
