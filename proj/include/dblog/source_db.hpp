#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "dblog/types.hpp"

namespace dblog {

// The watermark table lives in a reserved namespace so it can never collide
// with application tables. It holds exactly one row.
inline constexpr std::string_view kWatermarkTable = "_dblog.watermark";
inline constexpr std::string_view kReservedPrefix = "_dblog.";

struct SelectedRow {
  PrimaryKey key;
  RowImage row;
  std::uint64_t version{};
};

struct LockRecord {
  std::string table;
  std::string owner;
  Lsn at_lsn{};
};

class SimDatabase;

// Yields committed events in strictly increasing LSN order, no gaps, no
// duplicates. The log itself retains the window; pausing a consumer loses
// nothing.
class LogCursor {
 public:
  LogCursor() = default;

  std::optional<LogEvent> next();
  Lsn position() const { return position_; }

 private:
  friend class SimDatabase;
  LogCursor(const SimDatabase* db, Lsn from) : db_(db), position_(from) {}

  const SimDatabase* db_ = nullptr;
  Lsn position_ = 0;  // exclusive lower bound
};

// In-memory source database with the two capabilities the engine requires:
// change emission from a linear history in commit order, and non-stale
// point-in-time reads. Every commit is one single-row transaction.
class SimDatabase {
 public:
  SimDatabase();

  void create_table(const std::string& name,
                    const std::vector<std::string>& schema,
                    const std::vector<std::string>& pk);

  // Upsert; emits create (key absent) or update (key present) with a fresh
  // LSN and version = previous + 1. Versions never reset, even across
  // delete/recreate.
  LogEvent put(const std::string& table, const PrimaryKey& key, RowImage row);

  // Removes a present key; emits delete with row image absent.
  LogEvent remove(const std::string& table, const PrimaryKey& key);

  // Replaces the single watermark row's UUID; emits the watermark event.
  LogEvent update_watermark(const Uuid& value);

  // Table state as of `as_of`, keys strictly greater than `after`, ascending,
  // at most `limit` rows. This is the non-stale read: it observes every
  // change committed at or before `as_of`.
  std::vector<SelectedRow> snapshot_select_range(
      const std::string& table, const std::optional<PrimaryKey>& after,
      std::size_t limit, Lsn as_of) const;

  // As-of read restricted to an explicit key set (repair dumps).
  std::vector<SelectedRow> snapshot_select_keys(
      const std::string& table, const std::vector<PrimaryKey>& keys,
      Lsn as_of) const;

  LogCursor subscribe_log(Lsn from) const;

  std::map<PrimaryKey, std::pair<RowImage, std::uint64_t>, KeyLess>
  current_state(const std::string& table) const;

  std::vector<std::string> table_names() const;
  std::vector<std::string> table_schema(const std::string& table) const;
  Lsn head_lsn() const;
  std::vector<LogEvent> log_snapshot() const;

  // Explicit table-lock instrumentation. The engine never calls this; the
  // journal lets the harness prove it.
  void lock_table(const std::string& table, const std::string& owner);
  std::vector<LockRecord> lock_journal() const;

  // Events with lsn <= floor are no longer subscribable.
  void set_retention_floor(Lsn floor);

 private:
  struct VersionEntry {
    Lsn lsn{};
    std::uint64_t version{};
    std::optional<RowImage> row;  // nullopt marks a delete
  };

  struct Table {
    std::vector<std::string> schema;
    std::vector<std::string> pk_columns;
    // Per-key version chain with LSN stamps; as-of reads binary-search it.
    std::map<PrimaryKey, std::vector<VersionEntry>, KeyLess> chains;
  };

  friend class LogCursor;

  const Table& table_or_throw(const std::string& name) const;
  PrimaryKey key_from_row(const Table& t, const RowImage& row) const;
  static const VersionEntry* entry_as_of(const std::vector<VersionEntry>& chain,
                                         Lsn as_of);
  std::optional<LogEvent> event_after(Lsn position) const;

  mutable std::mutex mu_;  // single writer lock: commits form a linear history
  std::map<std::string, Table> tables_;
  std::vector<LogEvent> log_;
  Lsn next_lsn_ = 1;
  Lsn retention_floor_ = 0;
  Uuid watermark_value_{};
  std::uint64_t watermark_version_ = 0;
  std::vector<LockRecord> lock_journal_;
};

}  // namespace dblog
