#include "dblog/source_db.hpp"

#include <algorithm>

#include "dblog/codec.hpp"

namespace dblog {

namespace {

bool is_reserved(std::string_view name) {
  return name.starts_with(kReservedPrefix);
}

}  // namespace

SimDatabase::SimDatabase() = default;

const SimDatabase::Table& SimDatabase::table_or_throw(const std::string& name) const {
  auto it = tables_.find(name);
  if (it == tables_.end()) throw SourceError("unknown table '" + name + "'");
  return it->second;
}

void SimDatabase::create_table(const std::string& name,
                               const std::vector<std::string>& schema,
                               const std::vector<std::string>& pk) {
  std::lock_guard lock(mu_);
  if (name.empty()) throw SourceError("table name must be non-empty");
  if (is_reserved(name)) {
    throw SourceError("table name '" + name + "' is in the reserved namespace");
  }
  if (tables_.contains(name)) throw SourceError("duplicate table '" + name + "'");
  if (schema.empty()) throw SourceError("schema must be non-empty");
  if (pk.empty()) {
    throw SourceError("table '" + name + "' has no primary key; selects require one");
  }
  for (const auto& col : pk) {
    if (std::find(schema.begin(), schema.end(), col) == schema.end()) {
      throw SourceError("pk column '" + col + "' not in schema of '" + name + "'");
    }
  }
  Table t;
  t.schema = schema;
  t.pk_columns = pk;
  tables_.emplace(name, std::move(t));
}

PrimaryKey SimDatabase::key_from_row(const Table& t, const RowImage& row) const {
  PrimaryKey key;
  for (const auto& col : t.pk_columns) {
    const Value* v = row.find(col);
    if (v == nullptr) throw SourceError("row missing pk column '" + col + "'");
    if (std::holds_alternative<std::int64_t>(*v)) {
      key.components.emplace_back(std::get<std::int64_t>(*v));
    } else if (std::holds_alternative<std::string>(*v)) {
      key.components.emplace_back(std::get<std::string>(*v));
    } else {
      throw SourceError("pk column '" + col + "' must be integer or text");
    }
  }
  return key;
}

LogEvent SimDatabase::put(const std::string& table, const PrimaryKey& key,
                          RowImage row) {
  std::lock_guard lock(mu_);
  if (is_reserved(table)) {
    throw SourceError("application writes may not touch '" + table + "'");
  }
  auto it = tables_.find(table);
  if (it == tables_.end()) throw SourceError("unknown table '" + table + "'");
  Table& t = it->second;

  if (row.columns.size() != t.schema.size()) {
    throw SourceError("row for '" + table + "' does not cover the schema");
  }
  for (std::size_t i = 0; i < t.schema.size(); ++i) {
    if (row.columns[i].first != t.schema[i]) {
      throw SourceError("row column '" + row.columns[i].first +
                        "' does not match schema column '" + t.schema[i] + "'");
    }
  }
  if (key_from_row(t, row) != key) {
    throw SourceError("key does not match row pk columns for '" + table + "'");
  }

  auto& chain = t.chains[key];
  bool live = !chain.empty() && chain.back().row.has_value();
  std::uint64_t version = chain.empty() ? 1 : chain.back().version + 1;

  LogEvent e;
  e.lsn = next_lsn_++;
  e.table = table;
  e.op = live ? Op::update : Op::create;
  e.key = key;
  e.row = row;
  e.version = version;
  chain.push_back(VersionEntry{e.lsn, version, std::move(row)});
  log_.push_back(e);
  return e;
}

LogEvent SimDatabase::remove(const std::string& table, const PrimaryKey& key) {
  std::lock_guard lock(mu_);
  if (is_reserved(table)) {
    throw SourceError("application writes may not touch '" + table + "'");
  }
  auto it = tables_.find(table);
  if (it == tables_.end()) throw SourceError("unknown table '" + table + "'");
  Table& t = it->second;

  auto chain_it = t.chains.find(key);
  bool live = chain_it != t.chains.end() && !chain_it->second.empty() &&
              chain_it->second.back().row.has_value();
  if (!live) {
    throw SourceError("delete of absent key " + display_key(key) + " in '" +
                      table + "'");
  }
  auto& chain = chain_it->second;

  LogEvent e;
  e.lsn = next_lsn_++;
  e.table = table;
  e.op = Op::del;
  e.key = key;
  e.version = chain.back().version + 1;
  chain.push_back(VersionEntry{e.lsn, e.version, std::nullopt});
  log_.push_back(e);
  return e;
}

LogEvent SimDatabase::update_watermark(const Uuid& value) {
  std::lock_guard lock(mu_);
  watermark_value_ = value;
  ++watermark_version_;

  LogEvent e;
  e.lsn = next_lsn_++;
  e.table = std::string(kWatermarkTable);
  e.op = Op::update;
  e.key.components.emplace_back(std::int64_t{0});
  RowImage row;
  row.columns.emplace_back("id", std::int64_t{0});
  row.columns.emplace_back("value", value.to_string());
  e.row = std::move(row);
  e.version = watermark_version_;
  e.is_watermark = true;
  e.watermark_value = value;
  log_.push_back(e);
  return e;
}

const SimDatabase::VersionEntry* SimDatabase::entry_as_of(
    const std::vector<VersionEntry>& chain, Lsn as_of) {
  // Last entry with lsn <= as_of.
  auto it = std::upper_bound(
      chain.begin(), chain.end(), as_of,
      [](Lsn value, const VersionEntry& e) { return value < e.lsn; });
  if (it == chain.begin()) return nullptr;
  return &*std::prev(it);
}

std::vector<SelectedRow> SimDatabase::snapshot_select_range(
    const std::string& table, const std::optional<PrimaryKey>& after,
    std::size_t limit, Lsn as_of) const {
  std::lock_guard lock(mu_);
  const Table& t = table_or_throw(table);
  if (limit < 1) throw SourceError("limit must be >= 1");
  if (as_of >= next_lsn_) throw SourceError("as_of beyond log head");

  std::vector<SelectedRow> out;
  auto it = after ? t.chains.upper_bound(*after) : t.chains.begin();
  for (; it != t.chains.end() && out.size() < limit; ++it) {
    const VersionEntry* e = entry_as_of(it->second, as_of);
    if (e != nullptr && e->row.has_value()) {
      out.push_back(SelectedRow{it->first, *e->row, e->version});
    }
  }
  return out;
}

std::vector<SelectedRow> SimDatabase::snapshot_select_keys(
    const std::string& table, const std::vector<PrimaryKey>& keys,
    Lsn as_of) const {
  std::lock_guard lock(mu_);
  const Table& t = table_or_throw(table);
  if (as_of >= next_lsn_) throw SourceError("as_of beyond log head");

  std::vector<SelectedRow> out;
  for (const PrimaryKey& key : keys) {
    auto it = t.chains.find(key);
    if (it == t.chains.end()) continue;
    const VersionEntry* e = entry_as_of(it->second, as_of);
    if (e != nullptr && e->row.has_value()) {
      out.push_back(SelectedRow{key, *e->row, e->version});
    }
  }
  std::sort(out.begin(), out.end(), [](const SelectedRow& a, const SelectedRow& b) {
    return compare_keys(a.key, b.key) == Ordering::less;
  });
  return out;
}

LogCursor SimDatabase::subscribe_log(Lsn from) const {
  std::lock_guard lock(mu_);
  if (from >= next_lsn_ + 1) {
    throw SourceError("subscribe position beyond log head");
  }
  if (from < retention_floor_) {
    throw SourceError("subscribe position below retention floor");
  }
  return LogCursor(this, from);
}

std::optional<LogEvent> SimDatabase::event_after(Lsn position) const {
  std::lock_guard lock(mu_);
  // LSNs are assigned 1,2,3,... so log_[i] has lsn i+1.
  if (position >= log_.size()) return std::nullopt;
  return log_[position];
}

std::optional<LogEvent> LogCursor::next() {
  if (db_ == nullptr) return std::nullopt;
  auto e = db_->event_after(position_);
  if (e) position_ = e->lsn;
  return e;
}

std::map<PrimaryKey, std::pair<RowImage, std::uint64_t>, KeyLess>
SimDatabase::current_state(const std::string& table) const {
  std::lock_guard lock(mu_);
  const Table& t = table_or_throw(table);
  std::map<PrimaryKey, std::pair<RowImage, std::uint64_t>, KeyLess> out;
  for (const auto& [key, chain] : t.chains) {
    if (!chain.empty() && chain.back().row.has_value()) {
      out.emplace(key, std::make_pair(*chain.back().row, chain.back().version));
    }
  }
  return out;
}

std::vector<std::string> SimDatabase::table_names() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> names;
  names.reserve(tables_.size());
  for (const auto& [name, t] : tables_) names.push_back(name);
  return names;
}

std::vector<std::string> SimDatabase::table_schema(const std::string& table) const {
  std::lock_guard lock(mu_);
  return table_or_throw(table).schema;
}

Lsn SimDatabase::head_lsn() const {
  std::lock_guard lock(mu_);
  return next_lsn_ - 1;
}

std::vector<LogEvent> SimDatabase::log_snapshot() const {
  std::lock_guard lock(mu_);
  return log_;
}

void SimDatabase::lock_table(const std::string& table, const std::string& owner) {
  std::lock_guard lock(mu_);
  lock_journal_.push_back(LockRecord{table, owner, next_lsn_ - 1});
}

std::vector<LockRecord> SimDatabase::lock_journal() const {
  std::lock_guard lock(mu_);
  return lock_journal_;
}

void SimDatabase::set_retention_floor(Lsn floor) {
  std::lock_guard lock(mu_);
  retention_floor_ = floor;
}

}  // namespace dblog
