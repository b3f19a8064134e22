#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "dblog/types.hpp"

namespace dblog {

using TableKey = std::pair<std::string, PrimaryKey>;

struct TableKeyLess {
  bool operator()(const TableKey& a, const TableKey& b) const {
    if (a.first != b.first) return a.first < b.first;
    return compare_keys(a.second, b.second) == Ordering::less;
  }
};

// Output destination. Accepts events strictly in seq order within an epoch;
// a gap or regression is a hard (non-retryable) error so delivery bugs fail
// loudly instead of silently reordering.
class Sink {
 public:
  virtual ~Sink() = default;

  void write(const OutputEvent& e);

  // A new engine instance attached; seq numbering restarts at 1.
  virtual void begin_epoch();

  std::uint64_t accepted() const;

 protected:
  virtual void do_write(const OutputEvent& e) = 0;

 private:
  mutable std::mutex mu_;
  std::uint64_t expected_seq_ = 1;
  std::uint64_t accepted_ = 0;
};

class MemorySink : public Sink {
 public:
  std::vector<OutputEvent> events() const;

 protected:
  void do_write(const OutputEvent& e) override;

 private:
  mutable std::mutex mu_;
  std::vector<OutputEvent> events_;
};

// Line-delimited file sink in the canonical event format, one event per
// line, LF-terminated, flushed per write.
class FileSink : public Sink {
 public:
  explicit FileSink(const std::filesystem::path& path, bool append = false);

 protected:
  void do_write(const OutputEvent& e) override;

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

std::vector<OutputEvent> read_events_file(const std::filesystem::path& path);

// Keyed topic with log compaction, standing in for the Kafka bootstrap
// path: compaction keeps only the newest entry per (table, key) and drops
// keys whose newest entry is a delete tombstone.
class CompactedTopic : public Sink {
 public:
  struct Bootstrap {
    std::map<TableKey, OutputEvent, TableKeyLess> state;
    std::size_t tail_begin{};  // index of the first entry after the compaction point
  };

  std::vector<OutputEvent> entries() const;
  std::map<TableKey, OutputEvent, TableKeyLess> compact() const;

  // Compacted state plus the position from which a consumer tails newer
  // events, so it can initialize and then stay current.
  Bootstrap bootstrap_read() const;
  std::vector<OutputEvent> read_from(std::size_t index) const;

 protected:
  void do_write(const OutputEvent& e) override;

 private:
  mutable std::mutex mu_;
  std::vector<OutputEvent> entries_;
};

// Applies events in delivery order: create/update upsert, delete removes.
std::map<TableKey, std::pair<RowImage, std::uint64_t>, TableKeyLess>
materialize(const std::vector<OutputEvent>& events);

// Wraps a sink and fails every k-th write once with a retryable error.
class FaultInjectionSink : public Sink {
 public:
  FaultInjectionSink(Sink& inner, int fail_every);

  void begin_epoch() override;
  int injected_failures() const { return injected_; }

 protected:
  void do_write(const OutputEvent& e) override;

 private:
  Sink& inner_;
  int fail_every_;
  int writes_seen_ = 0;
  bool fail_armed_ = true;
  int injected_ = 0;
};

}  // namespace dblog
