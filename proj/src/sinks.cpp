#include "dblog/sinks.hpp"

#include "dblog/codec.hpp"

namespace dblog {

void Sink::write(const OutputEvent& e) {
  {
    std::lock_guard lock(mu_);
    if (e.seq != expected_seq_) {
      throw SinkError("out-of-order seq " + std::to_string(e.seq) +
                          ", expected " + std::to_string(expected_seq_),
                      /*retry=*/false);
    }
  }
  do_write(e);  // may throw a retryable SinkError; seq not consumed then
  std::lock_guard lock(mu_);
  ++expected_seq_;
  ++accepted_;
}

void Sink::begin_epoch() {
  std::lock_guard lock(mu_);
  expected_seq_ = 1;
}

std::uint64_t Sink::accepted() const {
  std::lock_guard lock(mu_);
  return accepted_;
}

void MemorySink::do_write(const OutputEvent& e) {
  std::lock_guard lock(mu_);
  events_.push_back(e);
}

std::vector<OutputEvent> MemorySink::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

FileSink::FileSink(const std::filesystem::path& path, bool append)
    : path_(path),
      out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) {
    throw SinkError("cannot open sink file '" + path.string() + "'", false);
  }
}

void FileSink::do_write(const OutputEvent& e) {
  out_ << encode_output_event(e) << '\n';
  out_.flush();
  if (!out_) {
    out_.clear();
    throw SinkError("write to '" + path_.string() + "' failed", /*retry=*/true);
  }
}

std::vector<OutputEvent> read_events_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open events file '" + path.string() + "'");
  std::vector<OutputEvent> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      events.push_back(decode_output_event(line));
    } catch (const DecodeError& e) {
      throw DecodeError(e.field, std::string(e.what()) + " (line " +
                                     std::to_string(lineno) + ")");
    }
  }
  return events;
}

void CompactedTopic::do_write(const OutputEvent& e) {
  std::lock_guard lock(mu_);
  entries_.push_back(e);
}

std::vector<OutputEvent> CompactedTopic::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::map<TableKey, OutputEvent, TableKeyLess> CompactedTopic::compact() const {
  std::lock_guard lock(mu_);
  std::map<TableKey, OutputEvent, TableKeyLess> latest;
  for (const OutputEvent& e : entries_) {
    latest.insert_or_assign(TableKey{e.table, e.key}, e);
  }
  // Tombstones are removed at compaction.
  for (auto it = latest.begin(); it != latest.end();) {
    if (it->second.op == Op::del) {
      it = latest.erase(it);
    } else {
      ++it;
    }
  }
  return latest;
}

CompactedTopic::Bootstrap CompactedTopic::bootstrap_read() const {
  Bootstrap b;
  {
    std::lock_guard lock(mu_);
    b.tail_begin = entries_.size();
  }
  b.state = compact();
  return b;
}

std::vector<OutputEvent> CompactedTopic::read_from(std::size_t index) const {
  std::lock_guard lock(mu_);
  if (index >= entries_.size()) return {};
  return std::vector<OutputEvent>(entries_.begin() + static_cast<std::ptrdiff_t>(index),
                                  entries_.end());
}

std::map<TableKey, std::pair<RowImage, std::uint64_t>, TableKeyLess>
materialize(const std::vector<OutputEvent>& events) {
  std::map<TableKey, std::pair<RowImage, std::uint64_t>, TableKeyLess> state;
  for (const OutputEvent& e : events) {
    TableKey k{e.table, e.key};
    if (e.op == Op::del) {
      state.erase(k);
    } else {
      state.insert_or_assign(k, std::make_pair(e.row.value(), e.version));
    }
  }
  return state;
}

FaultInjectionSink::FaultInjectionSink(Sink& inner, int fail_every)
    : inner_(inner), fail_every_(fail_every) {
  if (fail_every_ < 1) throw ConfigError("fail_every must be >= 1");
}

void FaultInjectionSink::begin_epoch() {
  Sink::begin_epoch();
  inner_.begin_epoch();
}

void FaultInjectionSink::do_write(const OutputEvent& e) {
  ++writes_seen_;
  if (writes_seen_ % fail_every_ == 0 && fail_armed_) {
    fail_armed_ = false;  // fail each k-th write once, succeed on retry
    ++injected_;
    throw SinkError("injected transient failure at write " +
                        std::to_string(writes_seen_),
                    /*retry=*/true);
  }
  fail_armed_ = true;
  inner_.write(e);
}

}  // namespace dblog
