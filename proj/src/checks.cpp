#include "dblog/checks.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "dblog/codec.hpp"
#include "dblog/sinks.hpp"

namespace dblog {

namespace {

constexpr std::size_t kMaxEvidence = 5;

std::string event_brief(const OutputEvent& e) {
  std::ostringstream ss;
  ss << "seq=" << e.seq << " " << e.table << " " << to_string(e.op) << " key="
     << display_key(e.key) << " v" << e.version << " origin="
     << to_string(e.origin);
  if (e.lsn) ss << " lsn=" << *e.lsn;
  return ss.str();
}

}  // namespace

std::vector<std::vector<OutputEvent>> split_epochs(
    const std::vector<OutputEvent>& events) {
  std::vector<std::vector<OutputEvent>> epochs;
  for (const OutputEvent& e : events) {
    if (epochs.empty() || (!epochs.back().empty() && e.seq <= epochs.back().back().seq)) {
      epochs.emplace_back();
    }
    epochs.back().push_back(e);
  }
  return epochs;
}

std::vector<Violation> check_no_time_travel(
    const std::vector<OutputEvent>& events, bool allow_redelivery) {
  std::vector<Violation> out;
  std::map<TableKey, std::pair<std::uint64_t, std::uint64_t>, TableKeyLess>
      high;  // key -> (max version, seq that set it)

  struct SeenLess {
    bool operator()(const std::tuple<std::string, PrimaryKey, std::uint64_t,
                                     std::uint64_t>& a,
                    const std::tuple<std::string, PrimaryKey, std::uint64_t,
                                     std::uint64_t>& b) const {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
      auto ord = compare_keys(std::get<1>(a), std::get<1>(b));
      if (ord != Ordering::equal) return ord == Ordering::less;
      if (std::get<2>(a) != std::get<2>(b)) return std::get<2>(a) < std::get<2>(b);
      return std::get<3>(a) < std::get<3>(b);
    }
  };
  std::set<std::tuple<std::string, PrimaryKey, std::uint64_t, std::uint64_t>,
           SeenLess>
      seen;  // (table, key, version, lsn-or-0)

  for (const OutputEvent& e : events) {
    TableKey k{e.table, e.key};
    auto ident = std::make_tuple(e.table, e.key, e.version,
                                 e.lsn.value_or(0));
    auto it = high.find(k);
    if (it != high.end() && e.version < it->second.first) {
      bool duplicate = allow_redelivery && seen.contains(ident);
      if (!duplicate && out.size() < kMaxEvidence) {
        out.push_back({"no-time-travel",
                       event_brief(e) + " regresses below v" +
                           std::to_string(it->second.first) + " (seq " +
                           std::to_string(it->second.second) + ")"});
      } else if (!duplicate) {
        out.push_back({"no-time-travel", "further regressions elided"});
        break;
      }
    }
    if (it == high.end() || e.version > it->second.first) {
      high[k] = {e.version, e.seq};
    }
    seen.insert(ident);
  }
  return out;
}

namespace {

bool same_payload(const OutputEvent& got, const LogEvent& want) {
  return got.table == want.table && got.op == want.op && got.key == want.key &&
         got.row == want.row && got.version == want.version &&
         got.lsn == std::optional<Lsn>(want.lsn);
}

std::string state_entry_brief(const TableKey& k,
                              const std::pair<RowImage, std::uint64_t>& v) {
  return k.first + " " + display_key(k.second) + " v" + std::to_string(v.second);
}

}  // namespace

std::vector<Violation> check_completeness(
    const std::vector<OutputEvent>& events, const CompletenessSpec& spec,
    std::string* diff_out) {
  std::vector<Violation> out;

  // Expected committed events, in order.
  std::vector<const LogEvent*> expected;
  for (const LogEvent& e : *spec.committed) {
    if (!e.is_watermark && e.lsn > spec.capture_start) expected.push_back(&e);
  }
  std::map<Lsn, std::size_t> index_by_lsn;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    index_by_lsn[expected[i]->lsn] = i;
  }

  auto epochs = split_epochs(events);
  if (!spec.at_least_once && epochs.size() > 1) {
    out.push_back({"log-capture", "unexpected seq restart: " +
                                      std::to_string(epochs.size()) +
                                      " epochs in a crash-free run"});
  }

  // Seq must advance one at a time within an epoch.
  for (const auto& epoch : epochs) {
    for (std::size_t i = 1; i < epoch.size(); ++i) {
      if (epoch[i].seq != epoch[i - 1].seq + 1) {
        out.push_back({"log-capture",
                       "seq gap: " + std::to_string(epoch[i - 1].seq) +
                           " followed by " + std::to_string(epoch[i].seq)});
        break;
      }
    }
  }

  // Per epoch, log-origin events must be a contiguous ascending slice of the
  // committed history; epochs together must cover it entirely.
  std::vector<bool> covered(expected.size(), false);
  for (const auto& epoch : epochs) {
    std::optional<std::size_t> cursor;
    for (const OutputEvent& e : epoch) {
      if (e.origin != Origin::log) continue;
      auto at = index_by_lsn.find(e.lsn.value());
      if (at == index_by_lsn.end()) {
        out.push_back({"log-capture",
                       event_brief(e) + " was never committed at that lsn"});
        continue;
      }
      std::size_t idx = at->second;
      if (cursor && idx != *cursor + 1) {
        out.push_back({"log-capture",
                       "lsn " + std::to_string(e.lsn.value()) +
                           " breaks contiguous order after lsn " +
                           std::to_string(expected[*cursor]->lsn)});
      }
      if (!same_payload(e, *expected[idx])) {
        out.push_back({"log-capture",
                       event_brief(e) + " differs from the committed event"});
      }
      if (covered[idx] && !spec.at_least_once) {
        out.push_back({"log-capture", event_brief(e) + " delivered twice"});
      }
      covered[idx] = true;
      cursor = idx;
      if (out.size() >= kMaxEvidence) break;
    }
    if (out.size() >= kMaxEvidence) break;
  }
  std::size_t missing = 0;
  for (std::size_t i = 0; i < covered.size(); ++i) {
    if (!covered[i] && out.size() < kMaxEvidence) {
      out.push_back({"log-capture",
                     "committed lsn " + std::to_string(expected[i]->lsn) +
                         " (" + expected[i]->table + " " +
                         display_key(expected[i]->key) + ") never delivered"});
    }
    missing += covered[i] ? 0 : 1;
  }
  if (missing > 0 && out.size() >= kMaxEvidence) {
    out.push_back({"log-capture",
                   std::to_string(missing) + " committed events never delivered"});
  }

  // State: materialize the sink and compare with the expected final state.
  StateMap materialized = materialize(events);

  StateMap expected_state;
  std::map<TableKey, std::uint64_t, TableKeyLess> replay_versions;
  for (const LogEvent* e : expected) {
    TableKey k{e->table, e->key};
    if (e->op == Op::del) {
      expected_state.erase(k);
    } else {
      expected_state.insert_or_assign(k, std::make_pair(*e->row, e->version));
    }
  }
  for (const auto& [k, v] : *spec.oracle) {
    if (spec.fully_dumped_tables.contains(k.first)) {
      expected_state.insert_or_assign(k, v);
    }
  }
  for (const TableKey& k : spec.dumped_keys) {
    auto it = spec.oracle->find(k);
    if (it != spec.oracle->end()) {
      expected_state.insert_or_assign(k, it->second);
    }
  }

  std::ostringstream diff;
  std::size_t diffs = 0;
  auto flag_diff = [&](const std::string& line) {
    ++diffs;
    if (diffs <= kMaxEvidence) diff << line << '\n';
  };

  if (spec.expect_exact_state) {
    for (const auto& [k, v] : expected_state) {
      auto it = materialized.find(k);
      if (it == materialized.end()) {
        flag_diff("missing: " + state_entry_brief(k, v));
      } else if (it->second != v) {
        flag_diff("mismatch: " + state_entry_brief(k, v) + " materialized as " +
                  state_entry_brief(k, it->second));
      }
    }
    for (const auto& [k, v] : materialized) {
      if (!expected_state.contains(k)) {
        flag_diff("extra: " + state_entry_brief(k, v));
      }
    }
  } else {
    // Incomplete dump: the sink may hold any subset of the oracle rows on
    // top of the replayed log state, but nothing stale and nothing extra.
    for (const auto& [k, v] : materialized) {
      auto it = spec.oracle->find(k);
      if (it == spec.oracle->end()) {
        flag_diff("extra: " + state_entry_brief(k, v));
      } else if (it->second != v) {
        flag_diff("mismatch vs oracle: " + state_entry_brief(k, it->second) +
                  " materialized as " + state_entry_brief(k, v));
      }
    }
    for (const auto& [k, v] : expected_state) {
      auto it = materialized.find(k);
      if (it == materialized.end()) {
        flag_diff("missing replayed row: " + state_entry_brief(k, v));
      } else if (it->second != v) {
        flag_diff("mismatch: " + state_entry_brief(k, v) + " materialized as " +
                  state_entry_brief(k, it->second));
      }
    }
  }

  if (diffs > kMaxEvidence) {
    diff << "... " << (diffs - kMaxEvidence) << " more differences\n";
  }
  if (diffs > 0) {
    out.push_back({"materialization",
                   std::to_string(diffs) + " state differences vs oracle"});
  }
  if (diff_out != nullptr) *diff_out = diff.str();
  return out;
}

std::vector<Violation> check_non_stall(
    const std::vector<PauseEpisode>& episodes) {
  std::vector<Violation> out;
  for (const PauseEpisode& ep : episodes) {
    if (ep.ops() != 3) {
      out.push_back({"non-stall",
                     "pause episode at op " + std::to_string(ep.begin_op) +
                         " spans " + std::to_string(ep.ops()) +
                         " engine ops, expected 3 (lw write, select, hw write)"});
    }
  }
  return out;
}

std::vector<Violation> check_window_dedup(
    const std::vector<WindowTrace>& traces) {
  std::vector<Violation> out;
  for (std::size_t wi = 0; wi < traces.size(); ++wi) {
    const WindowTrace& t = traces[wi];
    std::set<PrimaryKey, KeyLess> window_keys(t.window_event_keys.begin(),
                                              t.window_event_keys.end());
    std::set<PrimaryKey, KeyLess> emitted(t.emitted_keys.begin(),
                                          t.emitted_keys.end());

    for (const PrimaryKey& k : t.emitted_keys) {
      if (window_keys.contains(k)) {
        out.push_back({"window-dedup",
                       "window " + std::to_string(wi) + " (" + t.table +
                           ") emitted " + display_key(k) +
                           " despite a log event inside the window"});
      }
    }
    // Emitted must be exactly the selected keys minus the collided ones.
    for (const PrimaryKey& k : t.chunk_keys) {
      bool collided = window_keys.contains(k);
      if (!collided && !emitted.contains(k)) {
        out.push_back({"window-dedup",
                       "window " + std::to_string(wi) + " (" + t.table +
                           ") dropped " + display_key(k) +
                           " without a colliding log event"});
      }
    }
    if (!std::is_sorted(t.emitted_keys.begin(), t.emitted_keys.end(),
                        KeyLess{})) {
      out.push_back({"window-dedup",
                     "window " + std::to_string(wi) +
                         " emitted rows out of ascending key order"});
    }
    if (out.size() >= kMaxEvidence) break;
  }
  return out;
}

std::vector<Violation> check_no_locks(const std::vector<LockRecord>& journal) {
  std::vector<Violation> out;
  for (const LockRecord& r : journal) {
    if (!r.table.starts_with(kReservedPrefix)) {
      out.push_back({"no-locks",
                     "table lock on '" + r.table + "' taken by '" + r.owner +
                         "' at lsn " + std::to_string(r.at_lsn)});
    }
  }
  return out;
}

namespace {

std::string key_or_none(const std::optional<PrimaryKey>& k) {
  return k ? display_key(*k) : "<none>";
}

}  // namespace

std::vector<Violation> check_chunk_progression(
    const std::vector<ChunkJournalEntry>& journal) {
  std::vector<Violation> out;
  // Per table: every chunk must start from the last checkpointed key; a
  // chunk that was checkpointed advances that key and is never re-run.
  std::map<std::string, std::optional<PrimaryKey>> committed_after;
  std::map<std::string, bool> seen;
  for (std::size_t i = 0; i < journal.size(); ++i) {
    const ChunkJournalEntry& e = journal[i];
    if (!seen[e.table]) {
      seen[e.table] = true;
      committed_after[e.table] = std::nullopt;
    }
    const auto& want = committed_after[e.table];
    if (e.after != want) {
      out.push_back({"chunk-progression",
                     "chunk " + std::to_string(i) + " of " + e.table +
                         " selected after " + key_or_none(e.after) +
                         ", expected after " + key_or_none(want)});
    }
    if (e.checkpointed && !e.exhausted) {
      committed_after[e.table] = e.last_key;
    }
  }
  return out;
}

std::vector<Violation> check_redelivery_bounds(
    const std::vector<WindowTrace>& traces) {
  std::vector<Violation> out;
  struct Emission {
    std::size_t window;
    std::optional<PrimaryKey> after;
  };
  std::map<TableKey, std::vector<Emission>, TableKeyLess> emissions;
  for (std::size_t wi = 0; wi < traces.size(); ++wi) {
    for (const PrimaryKey& k : traces[wi].emitted_keys) {
      emissions[TableKey{traces[wi].table, k}].push_back(
          Emission{wi, traces[wi].after});
    }
  }
  for (const auto& [key, list] : emissions) {
    if (list.size() < 2) continue;
    for (std::size_t i = 1; i < list.size(); ++i) {
      if (list[i].after != list[0].after) {
        out.push_back({"redelivery-bound",
                       key.first + " " + display_key(key.second) +
                           " dump-emitted by windows with different chunk "
                           "starts; more than the in-flight chunk was re-run"});
        break;
      }
    }
    if (out.size() >= kMaxEvidence) break;
  }
  return out;
}

std::vector<Violation> check_stream_wellformed(
    const std::vector<OutputEvent>& events, bool allow_redelivery) {
  std::vector<Violation> out;
  auto epochs = split_epochs(events);
  if (!allow_redelivery && epochs.size() > 1) {
    out.push_back({"stream", "unexpected seq restart: " +
                                 std::to_string(epochs.size()) + " epochs"});
  }
  for (const auto& epoch : epochs) {
    std::optional<Lsn> last_lsn;
    for (std::size_t i = 0; i < epoch.size(); ++i) {
      const OutputEvent& e = epoch[i];
      if (i > 0 && e.seq != epoch[i - 1].seq + 1) {
        out.push_back({"stream", "seq gap: " +
                                     std::to_string(epoch[i - 1].seq) +
                                     " followed by " + std::to_string(e.seq)});
      }
      if (e.origin == Origin::log) {
        if (last_lsn && e.lsn.value() <= *last_lsn) {
          out.push_back({"stream",
                         "log lsn " + std::to_string(e.lsn.value()) +
                             " not above previous lsn " +
                             std::to_string(*last_lsn)});
        }
        last_lsn = e.lsn;
      } else if (e.lsn || e.op != Op::update || !e.row) {
        out.push_back({"stream", event_brief(e) + " breaks dump-row shape"});
      }
      if (out.size() >= kMaxEvidence) return out;
    }
  }
  return out;
}

std::vector<Violation> check_lease_exclusivity(
    const std::vector<LeaseJournalEntry>& journal) {
  std::vector<Violation> out;
  struct Interval {
    std::uint64_t start{};
    std::uint64_t end{};
    std::string instance;
  };
  std::map<std::uint64_t, Interval> by_epoch;
  for (const LeaseJournalEntry& e : journal) {
    switch (e.kind) {
      case LeaseJournalEntry::Kind::granted:
        by_epoch[e.epoch] = Interval{e.at, e.expiry, e.instance_id};
        break;
      case LeaseJournalEntry::Kind::renewed:
        if (by_epoch.contains(e.epoch)) by_epoch[e.epoch].end = e.expiry;
        break;
      case LeaseJournalEntry::Kind::released:
        if (by_epoch.contains(e.epoch)) {
          by_epoch[e.epoch].end = std::min(by_epoch[e.epoch].end, e.at);
        }
        break;
      case LeaseJournalEntry::Kind::rejected:
        break;
    }
  }
  std::optional<std::pair<std::uint64_t, Interval>> prev;
  for (const auto& [epoch, interval] : by_epoch) {
    if (prev && interval.start < prev->second.end) {
      out.push_back({"lease-exclusivity",
                     "epoch " + std::to_string(epoch) + " (" +
                         interval.instance + ") started at " +
                         std::to_string(interval.start) +
                         " before epoch " + std::to_string(prev->first) +
                         " ended at " + std::to_string(prev->second.end)});
    }
    prev = {epoch, interval};
  }
  return out;
}

}  // namespace dblog
