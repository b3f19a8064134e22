#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dblog/sinks.hpp"
#include "dblog/source_db.hpp"
#include "dblog/types.hpp"

namespace dblog {

struct WorkloadOp {
  bool is_delete{};
  std::string table;
  PrimaryKey key;
  RowImage row;  // empty for delete

  bool operator==(const WorkloadOp&) const = default;
};

using StateMap =
    std::map<TableKey, std::pair<RowImage, std::uint64_t>, TableKeyLess>;

struct TableSpec {
  std::string name;
  std::size_t pk_arity = 1;
  std::size_t value_columns = 2;
  std::size_t initial_rows = 0;
};

struct OpMix {
  double create_w = 0.5;
  double update_w = 0.35;
  double delete_w = 0.15;
};

// Pre-generated op streams. Writers own disjoint key spaces, so any
// interleaving of the streams is a valid committed history; the loader
// stream installs initial rows before capture starts.
struct Workload {
  std::vector<WorkloadOp> initial;
  std::vector<std::vector<WorkloadOp>> writer_ops;
};

std::vector<std::string> table_schema_columns(const TableSpec& spec);
std::vector<std::string> table_pk_columns(const TableSpec& spec);
void create_tables(SimDatabase& db, const std::vector<TableSpec>& tables);

// Seeded and replayable: the same seed and shape produce identical streams.
Workload generate_workload(const std::vector<TableSpec>& tables,
                           std::size_t writers, std::size_t total_ops,
                           const OpMix& mix, std::uint64_t seed);

// Independent referee: applies the committed op sequence to a plain map,
// bypassing the simulator and the engine entirely. Versions are recounted
// from scratch (one increment per op on the key, including deletes).
StateMap oracle_final_state(const std::vector<WorkloadOp>& journal);

void apply_op(SimDatabase& db, const WorkloadOp& op);

// Line format: `put <table> <key-json> <row-json>` / `del <table> <key-json>`.
void write_workload_file(const std::filesystem::path& path,
                         const std::vector<WorkloadOp>& journal);
std::vector<WorkloadOp> read_workload_file(const std::filesystem::path& path);

}  // namespace dblog
