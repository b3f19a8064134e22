#include "dblog/workload.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "dblog/codec.hpp"

namespace dblog {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<std::string> table_pk_columns(const TableSpec& spec) {
  std::vector<std::string> cols;
  for (std::size_t i = 0; i < spec.pk_arity; ++i) {
    cols.push_back("k" + std::to_string(i + 1));
  }
  return cols;
}

std::vector<std::string> table_schema_columns(const TableSpec& spec) {
  std::vector<std::string> cols = table_pk_columns(spec);
  for (std::size_t i = 0; i < spec.value_columns; ++i) {
    cols.push_back("v" + std::to_string(i + 1));
  }
  return cols;
}

void create_tables(SimDatabase& db, const std::vector<TableSpec>& tables) {
  for (const TableSpec& spec : tables) {
    if (spec.pk_arity < 1 || spec.pk_arity > 3) {
      throw ConfigError("pk_arity must be in [1,3]");
    }
    db.create_table(spec.name, table_schema_columns(spec),
                    table_pk_columns(spec));
  }
}

namespace {

// Per-writer generation state for one table.
struct KeySpace {
  std::int64_t next_ordinal = 0;
  std::vector<PrimaryKey> live;
};

PrimaryKey make_key(const TableSpec& spec, std::size_t writer,
                    std::size_t writers, std::int64_t ordinal) {
  // First component is unique across writers; trailing components make the
  // key composite without affecting ownership.
  std::int64_t base = static_cast<std::int64_t>(writer) +
                      static_cast<std::int64_t>(writers) * ordinal;
  PrimaryKey key;
  key.components.emplace_back(base);
  if (spec.pk_arity >= 2) {
    key.components.emplace_back("p" + std::to_string(base % 7));
  }
  if (spec.pk_arity >= 3) {
    key.components.emplace_back(base % 3);
  }
  return key;
}

Value random_value(std::mt19937_64& rng) {
  switch (rng() % 8) {
    case 0:
      return nullptr;
    case 1:
      return (rng() % 2) == 0;
    case 2:
    case 3:
      return "s" + std::to_string(rng() % 1000);
    default:
      return static_cast<std::int64_t>(rng() % 100000);
  }
}

RowImage make_row(const TableSpec& spec, const PrimaryKey& key,
                  std::mt19937_64& rng) {
  RowImage row;
  auto pk_cols = table_pk_columns(spec);
  for (std::size_t i = 0; i < pk_cols.size(); ++i) {
    const KeyComponent& c = key.components[i];
    if (std::holds_alternative<std::int64_t>(c)) {
      row.columns.emplace_back(pk_cols[i], std::get<std::int64_t>(c));
    } else {
      row.columns.emplace_back(pk_cols[i], std::get<std::string>(c));
    }
  }
  for (std::size_t i = 0; i < spec.value_columns; ++i) {
    row.columns.emplace_back("v" + std::to_string(i + 1), random_value(rng));
  }
  return row;
}

}  // namespace

Workload generate_workload(const std::vector<TableSpec>& tables,
                           std::size_t writers, std::size_t total_ops,
                           const OpMix& mix, std::uint64_t seed) {
  if (tables.empty()) throw ConfigError("workload needs at least one table");
  if (writers < 1) throw ConfigError("workload needs at least one writer");

  Workload wl;
  wl.writer_ops.resize(writers);

  // spaces[writer][table]
  std::vector<std::vector<KeySpace>> spaces(writers,
                                            std::vector<KeySpace>(tables.size()));

  std::mt19937_64 loader_rng(splitmix64(seed));
  for (std::size_t ti = 0; ti < tables.size(); ++ti) {
    const TableSpec& spec = tables[ti];
    for (std::size_t i = 0; i < spec.initial_rows; ++i) {
      std::size_t w = i % writers;
      KeySpace& space = spaces[w][ti];
      PrimaryKey key = make_key(spec, w, writers, space.next_ordinal++);
      WorkloadOp op;
      op.table = spec.name;
      op.row = make_row(spec, key, loader_rng);
      op.key = std::move(key);
      space.live.push_back(op.key);
      wl.initial.push_back(std::move(op));
    }
  }

  double total_w = mix.create_w + mix.update_w + mix.delete_w;
  if (total_w <= 0) throw ConfigError("op mix weights must sum to > 0");

  for (std::size_t w = 0; w < writers; ++w) {
    std::mt19937_64 rng(splitmix64(seed ^ (0x517cc1b727220a95ULL * (w + 1))));
    std::size_t ops = total_ops / writers + (w < total_ops % writers ? 1 : 0);
    auto& stream = wl.writer_ops[w];
    stream.reserve(ops);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (std::size_t i = 0; i < ops; ++i) {
      std::size_t ti = rng() % tables.size();
      const TableSpec& spec = tables[ti];
      KeySpace& space = spaces[w][ti];

      double pick = unit(rng) * total_w;
      bool want_create = pick < mix.create_w;
      bool want_delete = pick >= mix.create_w + mix.update_w;
      if (space.live.empty()) want_create = true, want_delete = false;

      WorkloadOp op;
      op.table = spec.name;
      if (want_create) {
        PrimaryKey key = make_key(spec, w, writers, space.next_ordinal++);
        op.row = make_row(spec, key, rng);
        op.key = std::move(key);
        space.live.push_back(op.key);
      } else {
        std::size_t idx = rng() % space.live.size();
        op.key = space.live[idx];
        if (want_delete) {
          op.is_delete = true;
          space.live[idx] = space.live.back();
          space.live.pop_back();
        } else {
          op.row = make_row(spec, op.key, rng);
        }
      }
      stream.push_back(std::move(op));
    }
  }
  return wl;
}

StateMap oracle_final_state(const std::vector<WorkloadOp>& journal) {
  StateMap state;
  std::map<TableKey, std::uint64_t, TableKeyLess> versions;
  for (const WorkloadOp& op : journal) {
    TableKey k{op.table, op.key};
    std::uint64_t v = ++versions[k];
    if (op.is_delete) {
      state.erase(k);
    } else {
      state.insert_or_assign(k, std::make_pair(op.row, v));
    }
  }
  return state;
}

void apply_op(SimDatabase& db, const WorkloadOp& op) {
  if (op.is_delete) {
    db.remove(op.table, op.key);
  } else {
    db.put(op.table, op.key, op.row);
  }
}

void write_workload_file(const std::filesystem::path& path,
                         const std::vector<WorkloadOp>& journal) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open workload file '" + path.string() + "'");
  for (const WorkloadOp& op : journal) {
    if (op.is_delete) {
      out << "del " << op.table << ' ' << key_to_json(op.key).dump() << '\n';
    } else {
      out << "put " << op.table << ' ' << key_to_json(op.key).dump() << ' '
          << row_to_json(op.row).dump() << '\n';
    }
  }
}

std::vector<WorkloadOp> read_workload_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open workload file '" + path.string() + "'");
  std::vector<WorkloadOp> ops;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string verb, table;
    ss >> verb >> table;
    if ((verb != "put" && verb != "del") || table.empty()) {
      throw ConfigError("workload line " + std::to_string(lineno) +
                        ": expected 'put' or 'del' with a table name");
    }
    WorkloadOp op;
    op.table = table;
    try {
      ojson jkey;
      ss >> jkey;
      op.key = key_from_json(jkey, "key");
      if (verb == "put") {
        ojson jrow;
        ss >> jrow;
        op.row = row_from_json(jrow, "row");
      } else {
        op.is_delete = true;
      }
    } catch (const std::exception& e) {
      throw ConfigError("workload line " + std::to_string(lineno) + ": " +
                        e.what());
    }
    ops.push_back(std::move(op));
  }
  return ops;
}

}  // namespace dblog
