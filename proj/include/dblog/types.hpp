#pragma once

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace dblog {

// Offset of an event on the source transaction log. Strictly increasing
// across committed events of one source.
using Lsn = std::uint64_t;

// Scalar cell value. Rows carry full images, no nested values.
using Value = std::variant<std::nullptr_t, std::int64_t, bool, std::string>;

// Key components are restricted to integer and text.
using KeyComponent = std::variant<std::int64_t, std::string>;

struct DblogError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Precondition or protocol breach by a caller; programming error, not input.
struct ContractViolation : DblogError {
  using DblogError::DblogError;
};

struct SourceError : DblogError {
  using DblogError::DblogError;
};

struct ConfigError : DblogError {
  using DblogError::DblogError;
};

struct KeyCompareError : DblogError {
  using DblogError::DblogError;
};

struct DecodeError : DblogError {
  std::string field;
  DecodeError(std::string field_name, const std::string& message)
      : DblogError("decode error at field '" + field_name + "': " + message),
        field(std::move(field_name)) {}
};

struct SinkError : DblogError {
  bool retryable;
  SinkError(const std::string& message, bool retry)
      : DblogError(message), retryable(retry) {}
};

struct StateStoreError : DblogError {
  using DblogError::DblogError;
};

// Write stamped with an epoch older than the current leader's.
struct FencingError : StateStoreError {
  using StateStoreError::StateStoreError;
};

struct LeaseError : DblogError {
  using DblogError::DblogError;
};

enum class Ordering { less, equal, greater };

struct PrimaryKey {
  std::vector<KeyComponent> components;

  bool operator==(const PrimaryKey&) const = default;
};

// Total lexicographic order over equal-arity keys: integers by value, text
// by byte order. Throws KeyCompareError on arity or component-type mismatch.
Ordering compare_keys(const PrimaryKey& a, const PrimaryKey& b);

struct KeyLess {
  bool operator()(const PrimaryKey& a, const PrimaryKey& b) const {
    return compare_keys(a, b) == Ordering::less;
  }
};

struct RowImage {
  // Column name/value pairs in schema order. Contains every column of the
  // owning table's schema.
  std::vector<std::pair<std::string, Value>> columns;

  const Value* find(std::string_view name) const;
  bool operator==(const RowImage&) const = default;
};

enum class Op { create, update, del };

std::string_view to_string(Op op);
std::optional<Op> parse_op(std::string_view s);

struct Uuid {
  std::array<std::uint8_t, 16> bytes{};

  std::string to_string() const;
  static std::optional<Uuid> parse(std::string_view s);
  bool is_nil() const;
  auto operator<=>(const Uuid&) const = default;
};

// Seeded v4-style UUID source. Window markers and dump ids all come from
// here so deterministic runs replay identically.
class UuidGenerator {
 public:
  explicit UuidGenerator(std::uint64_t seed) : rng_(seed) {}
  Uuid next();

 private:
  std::mutex mu_;
  std::mt19937_64 rng_;
};

// One committed row change read off the source log.
struct LogEvent {
  Lsn lsn{};
  std::string table;
  Op op{Op::create};
  PrimaryKey key;
  std::optional<RowImage> row;  // absent for delete
  std::uint64_t version{};      // per-key write counter, never resets
  bool is_watermark{false};
  std::optional<Uuid> watermark_value;  // present iff is_watermark
};

enum class Origin { log, dump };

std::string_view to_string(Origin o);

// Unified delivery format; identical shape whether the event came from the
// transaction log or from a chunk selection.
struct OutputEvent {
  std::uint64_t seq{};
  std::string table;
  Op op{Op::create};
  PrimaryKey key;
  std::optional<RowImage> row;
  Origin origin{Origin::log};
  std::optional<Lsn> lsn;  // present iff origin == log
  std::uint64_t version{};

  // Dump rows have upsert semantics: op update, full row image, no log
  // position. Throws ContractViolation if the invariants cannot hold.
  static OutputEvent dump_row(std::string table, PrimaryKey key, RowImage row,
                              std::uint64_t version);
};

struct WatermarkPair {
  Uuid lw;
  Uuid hw;
};

// Draws two distinct fresh UUIDs.
WatermarkPair make_watermark_pair(UuidGenerator& gen);

}  // namespace dblog
