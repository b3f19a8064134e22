#include "dblog/types.hpp"

#include <cstdio>

namespace dblog {

Ordering compare_keys(const PrimaryKey& a, const PrimaryKey& b) {
  if (a.components.size() != b.components.size()) {
    throw KeyCompareError("primary key arity mismatch: " +
                          std::to_string(a.components.size()) + " vs " +
                          std::to_string(b.components.size()));
  }
  for (std::size_t i = 0; i < a.components.size(); ++i) {
    const KeyComponent& x = a.components[i];
    const KeyComponent& y = b.components[i];
    if (x.index() != y.index()) {
      throw KeyCompareError("primary key component type mismatch at position " +
                            std::to_string(i));
    }
    if (x < y) return Ordering::less;
    if (y < x) return Ordering::greater;
  }
  return Ordering::equal;
}

const Value* RowImage::find(std::string_view name) const {
  for (const auto& [col, value] : columns) {
    if (col == name) return &value;
  }
  return nullptr;
}

std::string_view to_string(Op op) {
  switch (op) {
    case Op::create:
      return "create";
    case Op::update:
      return "update";
    case Op::del:
      return "delete";
  }
  return "?";
}

std::optional<Op> parse_op(std::string_view s) {
  if (s == "create") return Op::create;
  if (s == "update") return Op::update;
  if (s == "delete") return Op::del;
  return std::nullopt;
}

std::string_view to_string(Origin o) {
  return o == Origin::log ? "log" : "dump";
}

std::string Uuid::to_string() const {
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(36);
  for (std::size_t i = 0; i < 16; ++i) {
    if (i == 4 || i == 6 || i == 8 || i == 10) out.push_back('-');
    out.push_back(hex[bytes[i] >> 4]);
    out.push_back(hex[bytes[i] & 0x0F]);
  }
  return out;
}

namespace {
int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

std::optional<Uuid> Uuid::parse(std::string_view s) {
  if (s.size() != 36) return std::nullopt;
  Uuid u;
  std::size_t byte = 0;
  for (std::size_t i = 0; i < 36;) {
    if (i == 8 || i == 13 || i == 18 || i == 23) {
      if (s[i] != '-') return std::nullopt;
      ++i;
      continue;
    }
    int hi = hex_digit(s[i]);
    int lo = hex_digit(s[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    u.bytes[byte++] = static_cast<std::uint8_t>((hi << 4) | lo);
    i += 2;
  }
  return u;
}

bool Uuid::is_nil() const {
  for (auto b : bytes) {
    if (b != 0) return false;
  }
  return true;
}

Uuid UuidGenerator::next() {
  std::lock_guard lock(mu_);
  Uuid u;
  std::uint64_t hi = rng_();
  std::uint64_t lo = rng_();
  for (int i = 0; i < 8; ++i) {
    u.bytes[i] = static_cast<std::uint8_t>(hi >> (8 * i));
    u.bytes[8 + i] = static_cast<std::uint8_t>(lo >> (8 * i));
  }
  u.bytes[6] = static_cast<std::uint8_t>((u.bytes[6] & 0x0F) | 0x40);
  u.bytes[8] = static_cast<std::uint8_t>((u.bytes[8] & 0x3F) | 0x80);
  return u;
}

OutputEvent OutputEvent::dump_row(std::string table, PrimaryKey key,
                                  RowImage row, std::uint64_t version) {
  if (row.columns.empty()) {
    throw ContractViolation("dump row for table '" + table +
                            "' must carry a full row image");
  }
  OutputEvent e;
  e.table = std::move(table);
  e.op = Op::update;
  e.key = std::move(key);
  e.row = std::move(row);
  e.origin = Origin::dump;
  e.lsn = std::nullopt;
  e.version = version;
  return e;
}

WatermarkPair make_watermark_pair(UuidGenerator& gen) {
  WatermarkPair pair{gen.next(), gen.next()};
  while (pair.hw == pair.lw) pair.hw = gen.next();
  return pair;
}

}  // namespace dblog
