#include "dblog/codec.hpp"

#include <set>

namespace dblog {

ojson value_to_json(const Value& v) {
  return std::visit(
      [](const auto& x) -> ojson {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::nullptr_t>) {
          return nullptr;
        } else {
          return x;
        }
      },
      v);
}

Value value_from_json(const ojson& j, const std::string& field) {
  if (j.is_null()) return nullptr;
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer() && !j.is_number_float()) return j.get<std::int64_t>();
  if (j.is_string()) return j.get<std::string>();
  throw DecodeError(field, "expected integer, text, boolean, or null");
}

ojson key_to_json(const PrimaryKey& k) {
  ojson arr = ojson::array();
  for (const KeyComponent& c : k.components) {
    if (std::holds_alternative<std::int64_t>(c)) {
      arr.push_back(std::get<std::int64_t>(c));
    } else {
      arr.push_back(std::get<std::string>(c));
    }
  }
  return arr;
}

PrimaryKey key_from_json(const ojson& j, const std::string& field) {
  if (!j.is_array()) throw DecodeError(field, "expected array");
  if (j.empty()) throw DecodeError(field, "key must be non-empty");
  PrimaryKey k;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const ojson& c = j[i];
    if (c.is_number_integer() && !c.is_number_float()) {
      k.components.emplace_back(c.get<std::int64_t>());
    } else if (c.is_string()) {
      k.components.emplace_back(c.get<std::string>());
    } else {
      throw DecodeError(field + "[" + std::to_string(i) + "]",
                        "key component must be integer or text");
    }
  }
  return k;
}

ojson row_to_json(const RowImage& r) {
  ojson obj = ojson::object();
  for (const auto& [name, value] : r.columns) {
    obj[name] = value_to_json(value);
  }
  return obj;
}

RowImage row_from_json(const ojson& j, const std::string& field) {
  if (!j.is_object()) throw DecodeError(field, "expected object");
  RowImage r;
  for (const auto& [name, value] : j.items()) {
    r.columns.emplace_back(name, value_from_json(value, field + "." + name));
  }
  return r;
}

std::string display_key(const PrimaryKey& k) {
  return key_to_json(k).dump();
}

std::string encode_output_event(const OutputEvent& e) {
  ojson j = ojson::object();
  j["seq"] = e.seq;
  j["table"] = e.table;
  j["op"] = std::string(to_string(e.op));
  j["key"] = key_to_json(e.key);
  if (e.row) j["row"] = row_to_json(*e.row);
  j["origin"] = std::string(to_string(e.origin));
  if (e.origin == Origin::log) j["lsn"] = e.lsn.value();
  j["version"] = e.version;
  return j.dump();
}

OutputEvent decode_output_event(std::string_view line) {
  ojson j = ojson::parse(line, nullptr, false);
  if (j.is_discarded()) throw DecodeError("line", "not valid JSON");
  if (!j.is_object()) throw DecodeError("line", "expected object");

  static const std::set<std::string> known = {"seq", "table", "op",  "key",
                                              "row", "origin", "lsn", "version"};
  // Field checks run in canonical order so the first offending field is
  // reported deterministically.
  for (const char* required : {"seq", "table", "op", "key", "origin", "version"}) {
    if (!j.contains(required)) throw DecodeError(required, "missing");
  }

  OutputEvent e;
  if (!j["seq"].is_number_unsigned()) throw DecodeError("seq", "expected unsigned integer");
  e.seq = j["seq"].get<std::uint64_t>();

  if (!j["table"].is_string()) throw DecodeError("table", "expected string");
  e.table = j["table"].get<std::string>();
  if (e.table.empty()) throw DecodeError("table", "must be non-empty");

  if (!j["op"].is_string()) throw DecodeError("op", "expected string");
  auto op = parse_op(j["op"].get<std::string>());
  if (!op) throw DecodeError("op", "unknown op '" + j["op"].get<std::string>() + "'");
  e.op = *op;

  e.key = key_from_json(j["key"], "key");

  if (j.contains("row")) {
    if (e.op == Op::del) throw DecodeError("row", "delete events carry no row image");
    e.row = row_from_json(j["row"], "row");
  } else if (e.op != Op::del) {
    throw DecodeError("row", "missing for op '" + std::string(to_string(e.op)) + "'");
  }

  if (!j["origin"].is_string()) throw DecodeError("origin", "expected string");
  std::string origin = j["origin"].get<std::string>();
  if (origin == "log") {
    e.origin = Origin::log;
    if (!j.contains("lsn")) throw DecodeError("lsn", "required for log origin");
    if (!j["lsn"].is_number_unsigned()) throw DecodeError("lsn", "expected unsigned integer");
    e.lsn = j["lsn"].get<std::uint64_t>();
  } else if (origin == "dump") {
    e.origin = Origin::dump;
    if (j.contains("lsn")) throw DecodeError("lsn", "forbidden for dump origin");
    if (e.op != Op::update) throw DecodeError("op", "dump origin implies op update");
  } else {
    throw DecodeError("origin", "unknown origin '" + origin + "'");
  }

  if (!j["version"].is_number_unsigned()) throw DecodeError("version", "expected unsigned integer");
  e.version = j["version"].get<std::uint64_t>();

  for (const auto& [name, value] : j.items()) {
    (void)value;
    if (!known.contains(name)) throw DecodeError(name, "unknown field");
  }
  return e;
}

}  // namespace dblog
