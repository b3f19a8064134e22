#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

#include "dblog/types.hpp"

namespace dblog {

using ojson = nlohmann::ordered_json;

// Canonical line format, one event per line, fields in fixed order:
// seq, table, op, key, row, origin, lsn, version. `lsn` present only for
// log-origin events, `row` absent for deletes. No embedded newlines.
std::string encode_output_event(const OutputEvent& e);

// Inverse of encode_output_event. Accepts reordered fields but rejects
// unknown ones. Throws DecodeError naming the first offending field.
OutputEvent decode_output_event(std::string_view line);

// JSON helpers shared by the codec, workload files, and state records.
ojson value_to_json(const Value& v);
Value value_from_json(const ojson& j, const std::string& field);
ojson key_to_json(const PrimaryKey& k);
PrimaryKey key_from_json(const ojson& j, const std::string& field);
ojson row_to_json(const RowImage& r);
RowImage row_from_json(const ojson& j, const std::string& field);

std::string display_key(const PrimaryKey& k);

}  // namespace dblog
