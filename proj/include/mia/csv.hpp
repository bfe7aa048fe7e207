#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mia::csv {

// Quotes a field only when it contains a comma, quote or line break.
std::string escape(std::string_view field);

// RFC 4180-ish reader: quoted fields, doubled quotes, LF or CRLF rows.
// A trailing newline does not produce an empty row.
std::vector<std::vector<std::string>> parse(std::string_view text);

// Strict conversion; throws SchemaError on trailing garbage.
double to_double(const std::string& field);

}  // namespace mia::csv
