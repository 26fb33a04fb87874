#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fairaudit::csv {

using Record = std::vector<std::string>;

/// RFC-4180 reader: quoted fields, doubled quotes, embedded CR/LF. A trailing
/// newline does not produce an empty record. Throws kParse on an unterminated
/// quote.
std::vector<Record> parse(std::string_view text);

std::vector<Record> read_file(const std::filesystem::path& path);

/// Quotes only fields that need it.
std::string escape(std::string_view field);

void write_record(std::ostream& out, const Record& record);

/// Shortest text that parses back to the same double.
std::string format_double(double value);

}  // namespace fairaudit::csv
