#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace em::csv {

using Row = std::vector<std::string>;

struct Table {
  Row header;
  std::vector<Row> rows;
  // 1-based line on which each row starts, for error messages.
  std::vector<std::size_t> lines;
};

/// RFC 4180 reader: quoted fields may hold commas, doubled quotes and line
/// breaks. A leading UTF-8 byte-order mark is dropped. Throws
/// Error(kMalformedRow) on an unterminated quote.
std::vector<Row> parse(std::string_view text, std::size_t* line_numbers_out = nullptr);

/// First row becomes the header. Every row must have as many fields as the
/// header; otherwise Error(kMalformedRow) names the file and line.
Table read_file(const std::filesystem::path& path);

std::string escape_field(std::string_view field);
std::string format_row(const Row& row);
void write_file(const std::filesystem::path& path, const Row& header, const std::vector<Row>& rows);

}  // namespace em::csv
