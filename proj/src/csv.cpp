#include "emreason/csv.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "emreason/error.hpp"

namespace em::csv {
namespace {

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kMissingFile, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

std::vector<Row> parse(std::string_view text, std::size_t* line_numbers_out) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  std::vector<Row> rows;
  std::vector<std::size_t> starts;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t row_line = 1;
  std::size_t quote_line = 0;

  const auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  const auto end_row = [&] {
    end_field();
    // A blank line yields a single empty field; skip it.
    if (!(row.size() == 1 && row[0].empty())) {
      rows.push_back(std::move(row));
      starts.push_back(row_line);
    }
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started) {
          in_quotes = true;
          field_started = true;
          quote_line = line;
        } else {
          field += c;
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        [[fallthrough]];
      case '\n':
        end_row();
        ++line;
        row_line = line;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) {
    throw Error(Errc::kMalformedRow,
                "unterminated quoted field starting on line " + std::to_string(quote_line));
  }
  if (field_started || !field.empty() || !row.empty()) end_row();

  if (line_numbers_out != nullptr) {
    for (std::size_t i = 0; i < starts.size(); ++i) line_numbers_out[i] = starts[i];
  }
  return rows;
}

Table read_file(const std::filesystem::path& path) {
  const std::string text = read_all(path);
  // Upper bound on rows is the number of line breaks plus one.
  std::vector<std::size_t> lines(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) + 2);
  auto rows = parse(text, lines.data());

  Table table;
  if (rows.empty()) return table;
  table.header = std::move(rows.front());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != table.header.size()) {
      throw Error(Errc::kMalformedRow,
                  path.string() + ":" + std::to_string(lines[i]) + ": expected " +
                      std::to_string(table.header.size()) + " fields, found " +
                      std::to_string(rows[i].size()));
    }
    table.rows.push_back(std::move(rows[i]));
    table.lines.push_back(lines[i]);
  }
  return table;
}

std::string escape_field(std::string_view field) {
  const bool needs_quotes = field.find_first_of(",\"\r\n") != std::string_view::npos ||
                            (!field.empty() && (field.front() == ' ' || field.back() == ' '));
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_row(const Row& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i > 0) out += ',';
    out += escape_field(row[i]);
  }
  return out;
}

void write_file(const std::filesystem::path& path, const Row& header, const std::vector<Row>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kMissingFile, "cannot write " + path.string());
  out << format_row(header) << '\n';
  for (const auto& row : rows) out << format_row(row) << '\n';
}

}  // namespace em::csv
