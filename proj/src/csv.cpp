#include "cbrec/csv.hpp"

#include <fstream>
#include <sstream>

#include "cbrec/errors.hpp"

namespace cbrec {

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

// RFC-4180-style: fields may be quoted, quotes escape as "".
std::vector<std::string> parse_line(const std::string& line, size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (in_quotes) {
    fail(Errc::bad_data, "unterminated quote on CSV line " + std::to_string(line_no));
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

CsvTable parse_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && line_no > 1) continue;
    auto fields = parse_line(line, line_no);
    if (line_no == 1) {
      table.header = std::move(fields);
    } else {
      if (fields.size() != table.header.size()) {
        fail(Errc::bad_data, "CSV line " + std::to_string(line_no) + " has " +
                                 std::to_string(fields.size()) + " fields, expected " +
                                 std::to_string(table.header.size()));
      }
      table.rows.push_back(std::move(fields));
    }
  }
  if (table.header.empty()) fail(Errc::bad_data, "CSV has no header row");
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, "cannot open " + path);
  return parse_csv(in);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(fields[i]);
  }
  out << '\n';
}

}  // namespace cbrec
