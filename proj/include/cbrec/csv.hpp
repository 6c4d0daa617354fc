#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cbrec {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

CsvTable parse_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

std::string csv_escape(const std::string& field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace cbrec
