#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cbrec {

// Flat INI-style config: [section] headers, key = value lines, '#' comments.
// Unknown sections/keys are hard errors (typo guard), enforced by
// check_schema() against the set of keys the application declares.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;

  std::string get_str(const std::string& section, const std::string& key) const;
  std::string get_str(const std::string& section, const std::string& key,
                      const std::string& fallback) const;
  int64_t get_int(const std::string& section, const std::string& key) const;
  int64_t get_int(const std::string& section, const std::string& key, int64_t fallback) const;
  double get_real(const std::string& section, const std::string& key) const;
  double get_real(const std::string& section, const std::string& key, double fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

  std::vector<std::string> get_list(const std::string& section, const std::string& key) const;
  std::vector<int64_t> get_int_list(const std::string& section, const std::string& key) const;
  std::vector<double> get_real_list(const std::string& section, const std::string& key) const;

  std::vector<std::string> section_keys(const std::string& section) const;

  // Throws ConfigError naming the first unknown section or key. A schema key
  // ending in '*' matches any key with that prefix.
  void check_schema(const std::map<std::string, std::set<std::string>>& schema) const;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

int64_t parse_int(const std::string& text, const std::string& what);
double parse_real(const std::string& text, const std::string& what);

}  // namespace cbrec
