#include "cbrec/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cbrec/errors.hpp"

namespace cbrec {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        fail(Errc::bad_config, "malformed section header on line " + std::to_string(line_no));
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        fail(Errc::bad_config, "empty section name on line " + std::to_string(line_no));
      }
      cfg.sections_[section];
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      fail(Errc::bad_config, "expected key = value on line " + std::to_string(line_no));
    }
    if (section.empty()) {
      fail(Errc::bad_config, "key outside any [section] on line " + std::to_string(line_no));
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      fail(Errc::bad_config, "empty key on line " + std::to_string(line_no));
    }
    auto& sec = cfg.sections_[section];
    if (sec.count(key)) {
      fail(Errc::bad_config, "duplicate key '" + key + "' in [" + section + "]");
    }
    sec[key] = value;
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::bad_config, "cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

bool Config::has(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  return it != sections_.end() && it->second.count(key) > 0;
}

std::string Config::get_str(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  if (it == sections_.end() || !it->second.count(key)) {
    fail(Errc::bad_config, "missing required key '" + key + "' in section [" + section + "]");
  }
  return it->second.at(key);
}

std::string Config::get_str(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
  return has(section, key) ? sections_.at(section).at(key) : fallback;
}

int64_t parse_int(const std::string& text, const std::string& what) {
  char* end = nullptr;
  errno = 0;
  long long v = std::strtoll(text.c_str(), &end, 10);
  if (errno != 0 || end == text.c_str() || *end != '\0') {
    fail(Errc::bad_config, "expected integer for " + what + ", got '" + text + "'");
  }
  return v;
}

double parse_real(const std::string& text, const std::string& what) {
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(text.c_str(), &end);
  if (errno != 0 || end == text.c_str() || *end != '\0') {
    fail(Errc::bad_config, "expected number for " + what + ", got '" + text + "'");
  }
  return v;
}

int64_t Config::get_int(const std::string& section, const std::string& key) const {
  return parse_int(get_str(section, key), "[" + section + "] " + key);
}

int64_t Config::get_int(const std::string& section, const std::string& key,
                        int64_t fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

double Config::get_real(const std::string& section, const std::string& key) const {
  return parse_real(get_str(section, key), "[" + section + "] " + key);
}

double Config::get_real(const std::string& section, const std::string& key,
                        double fallback) const {
  return has(section, key) ? get_real(section, key) : fallback;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  std::string v = get_str(section, key);
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  fail(Errc::bad_config, "expected boolean for [" + section + "] " + key + ", got '" + v + "'");
}

std::vector<std::string> Config::get_list(const std::string& section,
                                          const std::string& key) const {
  std::vector<std::string> out;
  std::string raw = get_str(section, key);
  std::string cur;
  for (char c : raw) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

std::vector<int64_t> Config::get_int_list(const std::string& section,
                                          const std::string& key) const {
  std::vector<int64_t> out;
  for (const auto& s : get_list(section, key)) {
    out.push_back(parse_int(s, "[" + section + "] " + key));
  }
  return out;
}

std::vector<double> Config::get_real_list(const std::string& section,
                                          const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : get_list(section, key)) {
    out.push_back(parse_real(s, "[" + section + "] " + key));
  }
  return out;
}

std::vector<std::string> Config::section_keys(const std::string& section) const {
  std::vector<std::string> out;
  auto it = sections_.find(section);
  if (it == sections_.end()) return out;
  for (const auto& [k, v] : it->second) out.push_back(k);
  return out;
}

void Config::check_schema(const std::map<std::string, std::set<std::string>>& schema) const {
  for (const auto& [section, keys] : sections_) {
    auto it = schema.find(section);
    if (it == schema.end()) {
      fail(Errc::bad_config, "unknown section [" + section + "]");
    }
    for (const auto& [key, value] : keys) {
      bool known = it->second.count(key) > 0;
      if (!known) {
        for (const auto& pattern : it->second) {
          if (!pattern.empty() && pattern.back() == '*' &&
              key.rfind(pattern.substr(0, pattern.size() - 1), 0) == 0) {
            known = true;
            break;
          }
        }
      }
      if (!known) {
        fail(Errc::bad_config, "unknown key '" + key + "' in section [" + section + "]");
      }
    }
  }
}

}  // namespace cbrec
