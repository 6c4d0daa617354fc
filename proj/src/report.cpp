#include "cbrec/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cbrec/csv.hpp"
#include "cbrec/errors.hpp"

namespace cbrec {

uint64_t fnv1a_bytes(const void* data, size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + path);
  uint64_t hash = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ULL;
    }
  }
  return hash;
}

nlohmann::json report_to_json(const MetricsReport& report, const std::string& policy_label,
                              const FeatureSchema* schema) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["policy"] = policy_label;
  j["seed"] = report.seed;
  j["n_trials"] = report.n_trials;
  j["eval_begin"] = report.eval_begin;
  j["avg_ctr"] = report.avg_ctr;
  j["precision_at_k"] = report.precision_at_k;
  j["mean_candidates_scored"] = report.mean_candidates_scored;
  nlohmann::json ctr = nlohmann::json::object();
  for (const auto& [item, value] : report.item_ctr) {
    std::string key = std::to_string(item);
    if (schema != nullptr && item >= 0 && static_cast<size_t>(item) < schema->n_items()) {
      key = schema->item_vocabulary[static_cast<size_t>(item)];
    }
    ctr[key] = value;
  }
  j["per_item_ctr"] = ctr;
  j["relative_ctr"]["window"] = report.series.window;
  j["relative_ctr"]["baseline_avg_ctr"] = report.series.baseline_avg_ctr;
  j["relative_ctr"]["windowed_avg_ctr"] = report.series.windowed_ctr;
  j["relative_ctr"]["relative"] = report.series.relative;
  j["config"] = report.config_echo;
  return j;
}

namespace {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

void write_series_csv(const std::string& path, const MetricsReport& report) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_error, "cannot write " + path);
  write_csv_row(out, {"window_index", "window_start", "window_end", "avg_ctr", "relative_ctr"});
  const size_t window = report.series.window;
  for (size_t i = 0; i < report.series.windowed_ctr.size(); ++i) {
    const size_t start = i * window;
    const size_t end = std::min(start + window, report.n_trials);
    write_csv_row(out, {std::to_string(i), std::to_string(start), std::to_string(end),
                        format_real(report.series.windowed_ctr[i]),
                        format_real(report.series.relative[i])});
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io_error, "cannot write " + path);
  out << content;
  if (!out) fail(Errc::io_error, "write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_manifest(const std::string& path, const Manifest& manifest) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["command"] = manifest.command;
  j["config_path"] = manifest.config_path;
  j["resolved_config"] = manifest.resolved_config;
  j["data_path"] = manifest.data_path;
  char fp[32];
  std::snprintf(fp, sizeof(fp), "%016llx",
                static_cast<unsigned long long>(manifest.data_fingerprint));
  j["data_fingerprint_fnv1a64"] = fp;
  j["outputs"] = manifest.outputs;
  j["duration_seconds"] = manifest.duration_seconds;
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace cbrec
