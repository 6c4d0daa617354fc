#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbrec/dataio.hpp"
#include "cbrec/engine.hpp"

namespace cbrec {

inline constexpr const char* kVersion = "0.1.0";

// FNV-1a 64-bit content fingerprint (not cryptographic; identifies inputs in
// manifests).
uint64_t fnv1a_file(const std::string& path);
uint64_t fnv1a_bytes(const void* data, size_t size);

// Report JSON schema: policy label, metrics, relative-CTR series and the
// resolved config. Per-item CTR keys are item ids when a schema is given,
// otherwise item indices.
nlohmann::json report_to_json(const MetricsReport& report, const std::string& policy_label,
                              const FeatureSchema* schema);

// Series CSV: window_index,window_start,window_end,avg_ctr,relative_ctr.
void write_series_csv(const std::string& path, const MetricsReport& report);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

struct Manifest {
  std::string command;
  std::string config_path;
  nlohmann::json resolved_config;
  std::string data_path;
  uint64_t data_fingerprint = 0;
  std::vector<std::string> outputs;
  double duration_seconds = 0.0;
};

void write_manifest(const std::string& path, const Manifest& manifest);

}  // namespace cbrec
