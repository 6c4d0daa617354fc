#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cbrec/config.hpp"
#include "cbrec/dataio.hpp"
#include "cbrec/engine.hpp"

namespace cbrec {

// A compare/run cell: base policy plus whether cluster-based candidate
// reduction is on. The label is the policy id, with a "_cluster" suffix when
// clustering is enabled (e.g. "dbgd_mlp_cluster").
struct PolicyVariant {
  PolicyId policy;
  bool clustering = false;
  std::string label;
};

PolicyVariant parse_policy_variant(const std::string& label);

// Builds the engine configuration from the [engine]/[schedule]/[model]/
// [dbscan]/[policy] config sections (schema dimensions filled in later).
EngineConfig engine_config_from(const Config& cfg, const PolicyVariant& variant);

SyntheticEnvSpec synthetic_spec_from(const Config& cfg);

struct RunArgs {
  std::string config_path;
  std::string data_path;  // empty: use [data] path
  std::string out_dir;
  std::optional<uint64_t> seed;
  std::optional<size_t> k;
  std::optional<std::string> policy;
};

struct CompareArgs {
  std::string config_path;
  std::string data_path;
  std::string out_dir;
  std::optional<uint64_t> seed;  // restricts the seed set to one seed
  std::optional<size_t> k;       // restricts the k set
  std::optional<std::string> policy;
  std::optional<size_t> jobs;
};

struct SynthArgs {
  std::string config_path;
  size_t n_trials = 0;
  std::string out_path;
  std::optional<uint64_t> seed;
};

// Exit codes: 0 success, 2 config error, 3 data error, 1 internal error.
int cmd_run(const RunArgs& args);
int cmd_compare(const CompareArgs& args);
int cmd_synth(const SynthArgs& args);

int run_cli(int argc, const char* const* argv);

}  // namespace cbrec
