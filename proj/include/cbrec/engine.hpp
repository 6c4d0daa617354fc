#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbrec/clustering.hpp"
#include "cbrec/dataio.hpp"
#include "cbrec/metrics.hpp"
#include "cbrec/models.hpp"
#include "cbrec/policies.hpp"

namespace cbrec {

struct UpdateSchedule {
  size_t minibatch_size = 1000;  // entries sampled per scheduled update
  size_t interval_trials = 5000; // trials between scheduled updates
};

struct EngineConfig {
  size_t k = 1;  // slate size
  PolicyId policy = PolicyId::dbgd_mlp;
  PolicyConfig policy_cfg;
  bool clustering_enabled = false;
  std::optional<double> dbscan_eps;  // nullopt: 0.5 * median pairwise profile distance
  int dbscan_min_pts = 4;
  UpdateSchedule schedule;
  size_t warmup_trials = 5000;  // first batch: full candidate set, supervised learning only
  double eval_fraction = 0.3;   // metrics accumulate over the final fraction
  uint64_t seed = 1;
  size_t series_window = 1000;
  ModelConfig model;
  // From the fitted schema.
  size_t context_dim = 0;
  size_t n_items = 0;
};

void validate(const EngineConfig& cfg);
nlohmann::json engine_config_to_json(const EngineConfig& cfg);

// First trial index of the evaluation window (identical across policies for
// a given stream length and fraction).
size_t eval_begin_index(size_t n_trials, double eval_fraction);

struct MetricsReport {
  std::map<int, double> item_ctr;
  double avg_ctr = 0.0;
  double precision_at_k = 0.0;
  RelativeCtrSeries series;  // over the full stream
  double mean_candidates_scored = 0.0;
  size_t n_trials = 0;
  size_t eval_begin = 0;
  uint64_t seed = 0;
  nlohmann::json config_echo;
};

struct ReplayResult {
  MetricsReport report;
  std::vector<TrialOutcome> outcomes;           // every trial
  std::vector<TrialOutcome> baseline_outcomes;  // uniform-random shadow policy
};

// Per-trial pipeline: reduce candidates through the cluster model, select a
// slate, derive the replay reward, feed the policy, append to the replay
// buffer, and run scheduled updates / re-clustering at batch boundaries.
// The static policy instead trains once at the evaluation cut and serves
// frozen afterwards.
class Engine {
 public:
  Engine(const EngineConfig& cfg, size_t n_trials_total);

  TrialOutcome step(const EncodedTrial& trial);

  const Policy& policy() const { return *policy_; }
  Policy& policy() { return *policy_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const std::optional<ClusterModel>& cluster_model() const { return cluster_model_; }
  const ItemProfileMap& profiles() const { return profiles_; }
  size_t train_cut() const { return train_cut_; }

 private:
  void scheduled_update(size_t boundary_index);
  void train_static();
  int sample_negative_item(int positive, Rng& rng) const;

  EngineConfig cfg_;
  size_t train_cut_;  // == eval_begin_index(n, eval_fraction)
  std::unique_ptr<Policy> policy_;
  std::vector<int> all_items_;
  ReplayBuffer buffer_;
  ItemProfileMap profiles_;
  std::optional<ClusterModel> cluster_model_;
  std::vector<ReplayEntry> static_train_data_;
  Rng policy_rng_;
  Rng negative_rng_;
  size_t trials_seen_ = 0;
  size_t boundary_count_ = 0;
  bool is_static_;
};

ReplayResult run_replay(std::span<const EncodedTrial> stream, const EngineConfig& cfg);

}  // namespace cbrec
