#include "cbrec/engine.hpp"

#include <algorithm>
#include <cmath>

#include "cbrec/errors.hpp"

namespace cbrec {

namespace {

// Tags for deriving the engine's independent random streams from one seed.
constexpr uint64_t kPolicyStreamTag = 0x01;
constexpr uint64_t kNegativeStreamTag = 0x02;
constexpr uint64_t kStaticTrainTag = 0x03;
constexpr uint64_t kBaselineTag = 0x04;
constexpr uint64_t kMinibatchTagBase = 0x1000;

}  // namespace

void validate(const EngineConfig& cfg) {
  if (cfg.k < 1) fail(Errc::bad_config, "k must be >= 1");
  if (cfg.n_items < 1) fail(Errc::bad_config, "engine needs n_items >= 1");
  if (cfg.k > cfg.n_items) fail(Errc::bad_config, "k cannot exceed the item count");
  if (cfg.context_dim < 1) fail(Errc::bad_config, "engine needs context_dim >= 1");
  if (!(cfg.eval_fraction > 0.0) || !(cfg.eval_fraction < 1.0)) {
    fail(Errc::bad_config, "eval_fraction must lie in (0,1)");
  }
  if (cfg.schedule.minibatch_size < 1) fail(Errc::bad_config, "minibatch_size must be >= 1");
  if (cfg.schedule.interval_trials < 1) fail(Errc::bad_config, "interval_trials must be >= 1");
  if (cfg.series_window < 1) fail(Errc::bad_config, "series_window must be >= 1");
  if (cfg.dbscan_min_pts < 1) fail(Errc::bad_config, "min_pts must be >= 1");
  if (cfg.dbscan_eps && !(*cfg.dbscan_eps > 0.0)) {
    fail(Errc::bad_config, "dbscan eps must be > 0 when set");
  }
  if (cfg.model.learning_rate <= 0.0) fail(Errc::bad_config, "learning_rate must be > 0");
  if (cfg.model.update_passes < 1) fail(Errc::bad_config, "update_passes must be >= 1");
  if (cfg.model.update_chunk < 1) fail(Errc::bad_config, "update_chunk must be >= 1");
  if (cfg.model.static_epochs < 1) fail(Errc::bad_config, "static_epochs must be >= 1");
  validate(cfg.policy_cfg);
}

size_t eval_begin_index(size_t n_trials, double eval_fraction) {
  const auto eval_trials = static_cast<size_t>(std::llround(eval_fraction * n_trials));
  return n_trials - std::min(eval_trials, n_trials);
}

nlohmann::json engine_config_to_json(const EngineConfig& cfg) {
  nlohmann::json j;
  j["k"] = cfg.k;
  j["policy"] = policy_id_name(cfg.policy);
  j["clustering_enabled"] = cfg.clustering_enabled;
  if (cfg.dbscan_eps) {
    j["dbscan"]["eps"] = *cfg.dbscan_eps;
  } else {
    j["dbscan"]["eps"] = "auto";
  }
  j["dbscan"]["min_pts"] = cfg.dbscan_min_pts;
  j["schedule"]["minibatch_size"] = cfg.schedule.minibatch_size;
  j["schedule"]["interval_trials"] = cfg.schedule.interval_trials;
  j["warmup_trials"] = cfg.warmup_trials;
  j["eval_fraction"] = cfg.eval_fraction;
  j["seed"] = cfg.seed;
  j["series_window"] = cfg.series_window;
  j["model"]["hidden"] = cfg.model.hidden;
  j["model"]["learning_rate"] = cfg.model.learning_rate;
  j["model"]["replay_capacity"] = cfg.model.replay_capacity;
  j["model"]["update_passes"] = cfg.model.update_passes;
  j["model"]["update_chunk"] = cfg.model.update_chunk;
  j["model"]["static_epochs"] = cfg.model.static_epochs;
  j["policy_config"]["epsilon"] = cfg.policy_cfg.epsilon;
  j["policy_config"]["fee_explore_trials"] = cfg.policy_cfg.fee_explore_trials;
  j["policy_config"]["bootstrap_members"] = cfg.policy_cfg.bootstrap_members;
  j["policy_config"]["ucb_percentile"] = cfg.policy_cfg.ucb_percentile;
  j["policy_config"]["active_explorer_mix"] = cfg.policy_cfg.active_explorer_mix;
  j["policy_config"]["dbgd_delta"] = cfg.policy_cfg.dbgd_delta;
  j["policy_config"]["dbgd_beta"] = cfg.policy_cfg.dbgd_beta;
  j["context_dim"] = cfg.context_dim;
  j["n_items"] = cfg.n_items;
  return j;
}

Engine::Engine(const EngineConfig& cfg, size_t n_trials_total)
    : cfg_(cfg),
      train_cut_(eval_begin_index(n_trials_total, cfg.eval_fraction)),
      buffer_(cfg.model.replay_capacity),
      policy_rng_(mix_seed(cfg.seed, kPolicyStreamTag)),
      negative_rng_(mix_seed(cfg.seed, kNegativeStreamTag)),
      is_static_(cfg.policy == PolicyId::static_lr) {
  validate(cfg_);
  policy_ = make_policy(cfg.policy, cfg.policy_cfg, cfg.model, cfg.context_dim, cfg.n_items,
                        cfg.seed);
  all_items_.resize(cfg.n_items);
  for (size_t i = 0; i < cfg.n_items; ++i) all_items_[i] = static_cast<int>(i);
}

int Engine::sample_negative_item(int positive, Rng& rng) const {
  if (cfg_.n_items < 2) return positive;
  const auto draw = static_cast<int>(rng.below(cfg_.n_items - 1));
  return draw >= positive ? draw + 1 : draw;
}

TrialOutcome Engine::step(const EncodedTrial& trial) {
  const size_t t = trials_seen_;
  const bool in_warmup = t < cfg_.warmup_trials;

  // Step 1: cluster-based candidate reduction (never during warmup).
  const std::vector<int>* candidates = &all_items_;
  std::vector<int> reduced;
  if (cfg_.clustering_enabled && !in_warmup && cluster_model_ &&
      cluster_model_->has_clusters()) {
    reduced = candidate_items(trial.context, *cluster_model_, all_items_, cfg_.k);
    candidates = &reduced;
  }

  // Step 2: the policy builds the slate.
  Slate slate = policy_->select(t, trial.context, *candidates, cfg_.k, policy_rng_);

  // Step 3: binary reward — did the slate contain the logged choice?
  std::optional<int> hit_slot;
  for (size_t slot = 0; slot < slate.items.size(); ++slot) {
    if (slate.items[slot] == trial.chosen_item) {
      hit_slot = static_cast<int>(slot);
      break;
    }
  }
  const int reward = hit_slot ? 1 : 0;

  if (is_static_) {
    // Static mode: accumulate supervised data before the cut, train once at
    // the cut, then serve frozen. No schedule, clustering, or feedback.
    if (t < train_cut_) {
      static_train_data_.push_back({trial.context, trial.chosen_item, 1});
      static_train_data_.push_back(
          {trial.context, sample_negative_item(trial.chosen_item, negative_rng_), 0});
    }
    if (t + 1 == train_cut_) train_static();
  } else {
    if (in_warmup) {
      // Warm-start: supervised signal only — the logged choice as positive,
      // one sampled non-chosen item as negative (1:1).
      ReplayEntry pos{trial.context, trial.chosen_item, 1};
      ReplayEntry neg{trial.context, sample_negative_item(trial.chosen_item, negative_rng_), 0};
      buffer_.push(pos);
      buffer_.push(neg);
      policy_->on_supervised(pos, policy_rng_);
      policy_->on_supervised(neg, policy_rng_);
    } else {
      policy_->on_feedback(trial.context, slate, hit_slot, policy_rng_);
      // Step 4: per-item replay entries — the hit item is the positive, the
      // other slate items are negatives.
      for (size_t slot = 0; slot < slate.items.size(); ++slot) {
        const int r = (hit_slot && static_cast<size_t>(*hit_slot) == slot) ? 1 : 0;
        buffer_.push({trial.context, slate.items[slot], r});
      }
    }
    if (reward == 1) update_item_profiles(profiles_, trial, true);
    if ((t + 1) % cfg_.schedule.interval_trials == 0) {
      scheduled_update(boundary_count_++);
    }
  }

  TrialOutcome outcome;
  outcome.index = t;
  outcome.slate = std::move(slate);
  outcome.reward = reward;
  outcome.hit_slot = hit_slot;
  outcome.hits = reward;
  outcome.candidates_scored = candidates->size();
  ++trials_seen_;
  return outcome;
}

void Engine::scheduled_update(size_t boundary_index) {
  if (policy_->shared_scorer() != nullptr && !buffer_.empty()) {
    const uint64_t seed = mix_seed(cfg_.seed, kMinibatchTagBase + boundary_index);
    auto batch = sample_minibatch(buffer_, cfg_.schedule.minibatch_size, seed);
    // Train on the sampled batch in chunks for a few passes; one mean-BCE
    // step over 1000 entries moves the model too little to learn online.
    Rng order_rng(mix_seed(seed, 0xF00D));
    for (size_t pass = 0; pass < cfg_.model.update_passes; ++pass) {
      order_rng.shuffle(batch);
      for (size_t begin = 0; begin < batch.size(); begin += cfg_.model.update_chunk) {
        const size_t len = std::min(cfg_.model.update_chunk, batch.size() - begin);
        policy_->on_minibatch(std::span(batch).subspan(begin, len), cfg_.model.learning_rate);
      }
    }
  }
  if (cfg_.clustering_enabled && !profiles_.empty()) {
    DbscanParams params;
    params.eps = cfg_.dbscan_eps ? *cfg_.dbscan_eps : auto_eps(profiles_);
    params.min_pts = cfg_.dbscan_min_pts;
    cluster_model_ = recluster(profiles_, params, cfg_.n_items);
  }
}

void Engine::train_static() {
  if (static_train_data_.empty()) return;
  Rng order_rng(mix_seed(cfg_.seed, kStaticTrainTag));
  auto data = static_train_data_;
  for (size_t epoch = 0; epoch < cfg_.model.static_epochs; ++epoch) {
    order_rng.shuffle(data);
    for (size_t begin = 0; begin < data.size(); begin += cfg_.model.update_chunk) {
      const size_t len = std::min(cfg_.model.update_chunk, data.size() - begin);
      policy_->on_minibatch(std::span(data).subspan(begin, len), cfg_.model.learning_rate);
    }
  }
}

ReplayResult run_replay(std::span<const EncodedTrial> stream, const EngineConfig& cfg) {
  if (stream.empty()) fail(Errc::empty_stream, "replay stream has no trials");
  if (stream.front().context.size() != cfg.context_dim) {
    fail(Errc::dimension_mismatch, "stream context dimension does not match the config");
  }

  Engine engine(cfg, stream.size());
  ReplayResult result;
  result.outcomes.reserve(stream.size());
  for (const auto& trial : stream) {
    result.outcomes.push_back(engine.step(trial));
  }

  // Uniform-random shadow policy over the same stream: the denominator for
  // the relative-CTR series.
  Rng baseline_rng(mix_seed(cfg.seed, kBaselineTag));
  result.baseline_outcomes.reserve(stream.size());
  for (const auto& trial : stream) {
    TrialOutcome outcome;
    outcome.index = trial.index;
    for (size_t i : baseline_rng.sample_without_replacement(cfg.n_items, cfg.k)) {
      outcome.slate.items.push_back(static_cast<int>(i));
    }
    outcome.slate.source.assign(cfg.k, SlotSource::explore);
    for (size_t slot = 0; slot < outcome.slate.items.size(); ++slot) {
      if (outcome.slate.items[slot] == trial.chosen_item) {
        outcome.hit_slot = static_cast<int>(slot);
        break;
      }
    }
    outcome.reward = outcome.hit_slot ? 1 : 0;
    outcome.hits = outcome.reward;
    outcome.candidates_scored = cfg.n_items;
    result.baseline_outcomes.push_back(std::move(outcome));
  }

  const size_t eval_begin = eval_begin_index(stream.size(), cfg.eval_fraction);
  const std::span<const TrialOutcome> eval =
      std::span(result.outcomes).subspan(eval_begin);

  MetricsReport& report = result.report;
  report.item_ctr = per_item_ctr(eval);
  report.avg_ctr = compute_avg_ctr(eval);
  report.precision_at_k = compute_precision_at_k(eval, cfg.k);
  report.series =
      relative_ctr_series(result.outcomes, result.baseline_outcomes, cfg.series_window);
  double candidates_sum = 0.0;
  for (const auto& outcome : eval) {
    candidates_sum += static_cast<double>(outcome.candidates_scored);
  }
  report.mean_candidates_scored =
      eval.empty() ? 0.0 : candidates_sum / static_cast<double>(eval.size());
  report.n_trials = stream.size();
  report.eval_begin = eval_begin;
  report.seed = cfg.seed;
  report.config_echo = engine_config_to_json(cfg);
  return result;
}

}  // namespace cbrec
