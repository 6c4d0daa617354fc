#include "cbrec/policies.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cbrec/errors.hpp"

namespace cbrec {

const char* policy_id_name(PolicyId id) {
  switch (id) {
    case PolicyId::static_lr: return "static_lr";
    case PolicyId::epsilon_greedy: return "epsilon_greedy";
    case PolicyId::fee: return "fee";
    case PolicyId::bootstrap_ucb: return "bootstrap_ucb";
    case PolicyId::bootstrap_ts: return "bootstrap_ts";
    case PolicyId::active_explorer: return "active_explorer";
    case PolicyId::dbgd_lr: return "dbgd_lr";
    case PolicyId::dbgd_mlp: return "dbgd_mlp";
  }
  return "unknown";
}

std::optional<PolicyId> policy_id_from_string(const std::string& name) {
  for (PolicyId id : {PolicyId::static_lr, PolicyId::epsilon_greedy, PolicyId::fee,
                      PolicyId::bootstrap_ucb, PolicyId::bootstrap_ts,
                      PolicyId::active_explorer, PolicyId::dbgd_lr, PolicyId::dbgd_mlp}) {
    if (name == policy_id_name(id)) return id;
  }
  return std::nullopt;
}

void validate(const PolicyConfig& cfg) {
  if (cfg.epsilon < 0.0 || cfg.epsilon > 1.0) fail(Errc::bad_config, "epsilon must lie in [0,1]");
  if (cfg.bootstrap_members < 2) fail(Errc::bad_config, "bootstrap_members must be >= 2");
  if (cfg.ucb_percentile <= 50.0 || cfg.ucb_percentile >= 100.0) {
    fail(Errc::bad_config, "ucb_percentile must lie in (50,100)");
  }
  if (cfg.active_explorer_mix < 0.0 || cfg.active_explorer_mix > 1.0) {
    fail(Errc::bad_config, "active_explorer_mix must lie in [0,1]");
  }
  if (!(cfg.dbgd_delta > 0.0) || !std::isfinite(cfg.dbgd_delta)) {
    fail(Errc::bad_config, "dbgd delta must be finite and > 0");
  }
  if (!(cfg.dbgd_beta > 0.0) || !std::isfinite(cfg.dbgd_beta)) {
    fail(Errc::bad_config, "dbgd beta must be finite and > 0");
  }
}

void Policy::on_feedback(std::span<const double>, const Slate&, std::optional<int>, Rng&) {}
void Policy::on_minibatch(std::span<const ReplayEntry>, double) {}
void Policy::on_supervised(const ReplayEntry&, Rng&) {}

namespace {

// Sort order: score descending, then item index ascending.
void sort_by_score(std::vector<std::pair<double, int>>& scored) {
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
}

std::vector<std::pair<double, int>> score_candidates(const Scorer& scorer,
                                                     std::span<const double> context,
                                                     const std::vector<int>& candidates) {
  std::vector<double> scores(candidates.size());
  scorer.score_many(context, candidates, scores);
  std::vector<std::pair<double, int>> scored(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) scored[i] = {scores[i], candidates[i]};
  return scored;
}

}  // namespace

std::vector<int> rank_top_k(const Scorer& scorer, std::span<const double> context,
                            const std::vector<int>& candidates, size_t k,
                            const std::vector<int>* global_pool) {
  auto scored = score_candidates(scorer, context, candidates);
  sort_by_score(scored);
  std::vector<int> out;
  out.reserve(k);
  for (const auto& [score, item] : scored) {
    if (out.size() == k) break;
    out.push_back(item);
  }
  if (out.size() < k && global_pool != nullptr) {
    std::set<int> used(out.begin(), out.end());
    std::vector<int> rest;
    for (int item : *global_pool) {
      if (!used.count(item)) rest.push_back(item);
    }
    auto extra = score_candidates(scorer, context, rest);
    sort_by_score(extra);
    for (const auto& [score, item] : extra) {
      if (out.size() == k) break;
      out.push_back(item);
    }
  }
  return out;
}

Slate random_slate(const std::vector<int>& candidates, size_t k, Rng& rng) {
  if (candidates.size() < k) {
    fail(Errc::insufficient_items, "need " + std::to_string(k) + " candidates, have " +
                                       std::to_string(candidates.size()));
  }
  Slate slate;
  slate.items.reserve(k);
  for (size_t i : rng.sample_without_replacement(candidates.size(), k)) {
    slate.items.push_back(candidates[i]);
  }
  slate.source.assign(k, SlotSource::explore);
  return slate;
}

Slate probabilistic_interleave(const std::vector<int>& exploit_list,
                               const std::vector<int>& explore_list, size_t k, Rng& rng) {
  std::set<int> used;
  size_t a = 0, b = 0;  // cursors into exploit_list / explore_list

  auto next_from = [&](const std::vector<int>& list, size_t& cursor) -> std::optional<int> {
    while (cursor < list.size()) {
      const int item = list[cursor++];
      if (!used.count(item)) return item;
    }
    return std::nullopt;
  };

  Slate slate;
  slate.items.reserve(k);
  while (slate.items.size() < k) {
    const bool pick_exploit = rng.uniform() < 0.5;
    std::optional<int> item;
    SlotSource source;
    if (pick_exploit) {
      item = next_from(exploit_list, a);
      source = SlotSource::exploit;
      if (!item) {
        item = next_from(explore_list, b);
        source = SlotSource::explore;
      }
    } else {
      item = next_from(explore_list, b);
      source = SlotSource::explore;
      if (!item) {
        item = next_from(exploit_list, a);
        source = SlotSource::exploit;
      }
    }
    if (!item) {
      fail(Errc::insufficient_items,
           "interleaving ran out of items at slot " + std::to_string(slate.items.size()));
    }
    used.insert(*item);
    slate.items.push_back(*item);
    slate.source.push_back(source);
  }
  return slate;
}

double nearest_rank_percentile(std::vector<double> scores, double percentile) {
  if (scores.empty()) fail(Errc::empty_buffer, "percentile of an empty score set");
  std::sort(scores.begin(), scores.end());
  const auto n = static_cast<double>(scores.size());
  size_t rank = static_cast<size_t>(std::ceil(percentile / 100.0 * n));
  rank = std::clamp<size_t>(rank, 1, scores.size());
  return scores[rank - 1];
}

// ---------------------------------------------------------------------------
// DBGD

DbgdPolicy::DbgdPolicy(Scorer exploit, double delta, double beta)
    : exploit_(std::move(exploit)), delta_(delta), beta_(beta) {
  if (!(delta > 0.0) || !(beta > 0.0)) fail(Errc::bad_config, "delta and beta must be > 0");
}

DbgdPolicy::Proposal DbgdPolicy::propose(Rng& rng) const {
  const size_t n = exploit_.parameter_count();
  std::vector<double> direction(n);
  double norm_sq = 0.0;
  do {
    norm_sq = 0.0;
    for (double& d : direction) {
      d = rng.normal();
      norm_sq += d * d;
    }
  } while (norm_sq == 0.0);
  const double inv_norm = 1.0 / std::sqrt(norm_sq);
  for (double& d : direction) d *= inv_norm;

  Proposal proposal{exploit_, direction};
  std::vector<double> params = exploit_.flat_parameters();
  for (size_t i = 0; i < n; ++i) params[i] += delta_ * direction[i];
  proposal.explore.set_flat_parameters(params);
  return proposal;
}

void DbgdPolicy::apply_feedback(const Slate& slate, std::optional<int> hit_slot,
                                const std::vector<double>& direction) {
  if (!hit_slot) return;
  const size_t slot = static_cast<size_t>(*hit_slot);
  if (slot >= slate.source.size()) fail(Errc::dimension_mismatch, "hit slot out of range");
  if (slate.source[slot] != SlotSource::explore) return;
  if (direction.size() != exploit_.parameter_count()) {
    fail(Errc::length_mismatch, "direction length does not match parameter count");
  }
  std::vector<double> params = exploit_.flat_parameters();
  const double step = beta_ * delta_;
  for (size_t i = 0; i < params.size(); ++i) params[i] += step * direction[i];
  exploit_.set_flat_parameters(params);
}

Slate DbgdPolicy::select(size_t, std::span<const double> context,
                         const std::vector<int>& candidates, size_t k, Rng& rng) {
  Proposal proposal = propose(rng);
  const size_t kk = std::min(k, candidates.size());
  const auto exploit_list = rank_top_k(exploit_, context, candidates, kk);
  const auto explore_list = rank_top_k(proposal.explore, context, candidates, kk);
  Slate slate = probabilistic_interleave(exploit_list, explore_list, kk, rng);
  pending_direction_ = std::move(proposal.direction);
  return slate;
}

void DbgdPolicy::on_feedback(std::span<const double>, const Slate& slate,
                             std::optional<int> hit_slot, Rng&) {
  if (!pending_direction_) return;
  apply_feedback(slate, hit_slot, *pending_direction_);
  pending_direction_.reset();
}

void DbgdPolicy::on_minibatch(std::span<const ReplayEntry> batch, double learning_rate) {
  exploit_.sgd_update(batch, learning_rate);
}

// ---------------------------------------------------------------------------
// Static / epsilon-greedy / FEE

namespace {

Slate exploit_slate(const Scorer& scorer, std::span<const double> context,
                    const std::vector<int>& candidates, size_t k) {
  Slate slate;
  slate.items = rank_top_k(scorer, context, candidates, std::min(k, candidates.size()));
  slate.source.assign(slate.items.size(), SlotSource::exploit);
  return slate;
}

}  // namespace

Slate StaticPolicy::select(size_t, std::span<const double> context,
                           const std::vector<int>& candidates, size_t k, Rng&) {
  return exploit_slate(scorer_, context, candidates, k);
}

void StaticPolicy::on_minibatch(std::span<const ReplayEntry> batch, double learning_rate) {
  scorer_.sgd_update(batch, learning_rate);
}

Slate EpsilonGreedyPolicy::select(size_t, std::span<const double> context,
                                  const std::vector<int>& candidates, size_t k, Rng& rng) {
  if (rng.uniform() < epsilon_) {
    return random_slate(candidates, std::min(k, candidates.size()), rng);
  }
  return exploit_slate(scorer_, context, candidates, k);
}

void EpsilonGreedyPolicy::on_minibatch(std::span<const ReplayEntry> batch,
                                       double learning_rate) {
  scorer_.sgd_update(batch, learning_rate);
}

Slate FeePolicy::select(size_t trial_index, std::span<const double> context,
                        const std::vector<int>& candidates, size_t k, Rng& rng) {
  if (trial_index < horizon_) {
    return random_slate(candidates, std::min(k, candidates.size()), rng);
  }
  return exploit_slate(scorer_, context, candidates, k);
}

void FeePolicy::on_minibatch(std::span<const ReplayEntry> batch, double learning_rate) {
  scorer_.sgd_update(batch, learning_rate);
}

// ---------------------------------------------------------------------------
// Bootstrapped UCB / TS

BootstrapPolicy::BootstrapPolicy(Mode mode, size_t context_dim, size_t n_items, int members,
                                 double percentile, double learning_rate, uint64_t seed)
    : mode_(mode), percentile_(percentile), learning_rate_(learning_rate) {
  if (members < 2) fail(Errc::bad_config, "bootstrap needs at least 2 members");
  members_.reserve(n_items);
  for (size_t arm = 0; arm < n_items; ++arm) {
    std::vector<Scorer> ensemble;
    ensemble.reserve(static_cast<size_t>(members));
    for (int m = 0; m < members; ++m) {
      ensemble.emplace_back(ScorerKind::linear, context_dim, /*n_items=*/0,
                            std::vector<size_t>{},
                            mix_seed(seed, (static_cast<uint64_t>(arm) << 16) | m));
    }
    members_.push_back(std::move(ensemble));
  }
}

double BootstrapPolicy::arm_statistic(std::span<const double> context, int arm,
                                      Rng& rng) const {
  const auto& ensemble = members_.at(static_cast<size_t>(arm));
  if (mode_ == Mode::ts) {
    const size_t pick = static_cast<size_t>(rng.below(ensemble.size()));
    return ensemble[pick].score(context);
  }
  std::vector<double> scores(ensemble.size());
  for (size_t m = 0; m < ensemble.size(); ++m) scores[m] = ensemble[m].score(context);
  return nearest_rank_percentile(std::move(scores), percentile_);
}

Slate BootstrapPolicy::select(size_t, std::span<const double> context,
                              const std::vector<int>& candidates, size_t k, Rng& rng) {
  std::vector<std::pair<double, int>> scored;
  scored.reserve(candidates.size());
  for (int arm : candidates) scored.emplace_back(arm_statistic(context, arm, rng), arm);
  sort_by_score(scored);
  Slate slate;
  const size_t kk = std::min(k, scored.size());
  for (size_t i = 0; i < kk; ++i) slate.items.push_back(scored[i].second);
  slate.source.assign(kk, mode_ == Mode::ts ? SlotSource::explore : SlotSource::exploit);
  return slate;
}

void BootstrapPolicy::bootstrap_update(std::span<const double> context, int arm, int reward,
                                       Rng& rng) {
  ReplayEntry entry{{context.begin(), context.end()}, /*item=*/-1, reward};
  for (auto& member : members_.at(static_cast<size_t>(arm))) {
    const int weight = rng.poisson1();
    if (weight > 0) {
      member.sgd_update_weighted(entry, learning_rate_, static_cast<double>(weight));
    }
  }
}

void BootstrapPolicy::on_feedback(std::span<const double> context, const Slate& slate,
                                  std::optional<int> hit_slot, Rng& rng) {
  for (size_t slot = 0; slot < slate.items.size(); ++slot) {
    const int reward = (hit_slot && static_cast<size_t>(*hit_slot) == slot) ? 1 : 0;
    bootstrap_update(context, slate.items[slot], reward, rng);
  }
}

void BootstrapPolicy::on_supervised(const ReplayEntry& entry, Rng& rng) {
  if (entry.item < 0) fail(Errc::dimension_mismatch, "supervised entry needs an item");
  bootstrap_update(entry.context, entry.item, entry.reward, rng);
}

// ---------------------------------------------------------------------------
// Active explorer

ActiveExplorerPolicy::ActiveExplorerPolicy(size_t context_dim, size_t n_items, double mix,
                                           double learning_rate, uint64_t seed)
    : mix_(mix), learning_rate_(learning_rate) {
  arms_.reserve(n_items);
  for (size_t arm = 0; arm < n_items; ++arm) {
    arms_.emplace_back(ScorerKind::linear, context_dim, /*n_items=*/0, std::vector<size_t>{},
                       mix_seed(seed, 0xAE000000ULL | arm));
  }
}

Slate ActiveExplorerPolicy::select(size_t, std::span<const double> context,
                                   const std::vector<int>& candidates, size_t k, Rng& rng) {
  std::vector<double> scores(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    scores[i] = arms_.at(static_cast<size_t>(candidates[i])).score(context);
  }

  std::vector<bool> taken(candidates.size(), false);
  Slate slate;
  const size_t kk = std::min(k, candidates.size());
  for (size_t slot = 0; slot < kk; ++slot) {
    size_t chosen = candidates.size();
    SlotSource source = SlotSource::exploit;
    if (rng.uniform() < mix_) {
      double total = 0.0;
      for (size_t i = 0; i < candidates.size(); ++i) {
        if (!taken[i]) total += scores[i] * (1.0 - scores[i]);
      }
      if (total > 1e-12) {
        const double u = rng.uniform() * total;
        double acc = 0.0;
        for (size_t i = 0; i < candidates.size(); ++i) {
          if (taken[i]) continue;
          acc += scores[i] * (1.0 - scores[i]);
          chosen = i;
          if (u < acc) break;
        }
        source = SlotSource::explore;
      }
    }
    if (chosen == candidates.size()) {
      // Greedy branch (or zero uncertainty everywhere): best remaining score,
      // ties toward the lower item index.
      double best = -1.0;
      for (size_t i = 0; i < candidates.size(); ++i) {
        if (taken[i]) continue;
        if (scores[i] > best ||
            (scores[i] == best && chosen < candidates.size() &&
             candidates[i] < candidates[chosen])) {
          best = scores[i];
          chosen = i;
        }
      }
      source = SlotSource::exploit;
    }
    taken[chosen] = true;
    slate.items.push_back(candidates[chosen]);
    slate.source.push_back(source);
  }
  return slate;
}

void ActiveExplorerPolicy::on_feedback(std::span<const double> context, const Slate& slate,
                                       std::optional<int> hit_slot, Rng&) {
  for (size_t slot = 0; slot < slate.items.size(); ++slot) {
    const int reward = (hit_slot && static_cast<size_t>(*hit_slot) == slot) ? 1 : 0;
    ReplayEntry entry{{context.begin(), context.end()}, -1, reward};
    arms_.at(static_cast<size_t>(slate.items[slot]))
        .sgd_update_weighted(entry, learning_rate_, 1.0);
  }
}

void ActiveExplorerPolicy::on_supervised(const ReplayEntry& entry, Rng&) {
  if (entry.item < 0) fail(Errc::dimension_mismatch, "supervised entry needs an item");
  ReplayEntry ctx_entry{entry.context, -1, entry.reward};
  arms_.at(static_cast<size_t>(entry.item)).sgd_update_weighted(ctx_entry, learning_rate_, 1.0);
}

// ---------------------------------------------------------------------------

std::unique_ptr<Policy> make_policy(PolicyId id, const PolicyConfig& cfg,
                                    const ModelConfig& model, size_t context_dim,
                                    size_t n_items, uint64_t seed) {
  validate(cfg);
  const uint64_t scorer_seed = mix_seed(seed, 0x5C0BEB);
  auto linear = [&] {
    return Scorer(ScorerKind::linear, context_dim, n_items, {}, scorer_seed);
  };
  switch (id) {
    case PolicyId::static_lr:
      return std::make_unique<StaticPolicy>(linear());
    case PolicyId::epsilon_greedy:
      return std::make_unique<EpsilonGreedyPolicy>(linear(), cfg.epsilon);
    case PolicyId::fee:
      return std::make_unique<FeePolicy>(linear(), cfg.fee_explore_trials);
    case PolicyId::bootstrap_ucb:
      return std::make_unique<BootstrapPolicy>(BootstrapPolicy::Mode::ucb, context_dim, n_items,
                                               cfg.bootstrap_members, cfg.ucb_percentile,
                                               model.learning_rate, mix_seed(seed, 0xB007));
    case PolicyId::bootstrap_ts:
      return std::make_unique<BootstrapPolicy>(BootstrapPolicy::Mode::ts, context_dim, n_items,
                                               cfg.bootstrap_members, cfg.ucb_percentile,
                                               model.learning_rate, mix_seed(seed, 0xB007));
    case PolicyId::active_explorer:
      return std::make_unique<ActiveExplorerPolicy>(context_dim, n_items,
                                                    cfg.active_explorer_mix,
                                                    model.learning_rate, mix_seed(seed, 0xAE));
    case PolicyId::dbgd_lr:
      return std::make_unique<DbgdPolicy>(linear(), cfg.dbgd_delta, cfg.dbgd_beta);
    case PolicyId::dbgd_mlp:
      return std::make_unique<DbgdPolicy>(
          Scorer(ScorerKind::mlp, context_dim, n_items, model.hidden, scorer_seed),
          cfg.dbgd_delta, cfg.dbgd_beta);
  }
  fail(Errc::bad_config, "unknown policy id");
}

}  // namespace cbrec
