#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbrec/models.hpp"
#include "cbrec/rng.hpp"

namespace cbrec {

enum class SlotSource : uint8_t { exploit, explore };

// The ordered top-k list shown for one trial, with per-slot origin.
struct Slate {
  std::vector<int> items;
  std::vector<SlotSource> source;

  size_t size() const { return items.size(); }
};

enum class PolicyId {
  static_lr,
  epsilon_greedy,
  fee,
  bootstrap_ucb,
  bootstrap_ts,
  active_explorer,
  dbgd_lr,
  dbgd_mlp,
};

const char* policy_id_name(PolicyId id);
std::optional<PolicyId> policy_id_from_string(const std::string& name);

struct PolicyConfig {
  double epsilon = 0.2;             // epsilon-greedy exploration probability
  size_t fee_explore_trials = 5000; // FEE exploration horizon
  int bootstrap_members = 10;       // ensemble size m
  double ucb_percentile = 80.0;     // nearest-rank percentile of member scores
  double active_explorer_mix = 0.5; // probability of the uncertainty-sampling branch
  double dbgd_delta = 1.0;          // perturbation magnitude
  double dbgd_beta = 0.05;          // step size toward a winning perturbation
};

void validate(const PolicyConfig& cfg);

// Top k candidates by score, descending; ties break toward the lower item
// index. When candidates run short the remainder is padded from global_pool
// (if given) under the same ordering.
std::vector<int> rank_top_k(const Scorer& scorer, std::span<const double> context,
                            const std::vector<int>& candidates, size_t k,
                            const std::vector<int>* global_pool = nullptr);

// k distinct uniform draws from candidates, all slots tagged explore.
Slate random_slate(const std::vector<int>& candidates, size_t k, Rng& rng);

// Merges two ranked lists: each slot flips a fair coin for the source list
// and takes its best not-yet-used item (falling through to the other list
// when one is exhausted). Provenance records the list that supplied the slot.
Slate probabilistic_interleave(const std::vector<int>& exploit_list,
                               const std::vector<int>& explore_list, size_t k, Rng& rng);

// Nearest-rank percentile of a score set (percentile in (0, 100]).
double nearest_rank_percentile(std::vector<double> scores, double percentile);

// ---------------------------------------------------------------------------
// Policy interface. One engine owns one policy and drives it sequentially:
//   select        -> slate for the current trial
//   on_feedback   -> per-trial learning signal (skipped during warmup)
//   on_supervised -> warmup / static-phase supervised observation
//   on_minibatch  -> scheduled batch update for policies with a shared scorer
class Policy {
 public:
  virtual ~Policy() = default;

  virtual Slate select(size_t trial_index, std::span<const double> context,
                       const std::vector<int>& candidates, size_t k, Rng& rng) = 0;
  virtual void on_feedback(std::span<const double> context, const Slate& slate,
                           std::optional<int> hit_slot, Rng& rng);
  virtual void on_minibatch(std::span<const ReplayEntry> batch, double learning_rate);
  virtual void on_supervised(const ReplayEntry& entry, Rng& rng);

  // Shared click model, when the policy has one (null for per-arm policies).
  virtual const Scorer* shared_scorer() const { return nullptr; }
  virtual Scorer* shared_scorer() { return nullptr; }
};

std::unique_ptr<Policy> make_policy(PolicyId id, const PolicyConfig& cfg,
                                    const ModelConfig& model, size_t context_dim,
                                    size_t n_items, uint64_t seed);

// ---------------------------------------------------------------------------
// Dueling bandit gradient descent over a shared scorer. Exposed concretely so
// the proposal/feedback mechanics can be driven directly in tests.
class DbgdPolicy : public Policy {
 public:
  DbgdPolicy(Scorer exploit, double delta, double beta);

  struct Proposal {
    Scorer explore;
    std::vector<double> direction;  // unit vector u; explore = P + delta*u
  };

  // Uniform direction on the parameter-space unit sphere.
  Proposal propose(Rng& rng) const;

  // P += beta * delta * u when the hit slot came from the explore list;
  // P is untouched otherwise.
  void apply_feedback(const Slate& slate, std::optional<int> hit_slot,
                      const std::vector<double>& direction);

  Slate select(size_t trial_index, std::span<const double> context,
               const std::vector<int>& candidates, size_t k, Rng& rng) override;
  void on_feedback(std::span<const double> context, const Slate& slate,
                   std::optional<int> hit_slot, Rng& rng) override;
  void on_minibatch(std::span<const ReplayEntry> batch, double learning_rate) override;
  const Scorer* shared_scorer() const override { return &exploit_; }
  Scorer* shared_scorer() override { return &exploit_; }

  double delta() const { return delta_; }
  double beta() const { return beta_; }

 private:
  Scorer exploit_;
  double delta_;
  double beta_;
  std::optional<std::vector<double>> pending_direction_;
};

// Greedy ranking from a frozen scorer; training happens once, outside.
class StaticPolicy : public Policy {
 public:
  explicit StaticPolicy(Scorer scorer) : scorer_(std::move(scorer)) {}

  Slate select(size_t trial_index, std::span<const double> context,
               const std::vector<int>& candidates, size_t k, Rng& rng) override;
  void on_minibatch(std::span<const ReplayEntry> batch, double learning_rate) override;
  const Scorer* shared_scorer() const override { return &scorer_; }
  Scorer* shared_scorer() override { return &scorer_; }

 private:
  Scorer scorer_;
};

class EpsilonGreedyPolicy : public Policy {
 public:
  EpsilonGreedyPolicy(Scorer scorer, double epsilon)
      : scorer_(std::move(scorer)), epsilon_(epsilon) {}

  Slate select(size_t trial_index, std::span<const double> context,
               const std::vector<int>& candidates, size_t k, Rng& rng) override;
  void on_minibatch(std::span<const ReplayEntry> batch, double learning_rate) override;
  const Scorer* shared_scorer() const override { return &scorer_; }
  Scorer* shared_scorer() override { return &scorer_; }

 private:
  Scorer scorer_;
  double epsilon_;
};

// First-explore-then-exploit: uniform slates until the horizon, greedy after.
class FeePolicy : public Policy {
 public:
  FeePolicy(Scorer scorer, size_t horizon) : scorer_(std::move(scorer)), horizon_(horizon) {}

  Slate select(size_t trial_index, std::span<const double> context,
               const std::vector<int>& candidates, size_t k, Rng& rng) override;
  void on_minibatch(std::span<const ReplayEntry> batch, double learning_rate) override;
  const Scorer* shared_scorer() const override { return &scorer_; }
  Scorer* shared_scorer() override { return &scorer_; }

 private:
  Scorer scorer_;
  size_t horizon_;
};

// Bootstrapped UCB / Thompson sampling: m context-only linear models per arm,
// each trained online with Poisson(1) example weights. The per-arm statistic
// is the score percentile (UCB) or one uniformly drawn member's score (TS).
class BootstrapPolicy : public Policy {
 public:
  enum class Mode { ucb, ts };

  BootstrapPolicy(Mode mode, size_t context_dim, size_t n_items, int members,
                  double percentile, double learning_rate, uint64_t seed);

  Slate select(size_t trial_index, std::span<const double> context,
               const std::vector<int>& candidates, size_t k, Rng& rng) override;
  void on_feedback(std::span<const double> context, const Slate& slate,
                   std::optional<int> hit_slot, Rng& rng) override;
  void on_supervised(const ReplayEntry& entry, Rng& rng) override;

  double arm_statistic(std::span<const double> context, int arm, Rng& rng) const;

 private:
  void bootstrap_update(std::span<const double> context, int arm, int reward, Rng& rng);

  Mode mode_;
  double percentile_;
  double learning_rate_;
  std::vector<std::vector<Scorer>> members_;  // [arm][member]
};

// Per-slot coin: with probability `mix`, sample an arm proportional to the
// uncertainty weight p*(1-p); otherwise take the best-scoring arm. Zero total
// uncertainty falls back to greedy.
class ActiveExplorerPolicy : public Policy {
 public:
  ActiveExplorerPolicy(size_t context_dim, size_t n_items, double mix, double learning_rate,
                       uint64_t seed);

  Slate select(size_t trial_index, std::span<const double> context,
               const std::vector<int>& candidates, size_t k, Rng& rng) override;
  void on_feedback(std::span<const double> context, const Slate& slate,
                   std::optional<int> hit_slot, Rng& rng) override;
  void on_supervised(const ReplayEntry& entry, Rng& rng) override;

 private:
  double mix_;
  double learning_rate_;
  std::vector<Scorer> arms_;
};

}  // namespace cbrec
