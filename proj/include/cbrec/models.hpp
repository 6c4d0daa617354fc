#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "cbrec/rng.hpp"

namespace cbrec {

enum class ScorerKind { linear, mlp };

const char* scorer_kind_name(ScorerKind k);

// One (context, item, reward) observation. item == -1 means the entry is for
// a context-only model (per-arm baselines score the bare context).
struct ReplayEntry {
  std::vector<double> context;
  int item = -1;
  int reward = 0;
};

// Click-probability model over context (+) one-hot(item), trained with SGD on
// binary cross-entropy. All weights and biases live in one flat parameter
// vector so a caller can read, perturb, and write the whole model state —
// layer l occupies [w_offset[l], w_offset[l] + out*in) row-major, then its
// bias block. A linear model is the degenerate architecture [input, 1].
class Scorer {
 public:
  // n_items == 0 builds a context-only model (input = context alone).
  // hidden is ignored for ScorerKind::linear.
  Scorer(ScorerKind kind, size_t context_dim, size_t n_items,
         const std::vector<size_t>& hidden, uint64_t init_seed);

  double score(std::span<const double> context, int item = -1) const;
  // Scores many items against one context, reusing the assembled input.
  void score_many(std::span<const double> context, std::span<const int> items,
                  std::span<double> out) const;

  // One gradient step on the mean BCE loss over the batch; returns the
  // pre-step mean loss. Deterministic given parameters and batch order.
  double sgd_update(std::span<const ReplayEntry> batch, double learning_rate);
  // Single-entry step with an importance weight (Poisson bootstrap members
  // use weight ~ Poisson(1)).
  double sgd_update_weighted(const ReplayEntry& entry, double learning_rate, double weight);

  double loss(const ReplayEntry& entry) const;
  // Analytic gradient of the single-entry BCE loss w.r.t. the flat vector.
  std::vector<double> loss_gradient(const ReplayEntry& entry) const;

  const std::vector<double>& flat_parameters() const { return params_; }
  void set_flat_parameters(std::span<const double> p);
  size_t parameter_count() const { return params_.size(); }

  ScorerKind kind() const { return kind_; }
  size_t context_dim() const { return context_dim_; }
  size_t n_items() const { return n_items_; }
  size_t input_dim() const { return widths_.front(); }
  const std::vector<size_t>& layer_widths() const { return widths_; }

 private:
  void assemble_input(std::span<const double> context, int item,
                      std::vector<double>& input) const;
  // Forward pass; when acts != nullptr the per-layer pre-activations and
  // activations needed by backprop are recorded.
  double forward(const std::vector<double>& input,
                 std::vector<std::vector<double>>* acts) const;
  void accumulate_gradient(const ReplayEntry& entry, std::vector<double>& grad,
                           double* loss_out) const;

  ScorerKind kind_;
  size_t context_dim_;
  size_t n_items_;
  std::vector<size_t> widths_;    // [input, hidden..., 1]
  std::vector<size_t> w_offset_;  // per layer
  std::vector<size_t> b_offset_;
  std::vector<double> params_;
};

// Max relative error between analytic and central finite-difference
// gradients: max_i |a_i - n_i| / max(1e-8, |a_i| + |n_i|).
double gradient_check(const Scorer& scorer, const ReplayEntry& entry, double h = 1e-5);

// Probabilities are clamped to [kProbEps, 1 - kProbEps] so the loss stays
// finite for every parameter value.
inline constexpr double kProbEps = 1e-12;
double bce_loss(double p, int reward);

// Bounded FIFO memory of past observations. capacity == 0 means unbounded;
// otherwise eviction is oldest-first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity = 0) : capacity_(capacity) {}

  void push(ReplayEntry entry);
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  size_t capacity() const { return capacity_; }
  const ReplayEntry& at(size_t i) const { return entries_.at(i); }

 private:
  std::deque<ReplayEntry> entries_;
  size_t capacity_;
};

// Uniform sample of n entries: without replacement when the buffer holds at
// least n, with replacement otherwise. Deterministic per seed.
std::vector<ReplayEntry> sample_minibatch(const ReplayBuffer& buffer, size_t n, uint64_t seed);

// Checkpoints: little-endian binary (header + f64 parameter array) plus a
// JSON metadata sidecar at path + ".json".
void save_scorer(const std::string& path, const Scorer& scorer);
Scorer load_scorer(const std::string& path);

// Training hyperparameters shared by the engine and policies.
struct ModelConfig {
  std::vector<size_t> hidden = {64, 32};  // MLP hidden widths
  double learning_rate = 0.1;
  size_t replay_capacity = 0;  // 0 = unbounded
  // A scheduled update trains on the sampled minibatch in update_chunk-sized
  // slices for update_passes epochs.
  size_t update_passes = 4;
  size_t update_chunk = 50;
  size_t static_epochs = 3;  // train-once passes for the static policy
};

}  // namespace cbrec
