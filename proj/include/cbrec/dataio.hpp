#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cbrec/rng.hpp"

namespace cbrec {

// One logged user/item interaction. Values are pre-typed by the loader:
// a raw cell that parses as a number lands in continuous_values, anything
// else in categorical_values. fit_schema rejects fields that mix the two.
struct RawInteraction {
  std::string user_id;
  int64_t timestamp_ms = 0;
  std::map<std::string, std::string> categorical_values;
  std::map<std::string, double> continuous_values;
  std::string chosen_item;
};

struct CategoricalField {
  std::string name;
  std::vector<std::string> vocabulary;  // sorted, unique
};

struct ContinuousField {
  std::string name;
  double min = 0.0;
  double max = 0.0;
};

// Encoding layout: one-hot blocks for categorical fields (field order =
// sorted by name, vocabulary order = lexicographic), then min-max scaled
// continuous fields (sorted by name). Deterministic, so two machines
// encode identical logs identically.
struct FeatureSchema {
  std::vector<CategoricalField> categorical_fields;
  std::vector<ContinuousField> continuous_fields;
  std::vector<std::string> item_vocabulary;  // sorted, unique

  size_t context_dim() const;
  size_t n_items() const { return item_vocabulary.size(); }
  int item_index(const std::string& id) const;  // -1 when unknown
};

struct EncodedTrial {
  size_t index = 0;  // position in the replay stream
  std::vector<double> context;
  int chosen_item = -1;
};

struct EncodeStats {
  size_t unknown_category_count = 0;
};

FeatureSchema fit_schema(const std::vector<RawInteraction>& raws);

// Unseen categorical values encode as an all-zero block (counted in stats);
// out-of-range continuous values clamp to [0,1]; max==min maps to 0.5.
EncodedTrial encode(const RawInteraction& raw, const FeatureSchema& schema,
                    EncodeStats* stats = nullptr);

// Orders trials by (timestamp, input position), or by a seeded shuffle when
// order_seed is given, then encodes. trial.index == stream position.
std::vector<EncodedTrial> make_stream(const std::vector<RawInteraction>& raws,
                                      const FeatureSchema& schema,
                                      std::optional<uint64_t> order_seed = std::nullopt,
                                      EncodeStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Synthetic interaction logs (the paper's dataset is external; tests and the
// bundled experiments run on these).

struct SyntheticEnvSpec {
  int n_items = 0;
  std::vector<int> categorical_vocab_sizes;
  int n_continuous = 0;
  int n_segments = 0;
  // Row-stochastic, n_segments x n_items: P(chosen item | latent segment).
  std::vector<std::vector<double>> segment_preference_matrix;
  // When set, item columns of the preference matrix are re-permuted every
  // drift_period trials (non-stationary stream).
  std::optional<int> drift_period;
  uint64_t seed = 0;
  // Probability a categorical feature emits its segment-modal value
  // (otherwise uniform), and the noise s.d. of continuous features around
  // the segment mean. Control how identifiable the latent segment is.
  double feature_signal = 0.85;
  double continuous_noise = 0.12;
};

void validate_spec(const SyntheticEnvSpec& spec);

std::vector<RawInteraction> generate_synthetic(const SyntheticEnvSpec& spec, size_t n_trials);

// Preference matrix builders.
// concentrated: each segment puts main_mass on its favorite item, second_mass
// on a runner-up, the remainder spread uniformly.
std::vector<std::vector<double>> concentrated_preferences(int n_segments, int n_items,
                                                          double main_mass, double second_mass);
// dirichlet: rows drawn i.i.d. from Dirichlet(alpha) with the given seed.
std::vector<std::vector<double>> dirichlet_preferences(int n_segments, int n_items, double alpha,
                                                       uint64_t seed);

// ---------------------------------------------------------------------------
// CSV bridge. Required columns: user_id, timestamp, chosen_item. Every other
// column is auto-typed per cell (numeric => continuous, else categorical).

std::vector<RawInteraction> interactions_from_csv(const std::string& path);
void interactions_to_csv(const std::string& path, const std::vector<RawInteraction>& raws);

}  // namespace cbrec
