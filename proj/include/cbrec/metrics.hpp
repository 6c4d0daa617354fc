#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "cbrec/policies.hpp"

namespace cbrec {

// What happened on one trial. For single-choice replay logs hits is 0 or 1
// and equals reward; synthetic multi-positive logs may set hits > 1.
struct TrialOutcome {
  size_t index = 0;
  Slate slate;
  int reward = 0;
  std::optional<int> hit_slot;
  int hits = 0;
  size_t candidates_scored = 0;
};

// Per-item click-through rate: clicks on the item / slates showing the item.
// An item never shown has CTR 0 by convention.
double compute_ctr(std::span<const TrialOutcome> outcomes, int item);

// Mean of per-item CTRs over the items shown at least once.
double compute_avg_ctr(std::span<const TrialOutcome> outcomes);

// Mean over trials of hits / k.
double compute_precision_at_k(std::span<const TrialOutcome> outcomes, size_t k);

std::map<int, double> per_item_ctr(std::span<const TrialOutcome> outcomes);

// Average CTR per non-overlapping window of `window` trials (the final
// window may be partial).
std::vector<double> windowed_avg_ctr(std::span<const TrialOutcome> outcomes, size_t window);

struct RelativeCtrSeries {
  size_t window = 0;
  double baseline_avg_ctr = 0.0;       // uniform-random policy, same stream
  std::vector<double> windowed_ctr;    // numerators
  std::vector<double> relative;        // windowed_ctr / baseline_avg_ctr
};

// The baseline outcomes come from a uniform-random policy replayed over the
// same stream; its global average CTR is the denominator for every window.
RelativeCtrSeries relative_ctr_series(std::span<const TrialOutcome> outcomes,
                                      std::span<const TrialOutcome> baseline, size_t window);

}  // namespace cbrec
