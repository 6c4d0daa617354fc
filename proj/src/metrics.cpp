#include "cbrec/metrics.hpp"

#include <algorithm>

#include "cbrec/errors.hpp"

namespace cbrec {

namespace {

struct Tally {
  size_t shown = 0;
  size_t clicked = 0;
};

std::map<int, Tally> tally_items(std::span<const TrialOutcome> outcomes) {
  std::map<int, Tally> tallies;
  for (const auto& outcome : outcomes) {
    for (size_t slot = 0; slot < outcome.slate.items.size(); ++slot) {
      Tally& t = tallies[outcome.slate.items[slot]];
      ++t.shown;
      if (outcome.hit_slot && static_cast<size_t>(*outcome.hit_slot) == slot) ++t.clicked;
    }
  }
  return tallies;
}

}  // namespace

double compute_ctr(std::span<const TrialOutcome> outcomes, int item) {
  size_t shown = 0, clicked = 0;
  for (const auto& outcome : outcomes) {
    for (size_t slot = 0; slot < outcome.slate.items.size(); ++slot) {
      if (outcome.slate.items[slot] != item) continue;
      ++shown;
      if (outcome.hit_slot && static_cast<size_t>(*outcome.hit_slot) == slot) ++clicked;
    }
  }
  if (shown == 0) return 0.0;
  return static_cast<double>(clicked) / static_cast<double>(shown);
}

std::map<int, double> per_item_ctr(std::span<const TrialOutcome> outcomes) {
  std::map<int, double> ctr;
  for (const auto& [item, tally] : tally_items(outcomes)) {
    ctr[item] = static_cast<double>(tally.clicked) / static_cast<double>(tally.shown);
  }
  return ctr;
}

double compute_avg_ctr(std::span<const TrialOutcome> outcomes) {
  const auto ctr = per_item_ctr(outcomes);
  if (ctr.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [item, value] : ctr) sum += value;
  return sum / static_cast<double>(ctr.size());
}

double compute_precision_at_k(std::span<const TrialOutcome> outcomes, size_t k) {
  if (k == 0) fail(Errc::bad_config, "precision@k needs k >= 1");
  if (outcomes.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& outcome : outcomes) {
    sum += static_cast<double>(outcome.hits) / static_cast<double>(k);
  }
  return sum / static_cast<double>(outcomes.size());
}

std::vector<double> windowed_avg_ctr(std::span<const TrialOutcome> outcomes, size_t window) {
  if (window == 0) fail(Errc::bad_config, "window must be >= 1");
  std::vector<double> out;
  for (size_t begin = 0; begin < outcomes.size(); begin += window) {
    const size_t len = std::min(window, outcomes.size() - begin);
    out.push_back(compute_avg_ctr(outcomes.subspan(begin, len)));
  }
  return out;
}

RelativeCtrSeries relative_ctr_series(std::span<const TrialOutcome> outcomes,
                                      std::span<const TrialOutcome> baseline, size_t window) {
  RelativeCtrSeries series;
  series.window = window;
  series.baseline_avg_ctr = compute_avg_ctr(baseline);
  series.windowed_ctr = windowed_avg_ctr(outcomes, window);
  series.relative.reserve(series.windowed_ctr.size());
  for (double value : series.windowed_ctr) {
    series.relative.push_back(series.baseline_avg_ctr > 0.0 ? value / series.baseline_avg_ctr
                                                            : 0.0);
  }
  return series;
}

}  // namespace cbrec
