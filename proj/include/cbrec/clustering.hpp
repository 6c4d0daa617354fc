#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbrec/dataio.hpp"

namespace cbrec {

struct DbscanParams {
  double eps = 0.5;  // Euclidean neighborhood radius
  int min_pts = 4;   // neighborhood size (self included) for a core point
};

inline constexpr int kNoiseLabel = -1;

// All j with ||points[i] - points[j]||_2 <= eps, ascending, i included.
std::vector<size_t> region_query(const std::vector<std::vector<double>>& points, size_t i,
                                 double eps);

struct DbscanResult {
  std::vector<int> labels;  // cluster id >= 0 or kNoiseLabel
  int n_clusters = 0;
};

// Standard density-based clustering. Deterministic for a fixed input order:
// the outer scan runs in ascending index order, expansion queues are FIFO in
// ascending neighbor order, so a border point in reach of several clusters
// joins the one with the smallest cluster id.
DbscanResult dbscan(const std::vector<std::vector<double>>& points, const DbscanParams& params);

// Per-item running mean of the contexts from trials where the slate
// contained the true choice.
struct ItemProfile {
  int item = -1;
  std::vector<double> mean_context;
  size_t count = 0;
};

using ItemProfileMap = std::map<int, ItemProfile>;

// Incremental update; no-op when slate_hit is false.
void update_item_profiles(ItemProfileMap& profiles, const EncodedTrial& trial, bool slate_hit);

struct ClusterModel {
  std::map<int, int> labels;              // item -> cluster id or kNoiseLabel
  std::vector<std::vector<int>> clusters; // member items, ascending
  std::vector<std::vector<double>> centroids;
  DbscanParams params;

  bool has_clusters() const { return !clusters.empty(); }

  nlohmann::json to_json() const;
  static ClusterModel from_json(const nlohmann::json& j);
};

// Clusters the profile mean vectors; items without a profile are noise.
ClusterModel recluster(const ItemProfileMap& profiles, const DbscanParams& params,
                       size_t n_items);

// Members of the cluster whose centroid is nearest to the context. Falls
// back to all_items when the model has no clusters or the nearest cluster
// holds fewer than min_candidates items, so a full slate stays possible.
std::vector<int> candidate_items(const std::vector<double>& context, const ClusterModel& model,
                                 const std::vector<int>& all_items, size_t min_candidates);

// Median pairwise Euclidean distance (0 for fewer than 2 points). The
// default eps when none is configured is half of this.
double median_pairwise_distance(const std::vector<std::vector<double>>& points);

double auto_eps(const ItemProfileMap& profiles);

}  // namespace cbrec
