#include "cbrec/clustering.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>

#include "cbrec/errors.hpp"

namespace cbrec {

namespace {

double sq_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Exact neighbor search: a uniform grid with cell width eps for d <= 3,
// linear scan otherwise. Both return the brute-force result.
class NeighborIndex {
 public:
  NeighborIndex(const std::vector<std::vector<double>>& points, double eps)
      : points_(points), eps_(eps) {
    const size_t d = points.empty() ? 0 : points[0].size();
    use_grid_ = eps > 0.0 && d >= 1 && d <= 3;
    if (use_grid_) {
      dim_ = d;
      for (size_t i = 0; i < points.size(); ++i) {
        grid_[cell_of(points[i])].push_back(i);
      }
    }
  }

  std::vector<size_t> query(size_t i) const {
    if (!use_grid_) return region_query(points_, i, eps_);
    const double eps_sq = eps_ * eps_;
    std::vector<size_t> out;
    const Cell center = cell_of(points_[i]);
    Cell c{};
    const int span[3] = {1, dim_ >= 2 ? 1 : 0, dim_ >= 3 ? 1 : 0};
    for (int dx = -span[0]; dx <= span[0]; ++dx) {
      for (int dy = -span[1]; dy <= span[1]; ++dy) {
        for (int dz = -span[2]; dz <= span[2]; ++dz) {
          c = {center[0] + dx, center[1] + dy, center[2] + dz};
          auto it = grid_.find(c);
          if (it == grid_.end()) continue;
          for (size_t j : it->second) {
            if (sq_distance(points_[i], points_[j]) <= eps_sq) out.push_back(j);
          }
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  using Cell = std::array<int64_t, 3>;

  Cell cell_of(const std::vector<double>& p) const {
    Cell c{0, 0, 0};
    for (size_t k = 0; k < dim_; ++k) {
      c[k] = static_cast<int64_t>(std::floor(p[k] / eps_));
    }
    return c;
  }

  const std::vector<std::vector<double>>& points_;
  double eps_;
  bool use_grid_ = false;
  size_t dim_ = 0;
  std::map<Cell, std::vector<size_t>> grid_;
};

}  // namespace

std::vector<size_t> region_query(const std::vector<std::vector<double>>& points, size_t i,
                                 double eps) {
  if (i >= points.size()) fail(Errc::dimension_mismatch, "region_query index out of range");
  const double eps_sq = eps * eps;
  std::vector<size_t> out;
  for (size_t j = 0; j < points.size(); ++j) {
    if (sq_distance(points[i], points[j]) <= eps_sq) out.push_back(j);
  }
  return out;
}

DbscanResult dbscan(const std::vector<std::vector<double>>& points, const DbscanParams& params) {
  if (params.min_pts < 1) fail(Errc::bad_config, "min_pts must be >= 1");
  if (!(params.eps > 0.0) || !std::isfinite(params.eps)) {
    fail(Errc::bad_config, "eps must be finite and > 0");
  }

  constexpr int kUnvisited = -2;
  DbscanResult result;
  result.labels.assign(points.size(), kUnvisited);
  if (points.empty()) {
    result.labels.clear();
    return result;
  }

  NeighborIndex index(points, params.eps);
  int cluster = 0;
  for (size_t i = 0; i < points.size(); ++i) {
    if (result.labels[i] != kUnvisited) continue;
    const auto neighbors = index.query(i);
    if (neighbors.size() < static_cast<size_t>(params.min_pts)) {
      result.labels[i] = kNoiseLabel;  // may become a border point later
      continue;
    }
    const int cid = cluster++;
    result.labels[i] = cid;
    std::deque<size_t> seeds;
    for (size_t j : neighbors) {
      if (j != i) seeds.push_back(j);
    }
    while (!seeds.empty()) {
      const size_t q = seeds.front();
      seeds.pop_front();
      if (result.labels[q] == kNoiseLabel) {
        result.labels[q] = cid;  // border point, no expansion
        continue;
      }
      if (result.labels[q] != kUnvisited) continue;
      result.labels[q] = cid;
      const auto q_neighbors = index.query(q);
      if (q_neighbors.size() >= static_cast<size_t>(params.min_pts)) {
        for (size_t j : q_neighbors) {
          if (result.labels[j] == kUnvisited || result.labels[j] == kNoiseLabel) {
            seeds.push_back(j);
          }
        }
      }
    }
  }
  result.n_clusters = cluster;
  return result;
}

void update_item_profiles(ItemProfileMap& profiles, const EncodedTrial& trial, bool slate_hit) {
  if (!slate_hit) return;
  auto [it, inserted] = profiles.try_emplace(trial.chosen_item);
  ItemProfile& profile = it->second;
  if (inserted) {
    profile.item = trial.chosen_item;
    profile.mean_context = trial.context;
    profile.count = 1;
    return;
  }
  if (profile.mean_context.size() != trial.context.size()) {
    fail(Errc::dimension_mismatch, "profile/context dimension mismatch");
  }
  ++profile.count;
  const double inv = 1.0 / static_cast<double>(profile.count);
  for (size_t i = 0; i < profile.mean_context.size(); ++i) {
    profile.mean_context[i] += (trial.context[i] - profile.mean_context[i]) * inv;
  }
}

ClusterModel recluster(const ItemProfileMap& profiles, const DbscanParams& params,
                       size_t n_items) {
  ClusterModel model;
  model.params = params;

  std::vector<int> items;
  std::vector<std::vector<double>> points;
  items.reserve(profiles.size());
  points.reserve(profiles.size());
  for (const auto& [item, profile] : profiles) {
    items.push_back(item);
    points.push_back(profile.mean_context);
  }

  const DbscanResult result = points.empty() ? DbscanResult{} : dbscan(points, params);
  model.clusters.assign(static_cast<size_t>(result.n_clusters), {});
  for (size_t i = 0; i < items.size(); ++i) {
    model.labels[items[i]] = result.labels[i];
    if (result.labels[i] >= 0) {
      model.clusters[static_cast<size_t>(result.labels[i])].push_back(items[i]);
    }
  }
  for (size_t item = 0; item < n_items; ++item) {
    model.labels.try_emplace(static_cast<int>(item), kNoiseLabel);
  }

  model.centroids.assign(model.clusters.size(), {});
  for (size_t c = 0; c < model.clusters.size(); ++c) {
    const auto& members = model.clusters[c];
    std::vector<double> centroid(points[0].size(), 0.0);
    for (int item : members) {
      const auto& mean = profiles.at(item).mean_context;
      for (size_t i = 0; i < centroid.size(); ++i) centroid[i] += mean[i];
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (double& v : centroid) v *= inv;
    model.centroids[c] = std::move(centroid);
  }
  return model;
}

std::vector<int> candidate_items(const std::vector<double>& context, const ClusterModel& model,
                                 const std::vector<int>& all_items, size_t min_candidates) {
  if (!model.has_clusters()) return all_items;
  size_t best = 0;
  double best_sq = sq_distance(context, model.centroids[0]);
  for (size_t c = 1; c < model.centroids.size(); ++c) {
    const double d = sq_distance(context, model.centroids[c]);
    if (d < best_sq) {
      best_sq = d;
      best = c;
    }
  }
  const auto& members = model.clusters[best];
  if (members.size() < min_candidates) return all_items;
  return members;
}

double median_pairwise_distance(const std::vector<std::vector<double>>& points) {
  if (points.size() < 2) return 0.0;
  std::vector<double> dists;
  dists.reserve(points.size() * (points.size() - 1) / 2);
  for (size_t i = 0; i < points.size(); ++i) {
    for (size_t j = i + 1; j < points.size(); ++j) {
      dists.push_back(std::sqrt(sq_distance(points[i], points[j])));
    }
  }
  std::sort(dists.begin(), dists.end());
  const size_t n = dists.size();
  return n % 2 == 1 ? dists[n / 2] : 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
}

double auto_eps(const ItemProfileMap& profiles) {
  std::vector<std::vector<double>> points;
  points.reserve(profiles.size());
  for (const auto& [item, profile] : profiles) points.push_back(profile.mean_context);
  return std::max(0.5 * median_pairwise_distance(points), 1e-9);
}

nlohmann::json ClusterModel::to_json() const {
  nlohmann::json j;
  j["params"]["eps"] = params.eps;
  j["params"]["min_pts"] = params.min_pts;
  j["labels"] = nlohmann::json::object();
  for (const auto& [item, label] : labels) {
    j["labels"][std::to_string(item)] = label;
  }
  j["clusters"] = clusters;
  j["centroids"] = centroids;
  return j;
}

ClusterModel ClusterModel::from_json(const nlohmann::json& j) {
  ClusterModel model;
  model.params.eps = j.at("params").at("eps").get<double>();
  model.params.min_pts = j.at("params").at("min_pts").get<int>();
  for (const auto& [key, value] : j.at("labels").items()) {
    model.labels[std::stoi(key)] = value.get<int>();
  }
  model.clusters = j.at("clusters").get<std::vector<std::vector<int>>>();
  model.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
  return model;
}

}  // namespace cbrec
