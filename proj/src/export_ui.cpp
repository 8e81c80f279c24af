#include "samdp/export_ui.hpp"

#include <cmath>

#include "samdp/errors.hpp"
#include "samdp/evaluate_eject.hpp"

namespace samdp {
namespace {

using nlohmann::json;

// NaN and infinities have no JSON spelling; they export as null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

}  // namespace

json export_document(const TrajectoryDataset& ds, const FeatureMatrix& embedding, const Clustering& clustering,
                     const SamdpModel& model, const std::vector<GridReportRow>& grid) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  if (embedding.rows() != n) throw DimensionError("embedding rows do not match the dataset");
  if (clustering.assignment.size() != ds.size()) throw DimensionError("clustering does not match the dataset");
  if (clustering.K != model.K) throw DimensionError("clustering and model disagree on K");
  const int K = model.K;

  json doc;
  doc["format"] = "samdp-export";
  doc["version"] = kExportVersion;
  doc["gamma"] = ds.gamma();
  doc["K"] = K;
  doc["w"] = clustering.w;

  doc["embedding"] = {{"dims", embedding.cols()}, {"coordinates", matrix(embedding)}};

  json records = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds[i];
    records.push_back({{"traj_id", r.traj_id},
                       {"t", r.t},
                       {"done", r.done},
                       {"reward", r.reward},
                       {"value", r.value_estimate},
                       {"cluster", clustering.assignment[i]}});
  }
  doc["records"] = std::move(records);

  const Eigen::MatrixXd mean_coords = cluster_means(embedding, clustering.assignment, K);
  const auto sizes = cluster_sizes(clustering.assignment, K);
  const Eigen::VectorXd values = cluster_values(clustering.assignment, K, ds);
  std::vector<double> reward_sum(static_cast<std::size_t>(K), 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) reward_sum[static_cast<std::size_t>(clustering.assignment[i])] += ds[i].reward;

  json clusters = json::array();
  for (int k = 0; k < K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    json c;
    c["index"] = k;
    c["size"] = sizes[ku];
    c["centroid"] = clustering.centroids.rows() == K ? vector(clustering.centroids.row(k).transpose()) : json::array();
    c["mean_coordinates"] = sizes[ku] ? vector(mean_coords.row(k).transpose()) : json::array();
    c["mean_value"] = sizes[ku] ? number(values(k)) : json(nullptr);
    c["mean_reward"] = sizes[ku] ? number(reward_sum[ku] / static_cast<double>(sizes[ku])) : json(nullptr);
    c["absorbing"] = static_cast<bool>(model.absorbing[ku]);
    clusters.push_back(std::move(c));
  }
  doc["clusters"] = std::move(clusters);

  Eigen::MatrixXd counts = model.counts.cast<double>();
  doc["model"] = {{"min_length", model.min_length},
                  {"min_prob", model.min_prob},
                  {"P", matrix(model.P)},
                  {"R", matrix(model.R)},
                  {"L", matrix(model.L)},
                  {"v", vector(model.v)},
                  {"counts", matrix(counts)}};

  const auto policy = greedy_policy(model);
  json choice = json::array();
  for (int c : policy.choice) choice.push_back(c < 0 ? json(nullptr) : json(c));
  doc["policy"] = {{"choice", choice}, {"criterion", matrix(policy.criterion)}};

  json rows = json::array();
  for (const auto& row : grid) {
    rows.push_back({{"K", row.K},
                    {"w", row.w},
                    {"seed", std::to_string(row.seed)},  // 64-bit seeds overflow JS numbers
                    {"valid", row.valid},
                    {"selected", row.selected},
                    {"vmse", number(row.score.vmse)},
                    {"inertia", number(row.score.inertia)},
                    {"intensity", number(row.score.intensity)},
                    {"entropy", number(row.score.entropy)}});
  }
  doc["grid_report"] = std::move(rows);
  return doc;
}

}  // namespace samdp
