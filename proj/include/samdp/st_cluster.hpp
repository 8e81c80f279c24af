#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "samdp/embedding.hpp"
#include "samdp/trajectory_store.hpp"

namespace samdp {

struct Clustering {
  int K = 0;
  int w = 0;
  std::vector<int> assignment;     // one entry per dataset record, in [0, K)
  Eigen::MatrixXd centroids;       // K x d
  std::vector<bool> empty;         // clusters left without members
  double inertia = 0.0;            // pointwise, see inertia()
  std::uint64_t seed = 0;
  int iterations = 0;
  bool converged = false;
  // Windowed objective after each assignment step.
  std::vector<double> objective_trace;
  std::vector<std::string> warnings;
};

// K-means++ seeding on pointwise squared distances.
Eigen::MatrixXd kmeans_plus_plus(const FeatureMatrix& x, int K, std::uint64_t seed);

// Record indices of the window of half-width w around record i, truncated at
// the boundaries of i's trajectory.
struct Window {
  std::size_t begin;
  std::size_t end;
};
Window window_of(const TrajectoryDataset& ds, std::size_t record, int w);

// Sum over records t of the squared Frobenius distance between the window X_t
// and the centroid of t's cluster broadcast over the window.
double windowed_objective(const FeatureMatrix& x, const TrajectoryDataset& ds,
                          const std::vector<int>& assignment, const Eigen::MatrixXd& centroids, int w);

// Lloyd iterations whose assignment step scores each centroid against the whole
// trajectory window around a point; the update step averages the assigned points
// themselves. Ties go to the lowest cluster index.
Clustering st_kmeans(const FeatureMatrix& x, const TrajectoryDataset& ds, int K, int w,
                     std::uint64_t seed, int max_iter = 300);

// Same iteration from caller-supplied initial centroids.
Clustering st_kmeans_from(const FeatureMatrix& x, const TrajectoryDataset& ds,
                          Eigen::MatrixXd initial_centroids, int w, int max_iter = 300);

// Sum over points of the squared distance to the nearest centroid.
double inertia(const FeatureMatrix& x, const Clustering& clustering);
double inertia(const FeatureMatrix& x, const Eigen::MatrixXd& centroids);

// Index of the nearest centroid (lowest index on ties).
int nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::Ref<const Eigen::RowVectorXd>& point);

// Mean of the points assigned to each cluster; empty clusters get a zero row.
Eigen::MatrixXd cluster_means(const FeatureMatrix& x, const std::vector<int>& assignment, int K);

// "#samdp-clusters v1 K=<K> w=<w> d=<d> seed=<seed>", K centroid lines
// "centroid i c_1 ... c_d", then one "traj_id t cluster" line per record.
void write_clustering(std::ostream& out, const Clustering& clustering, const TrajectoryDataset& ds);
std::string to_clustering_string(const Clustering& clustering, const TrajectoryDataset& ds);
Clustering read_clustering(std::istream& in, const TrajectoryDataset& ds);
Clustering load_clustering(const std::string& path, const TrajectoryDataset& ds);

}  // namespace samdp
