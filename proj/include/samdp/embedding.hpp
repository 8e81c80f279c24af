#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "samdp/trajectory_store.hpp"

namespace samdp {

// n x m, row i belongs to dataset record i.
using FeatureMatrix = Eigen::MatrixXd;

struct EmbeddingConfig {
  int pca_dims = 50;
  int tsne_dims = 2;
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::uint64_t seed = 0;
};

// Largest n accepted by the exact O(n^2) t-SNE.
inline constexpr std::size_t kTsneMaxPoints = 20000;

FeatureMatrix feature_matrix(const TrajectoryDataset& ds);

// Column-wise zero mean, unit (population) variance. Constant columns become 0.
FeatureMatrix normalize(const FeatureMatrix& x);

struct PcaResult {
  FeatureMatrix projected;               // n x kept components
  std::vector<double> explained_ratio;   // per kept component, descending
  std::vector<std::string> warnings;
};

// Projection of the mean-centred data onto the leading principal axes.
// Components whose eigenvalue is below 1e-12 of the largest are dropped.
PcaResult pca_detailed(const FeatureMatrix& x, int dims);
FeatureMatrix pca(const FeatureMatrix& x, int dims);

struct KlSample {
  int iteration;
  double kl;
};

// Exact t-SNE. If trace is non-null the KL divergence of the unexaggerated
// objective is appended every 50 iterations and at the final iteration.
FeatureMatrix tsne(const FeatureMatrix& x, const EmbeddingConfig& cfg,
                   std::vector<KlSample>* trace = nullptr);

// normalize -> pca (when m > pca_dims) -> tsne.
FeatureMatrix embed(const FeatureMatrix& x, const EmbeddingConfig& cfg,
                    std::vector<std::string>* warnings = nullptr);

// [embedding | value_estimate], each column normalized.
FeatureMatrix assemble(const FeatureMatrix& embedding, const TrajectoryDataset& ds);

// "#samdp-embedding v1 dims=<d>" then "traj_id t e_1 ... e_d" per record.
void write_embedding(std::ostream& out, const FeatureMatrix& embedding, const TrajectoryDataset& ds);
std::string to_embedding_string(const FeatureMatrix& embedding, const TrajectoryDataset& ds);
// Rows are matched to dataset records by (traj_id, t); every record must be present once.
FeatureMatrix read_embedding(std::istream& in, const TrajectoryDataset& ds);
FeatureMatrix load_embedding(const std::string& path, const TrajectoryDataset& ds);

}  // namespace samdp
