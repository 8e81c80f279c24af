#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "samdp/embedding.hpp"
#include "samdp/model_select.hpp"
#include "samdp/samdp_core.hpp"
#include "samdp/st_cluster.hpp"
#include "samdp/trajectory_store.hpp"

namespace samdp {

struct GreedyPolicy {
  std::vector<int> choice;     // -1 where the cluster has no outgoing skill
  Eigen::MatrixXd criterion;   // R_ij + gamma^L_ij v_j, -inf where no skill was observed
};

// argmax_j over observed skills (counts_ij > 0) of R_ij + gamma^{L_ij} v_j,
// ties toward the lower j.
GreedyPolicy greedy_policy(const SamdpModel& model);

// For every cluster i: Pearson correlation, across trajectories that leave i at
// least once, between the fraction of departures from i that follow choice_i
// and the trajectory's undiscounted reward. nullopt when fewer than two
// trajectories qualify or either marginal has zero variance.
std::vector<std::optional<double>> greedy_correlation(const SamdpModel& model, const GreedyPolicy& policy,
                                                      const TrajectoryDataset& ds,
                                                      const std::vector<int>& assignment);

// Pearson correlation; nullopt on fewer than two samples or zero variance.
std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b);

// One-hot matrix of the greedy choices.
Eigen::MatrixXd policy_matrix(const GreedyPolicy& policy, int K);

// Row-stochastic SAMDP transition matrix from every cluster change in the given
// trajectories (no length or probability truncation). smoothing > 0 is added to
// every off-diagonal entry of the row-normalized frequencies before the rows
// are normalized again.
Eigen::MatrixXd transition_matrix(const std::vector<int>& assignment, int K, const TrajectoryDataset& ds,
                                  const std::vector<std::size_t>& trajectories, double smoothing);

// Correlation between the greedy policy's one-hot matrix and a transition
// matrix over the off-diagonal entries of clusters that have a greedy choice.
std::optional<double> transition_correlation(const GreedyPolicy& policy, const Eigen::MatrixXd& T);

// Trajectory indices sorted by descending total reward (ties: lower index first).
std::vector<std::size_t> rank_by_reward(const TrajectoryDataset& ds);

struct EjectMonitor {
  int K = 0;
  int top_k = 0;
  double smoothing = 0.0;
  Eigen::MatrixXd T_plus;
  Eigen::MatrixXd T_minus;
  Eigen::MatrixXd centroids;
};

inline constexpr double kDefaultEjectSmoothing = 0.01;

// Nearest-centroid cluster of every feature row.
std::vector<int> project(const FeatureMatrix& features, const Eigen::MatrixXd& centroids);

// T+ and T- from the top_k / bottom_k rewarded training trajectories. Training
// records are projected on the centroids pointwise, exactly as eject_run
// projects test records, so both sides count the same kind of transitions.
EjectMonitor fit_eject(const TrajectoryDataset& train, const FeatureMatrix& train_features,
                       const Clustering& clustering, const SamdpModel& model, int top_k,
                       double smoothing = kDefaultEjectSmoothing);

struct EjectTrajectory {
  int traj_id = 0;
  std::optional<int> ejected_at;  // t of the first record after the triggering transition
  double total_reward = 0.0;
};

struct EjectReport {
  std::vector<EjectTrajectory> trajectories;
  double mean_all = 0.0;
  std::optional<double> mean_kept;  // nullopt when every trajectory was ejected
  double gain_percent = 0.0;        // (mean_kept - mean_all) / |mean_all| * 100
  std::size_t ejected = 0;
};

// Projects every test record on its nearest centroid and, per trajectory,
// accumulates log T-[i,j] - log T+[i,j] over SAMDP transitions; the trajectory
// is ejected at the first transition where the sum exceeds `threshold`.
EjectReport eject_run(const TrajectoryDataset& test, const FeatureMatrix& test_features,
                      const EjectMonitor& monitor, double threshold = 0.0);

// "#samdp-eject v1 trajectories=<n>" then "traj_id ejected_at(step|-) total_reward"
// per trajectory and "mean_all", "mean_unejected", "gain_percent" summary lines.
void write_eject_report(std::ostream& out, const EjectReport& report);
std::string to_eject_report_string(const EjectReport& report);
EjectReport read_eject_report(std::istream& in);

// Rows of `full_features` belonging to the records of `part`, matched by (traj_id, t).
FeatureMatrix select_rows(const FeatureMatrix& full_features, const TrajectoryDataset& full,
                          const TrajectoryDataset& part);

// The full eject experiment: split the corpus, select a model on the training
// part by grid search, fit the monitor and run it on the held-out part.
// `features` are assembled over the whole corpus so both parts share one space.
struct EjectExperiment {
  Candidate selected;
  EjectMonitor monitor;
  EjectReport report;
  std::size_t train_trajectories = 0;
};

// top_k = 0 uses a third of the training trajectories.
EjectExperiment eject_experiment(const TrajectoryDataset& full, const FeatureMatrix& features,
                                 std::size_t train_count, std::uint64_t split_seed, const GridSpec& grid,
                                 int top_k = 0, double smoothing = kDefaultEjectSmoothing,
                                 double threshold = 0.0);

}  // namespace samdp
