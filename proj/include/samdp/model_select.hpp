#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "samdp/embedding.hpp"
#include "samdp/samdp_core.hpp"
#include "samdp/st_cluster.hpp"
#include "samdp/trajectory_store.hpp"

namespace samdp {

// All four criteria are better when lower.
struct ModelScore {
  double vmse = 0.0;
  double inertia = 0.0;
  double intensity = 0.0;
  double entropy = 0.0;

  bool strictly_better_than(const ModelScore& other) const {
    return vmse < other.vmse && inertia < other.inertia && intensity < other.intensity &&
           entropy < other.entropy;
  }
};

// Mean value_estimate of the records in each cluster (0 for empty clusters).
Eigen::VectorXd cluster_values(const std::vector<int>& assignment, int K, const TrajectoryDataset& ds);
std::vector<std::size_t> cluster_sizes(const std::vector<int>& assignment, int K);

// ||v - v_SAMDP|| / ||v|| with v the per-cluster mean value estimate.
double vmse(const SamdpModel& model, const Clustering& clustering, const TrajectoryDataset& ds);

// Fraction of consecutive same-trajectory record pairs whose clusters differ.
double intensity_factor(const std::vector<int>& assignment, const TrajectoryDataset& ds);
double intensity_factor(const Clustering& clustering, const TrajectoryDataset& ds);

// sum_i |C_i| * H(P_i), natural log, 0 log 0 = 0.
double samdp_entropy(const SamdpModel& model, const Clustering& clustering);
double samdp_entropy(const Eigen::MatrixXd& P, const std::vector<std::size_t>& sizes);

ModelScore score_model(const SamdpModel& model, const Clustering& clustering, const FeatureMatrix& x,
                       const TrajectoryDataset& ds);

struct Candidate {
  int K = 0;
  int w = 0;
  int restart = 0;
  std::uint64_t seed = 0;
  bool valid = false;
  std::string failure;  // why the cell was flagged, when !valid
  Clustering clustering;
  SamdpModel model;
  ModelScore score;
};

struct GridSpec {
  int k_min = 15;
  int k_max = 25;
  int w_min = 1;
  int w_max = 7;
  int restarts = 1;
  std::uint64_t seed = 0;
  int max_iter = 300;
  InferenceOptions inference;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct CandidateSet {
  GridSpec grid;
  std::vector<Candidate> candidates;  // ordered by (K, w, restart)
};

// Cluster -> skills -> infer -> score for one cell. Failures are captured in
// the returned candidate instead of thrown.
Candidate build_candidate(const FeatureMatrix& x, const TrajectoryDataset& ds, int K, int w,
                          std::uint64_t seed, int max_iter, const InferenceOptions& inference);

std::uint64_t cell_seed(std::uint64_t master, int K, int w, int restart);

CandidateSet grid_search(const TrajectoryDataset& ds, const FeatureMatrix& x, const GridSpec& grid);

struct Selection {
  std::size_t index = 0;  // into the candidate list
  int prefix = 0;         // the stopping p
};

// Smallest p at which the p-prefixes of the four criterion orderings share a
// member. Ties within an ordering are broken by (K, w, restart, seed), so the
// result does not depend on list order. Among several members the lowest vmse
// wins, then lowest K, then lowest w.
Selection select(const std::vector<Candidate>& candidates);
Selection select(const CandidateSet& set);

struct NullTestResult {
  double p_value = 0.0;
  std::size_t trials = 0;
  std::size_t better = 0;
  std::size_t degenerate = 0;  // random models that could not be built at all
};

// Scores `trials` models built from uniformly random K-cluster assignments and
// counts those strictly better than `selected` on all four criteria.
NullTestResult null_p_value(const Candidate& selected, const TrajectoryDataset& ds, const FeatureMatrix& x,
                            std::size_t trials, std::uint64_t seed, const InferenceOptions& inference = {},
                            unsigned threads = 0);

struct GridReportRow {
  int K = 0;
  int w = 0;
  std::uint64_t seed = 0;
  ModelScore score;
  bool valid = false;
  bool selected = false;
  bool operator==(const GridReportRow& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return K == o.K && w == o.w && seed == o.seed && valid == o.valid && selected == o.selected &&
           same(score.vmse, o.score.vmse) && same(score.inertia, o.score.inertia) &&
           same(score.intensity, o.score.intensity) && same(score.entropy, o.score.entropy);
  }
};

std::vector<GridReportRow> report_rows(const CandidateSet& set, std::optional<std::size_t> selected);

// "#samdp-grid v1 candidates=<n>" then "K w seed vmse inertia intensity entropy selected"
// per candidate; flagged cells print nan criteria.
void write_grid_report(std::ostream& out, const std::vector<GridReportRow>& rows);
std::string to_grid_report_string(const std::vector<GridReportRow>& rows);
std::vector<GridReportRow> read_grid_report(std::istream& in);

}  // namespace samdp
