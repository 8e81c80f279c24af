#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "samdp/trajectory_store.hpp"

namespace samdp {

struct SkillInstance {
  int traj_id = 0;
  int t_enter = 0;      // first step of the source-cluster run
  int t_exit = 0;       // first step of the destination-cluster run
  std::size_t record = 0;  // dataset index of the t_enter record

  int length() const { return t_exit - t_enter; }
  bool operator==(const SkillInstance&) const = default;
};

struct Skill {
  int from = 0;
  int to = 0;
  std::vector<SkillInstance> instances;
  bool operator==(const Skill&) const = default;
};

// Splits every trajectory into maximal same-cluster runs; each pair of
// consecutive runs is one instance of the skill (run cluster -> next run cluster).
// Skills are returned sorted by (from, to).
std::vector<Skill> identify_skills(const std::vector<int>& assignment, int K, const TrajectoryDataset& ds);

struct InferenceOptions {
  int min_length = 2;     // instances shorter than this are discarded
  double min_prob = 0.1;  // transitions below this probability are truncated
  bool prune = true;      // false: keep every instance and every transition
};

struct SamdpModel {
  int K = 0;
  int w = 0;
  double gamma = 1.0;
  int min_length = 2;
  double min_prob = 0.1;
  Eigen::MatrixXd P;       // SAMDP policy transition matrix
  Eigen::MatrixXd R;       // mean discounted skill reward
  Eigen::MatrixXd L;       // mean skill length
  Eigen::VectorXd v;       // SAMDP value
  Eigen::MatrixXi counts;  // surviving instances per (i, j) before probability truncation
  std::vector<bool> absorbing;
  std::vector<std::string> warnings;

  // Expected skill length and reward out of each cluster under P.
  Eigen::VectorXd expected_length() const;
  Eigen::VectorXd expected_reward() const;
  // Row-normalized counts, i.e. the transition frequencies before truncation.
  Eigen::MatrixXd frequencies() const;
};

// Discounted return of one skill instance: r_t + gamma r_{t+1} + ... over its
// k = length() steps, where r_t is the reward logged on record t.
double instance_reward(const SkillInstance& instance, const TrajectoryDataset& ds, double gamma);

SamdpModel infer(const std::vector<Skill>& skills, int K, const TrajectoryDataset& ds, double gamma,
                 const InferenceOptions& options = {});

// Solves v = r + diag(gamma^k) P v. Absorbing rows solve to 0.
Eigen::VectorXd samdp_value(const Eigen::MatrixXd& P, const Eigen::MatrixXd& R, const Eigen::MatrixXd& L,
                            double gamma);

// max_i |v_i - (r_i + gamma^{k_i} (P v)_i)|
double bellman_residual(const SamdpModel& model);

// Structured text with one block per matrix; see write_model for the layout.
void write_model(std::ostream& out, const SamdpModel& model);
std::string to_model_string(const SamdpModel& model);
SamdpModel read_model(std::istream& in);
SamdpModel load_model(const std::string& path);

}  // namespace samdp
