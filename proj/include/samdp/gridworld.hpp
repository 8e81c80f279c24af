#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "samdp/trajectory_store.hpp"

namespace samdp::gridworld {

struct GridState {
  int x = 0;
  int y = 0;
  bool b = false;  // ball collected
  bool operator==(const GridState&) const = default;
};

enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3 };
inline constexpr int kActionCount = 4;

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

struct GridConfig {
  int width = 0;   // L
  int height = 0;  // H
  std::vector<bool> walls;  // row-major, width * height
  Cell origin;
  Cell ball;
  double step_reward = -0.01;
  double goal_reward = 1.0;
  double epsilon = 0.05;
  double gamma = 0.95;
  int max_steps = 500;
  // Corrupted trajectories act greedily on the negated value table for a
  // contiguous segment whose length is drawn from [min, max].
  int corruption_min_steps = 8;
  int corruption_max_steps = 20;
  std::uint64_t seed = 0;

  bool is_wall(int x, int y) const;
  bool is_free(int x, int y) const;
};

// Header lines "key=value" followed by the grid ('#' wall, '.' free, 'X' origin,
// 'B' ball). Blank lines are ignored. Throws ParseError / ValidationError.
GridConfig parse_maze(const std::string& text);
GridConfig load_maze(const std::string& path);

struct StepResult {
  GridState next;
  double reward = 0.0;
  bool done = false;
};

// Deterministic move; walls and borders block. Collecting the ball flips b.
// Entering the origin with the ball ends the episode and pays
// goal_reward + step_reward.
StepResult step(const GridConfig& cfg, const GridState& s, Action a);

// (x, y) before the ball, (2L - x, y) after.
std::array<double, 2> phi(const GridState& s, int L);

class ValueTable {
 public:
  ValueTable() = default;
  ValueTable(int width, int height) : width_(width), height_(height), v_(2 * static_cast<std::size_t>(width * height), 0.0) {}
  double& operator()(const GridState& s) { return v_[index(s)]; }
  double operator()(const GridState& s) const { return v_[index(s)]; }
  std::size_t index(const GridState& s) const {
    return (static_cast<std::size_t>(s.b) * static_cast<std::size_t>(height_) + static_cast<std::size_t>(s.y)) *
               static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(s.x);
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> v_;
};

// Optimal values by value iteration, iterated until the Bellman residual is
// below 1e-10 everywhere. Throws ValidationError if the goal is unreachable.
ValueTable value_oracle(const GridConfig& cfg);

// max_a |r + gamma V(s')| backup minus V(s), maximised over free states.
double bellman_residual(const GridConfig& cfg, const ValueTable& v);

// Lowest-index action maximising r + gamma V(s') (or minimising V(s') when
// `negated`).
Action greedy_action(const GridConfig& cfg, const ValueTable& v, const GridState& s, bool negated = false);

// Rolls out n_traj episodes of the epsilon-greedy optimal policy from the
// origin. Each trajectory is corrupted with probability `corruption`.
// Features are phi(s); value estimates come from the oracle.
TrajectoryDataset generate(const GridConfig& cfg, int n_traj, double corruption);

// Inverse of phi on dataset features: (x, y) and b per record.
std::vector<std::array<double, 2>> raw_positions(const TrajectoryDataset& ds, int L);
std::vector<bool> ball_flags(const TrajectoryDataset& ds, int L);

// Number of clusters holding both b=0 and b=1 records.
int mixed_clusters(const std::vector<int>& assignment, int K, const std::vector<bool>& flags);

}  // namespace samdp::gridworld
