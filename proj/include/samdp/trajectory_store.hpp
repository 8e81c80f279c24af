#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace samdp {

struct StateRecord {
  int traj_id = 0;
  int t = 0;
  bool done = false;
  int action = -1;  // -1 when the producer did not log actions
  double reward = 0.0;
  double value_estimate = 0.0;
  std::vector<double> features;

  bool operator==(const StateRecord&) const = default;
};

// Half-open range [begin, end) of record indices belonging to one trajectory.
struct TrajectorySpan {
  int traj_id = 0;
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const TrajectorySpan&) const = default;
};

// Immutable collection of trajectories. Records are stored as the concatenation
// of trajectories, each in time order, so record index i is also the row index
// of every per-record matrix built from the dataset.
class TrajectoryDataset {
 public:
  TrajectoryDataset() = default;

  // Validates the StateRecord invariants and groups records by traj_id in order
  // of first appearance. Throws ValidationError / DimensionError / ArgumentError.
  TrajectoryDataset(std::vector<StateRecord> records, double gamma);

  std::size_t size() const { return records_.size(); }
  std::size_t feature_dim() const { return m_; }
  double gamma() const { return gamma_; }

  const std::vector<StateRecord>& records() const { return records_; }
  const StateRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<TrajectorySpan>& trajectories() const { return spans_; }
  std::size_t trajectory_count() const { return spans_.size(); }

  // Index into trajectories() for the trajectory owning record i.
  std::size_t trajectory_of(std::size_t record) const { return owner_[record]; }

  // Undiscounted sum of rewards along the trajectory.
  double total_reward(const TrajectorySpan& span) const;

  // Sub-dataset made of the listed trajectories (indices into trajectories()).
  TrajectoryDataset subset(const std::vector<std::size_t>& trajectory_indices) const;

  bool operator==(const TrajectoryDataset& other) const {
    return gamma_ == other.gamma_ && m_ == other.m_ && records_ == other.records_;
  }

 private:
  std::vector<StateRecord> records_;
  std::vector<TrajectorySpan> spans_;
  std::vector<std::size_t> owner_;
  std::size_t m_ = 0;
  double gamma_ = 1.0;
};

// Trajectory log, "#samdp-log v1 m=<m> gamma=<gamma>" followed by one
// "traj_id t done action reward value_estimate f_1 ... f_m" line per record.
TrajectoryDataset read_log(std::istream& in);
TrajectoryDataset ingest(const std::string& path);
// Overrides the discount stored in the header.
TrajectoryDataset ingest(const std::string& path, double gamma);

void write_log(std::ostream& out, const TrajectoryDataset& ds);
std::string to_log_string(const TrajectoryDataset& ds);

// Partitions whole trajectories: train_count drawn uniformly without
// replacement, the rest form the test part. Both parts keep the input's
// trajectory order.
std::pair<TrajectoryDataset, TrajectoryDataset> split(const TrajectoryDataset& ds,
                                                      std::size_t train_count,
                                                      std::uint64_t seed);

}  // namespace samdp
