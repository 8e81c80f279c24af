#include "samdp/evaluate_eject.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "samdp/errors.hpp"
#include "samdp/text_format.hpp"

namespace samdp {

GreedyPolicy greedy_policy(const SamdpModel& model) {
  const int K = model.K;
  GreedyPolicy policy;
  policy.choice.assign(static_cast<std::size_t>(K), -1);
  policy.criterion = Eigen::MatrixXd::Constant(K, K, -std::numeric_limits<double>::infinity());
  for (int i = 0; i < K; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < K; ++j) {
      if (j == i || model.counts(i, j) <= 0) continue;
      const double value = model.R(i, j) + std::pow(model.gamma, model.L(i, j)) * model.v(j);
      policy.criterion(i, j) = value;
      if (policy.choice[static_cast<std::size_t>(i)] < 0 || value > best) {
        best = value;
        policy.choice[static_cast<std::size_t>(i)] = j;
      }
    }
  }
  return policy;
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DimensionError("pearson: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

std::vector<std::optional<double>> greedy_correlation(const SamdpModel& model, const GreedyPolicy& policy,
                                                      const TrajectoryDataset& ds,
                                                      const std::vector<int>& assignment) {
  if (assignment.size() != ds.size()) throw DimensionError("assignment does not cover the dataset");
  const int K = model.K;
  std::vector<std::vector<double>> follow(static_cast<std::size_t>(K));
  std::vector<std::vector<double>> reward(static_cast<std::size_t>(K));
  std::vector<int> departures(static_cast<std::size_t>(K));
  std::vector<int> matches(static_cast<std::size_t>(K));
  for (const auto& span : ds.trajectories()) {
    std::fill(departures.begin(), departures.end(), 0);
    std::fill(matches.begin(), matches.end(), 0);
    for (std::size_t i = span.begin + 1; i < span.end; ++i) {
      const int from = assignment[i - 1];
      const int to = assignment[i];
      if (from == to) continue;
      ++departures[static_cast<std::size_t>(from)];
      if (policy.choice[static_cast<std::size_t>(from)] == to) ++matches[static_cast<std::size_t>(from)];
    }
    const double total = ds.total_reward(span);
    for (int c = 0; c < K; ++c) {
      if (departures[static_cast<std::size_t>(c)] == 0) continue;
      follow[static_cast<std::size_t>(c)].push_back(static_cast<double>(matches[static_cast<std::size_t>(c)]) /
                                                    departures[static_cast<std::size_t>(c)]);
      reward[static_cast<std::size_t>(c)].push_back(total);
    }
  }
  std::vector<std::optional<double>> result(static_cast<std::size_t>(K));
  for (int c = 0; c < K; ++c) {
    if (policy.choice[static_cast<std::size_t>(c)] < 0) continue;
    result[static_cast<std::size_t>(c)] = pearson(follow[static_cast<std::size_t>(c)], reward[static_cast<std::size_t>(c)]);
  }
  return result;
}

Eigen::MatrixXd policy_matrix(const GreedyPolicy& policy, int K) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(K, K);
  for (int i = 0; i < K; ++i)
    if (policy.choice[static_cast<std::size_t>(i)] >= 0) m(i, policy.choice[static_cast<std::size_t>(i)]) = 1.0;
  return m;
}

Eigen::MatrixXd transition_matrix(const std::vector<int>& assignment, int K, const TrajectoryDataset& ds,
                                  const std::vector<std::size_t>& trajectories, double smoothing) {
  if (assignment.size() != ds.size()) throw DimensionError("assignment does not cover the dataset");
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(K, K);
  for (std::size_t idx : trajectories) {
    const auto& span = ds.trajectories().at(idx);
    for (std::size_t i = span.begin + 1; i < span.end; ++i)
      if (assignment[i] != assignment[i - 1]) counts(assignment[i - 1], assignment[i]) += 1.0;
  }
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(K, K);
  for (int i = 0; i < K; ++i) {
    const double total = counts.row(i).sum();
    if (total > 0.0) T.row(i) = counts.row(i) / total;
    if (smoothing > 0.0) {
      for (int j = 0; j < K; ++j)
        if (j != i) T(i, j) += smoothing;
      const double row = T.row(i).sum();
      if (row > 0.0) T.row(i) /= row;
    }
  }
  return T;
}

std::optional<double> transition_correlation(const GreedyPolicy& policy, const Eigen::MatrixXd& T) {
  const auto K = static_cast<int>(policy.choice.size());
  if (T.rows() != K || T.cols() != K) throw DimensionError("transition matrix size mismatch");
  const Eigen::MatrixXd G = policy_matrix(policy, K);
  std::vector<double> a, b;
  for (int i = 0; i < K; ++i) {
    if (policy.choice[static_cast<std::size_t>(i)] < 0) continue;
    for (int j = 0; j < K; ++j) {
      if (j == i) continue;
      a.push_back(G(i, j));
      b.push_back(T(i, j));
    }
  }
  return pearson(a, b);
}

std::vector<std::size_t> rank_by_reward(const TrajectoryDataset& ds) {
  std::vector<double> totals;
  for (const auto& span : ds.trajectories()) totals.push_back(ds.total_reward(span));
  std::vector<std::size_t> order(totals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return totals[a] > totals[b]; });
  return order;
}

std::vector<int> project(const FeatureMatrix& features, const Eigen::MatrixXd& centroids) {
  if (features.cols() != centroids.cols()) throw DimensionError("feature/centroid dimension mismatch");
  std::vector<int> out(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) out[static_cast<std::size_t>(i)] = nearest_centroid(centroids, features.row(i));
  return out;
}

EjectMonitor fit_eject(const TrajectoryDataset& train, const FeatureMatrix& train_features,
                       const Clustering& clustering, const SamdpModel& model, int top_k, double smoothing) {
  if (model.K != clustering.K) throw DimensionError("model and clustering disagree on K");
  if (static_cast<std::size_t>(train_features.rows()) != train.size())
    throw DimensionError("training features do not match the training set");
  if (top_k < 1 || 2 * static_cast<std::size_t>(top_k) > train.trajectory_count())
    throw ArgumentError("top_k must lie in [1, trajectories / 2], got " + std::to_string(top_k));
  if (!(smoothing > 0.0)) throw ArgumentError("smoothing must be positive");
  const int K = clustering.K;
  const auto order = rank_by_reward(train);
  const std::vector<std::size_t> top(order.begin(), order.begin() + top_k);
  const std::vector<std::size_t> bottom(order.end() - top_k, order.end());
  const auto projected = project(train_features, clustering.centroids);

  EjectMonitor monitor;
  monitor.K = K;
  monitor.top_k = top_k;
  monitor.smoothing = smoothing;
  monitor.T_plus = transition_matrix(projected, K, train, top, smoothing);
  monitor.T_minus = transition_matrix(projected, K, train, bottom, smoothing);
  monitor.centroids = clustering.centroids;
  return monitor;
}

EjectReport eject_run(const TrajectoryDataset& test, const FeatureMatrix& test_features,
                      const EjectMonitor& monitor, double threshold) {
  if (test.size() == 0) throw ArgumentError("empty test set");
  if (static_cast<std::size_t>(test_features.rows()) != test.size())
    throw DimensionError("test features do not match the test records");
  if (test_features.cols() != monitor.centroids.cols()) throw DimensionError("feature/centroid dimension mismatch");

  const auto projected = project(test_features, monitor.centroids);

  EjectReport report;
  double sum_all = 0.0;
  double sum_kept = 0.0;
  std::size_t kept = 0;
  for (const auto& span : test.trajectories()) {
    EjectTrajectory row;
    row.traj_id = span.traj_id;
    row.total_reward = test.total_reward(span);
    double llr = 0.0;
    for (std::size_t i = span.begin + 1; i < span.end; ++i) {
      const int from = projected[i - 1];
      const int to = projected[i];
      if (from == to) continue;
      llr += std::log(monitor.T_minus(from, to)) - std::log(monitor.T_plus(from, to));
      if (llr > threshold) {
        row.ejected_at = test[i].t;
        break;
      }
    }
    sum_all += row.total_reward;
    if (row.ejected_at) {
      ++report.ejected;
    } else {
      sum_kept += row.total_reward;
      ++kept;
    }
    report.trajectories.push_back(row);
  }
  report.mean_all = sum_all / static_cast<double>(test.trajectory_count());
  if (kept > 0) {
    report.mean_kept = sum_kept / static_cast<double>(kept);
    report.gain_percent = report.mean_all == 0.0
                              ? 0.0
                              : (*report.mean_kept - report.mean_all) / std::abs(report.mean_all) * 100.0;
  }
  return report;
}

void write_eject_report(std::ostream& out, const EjectReport& report) {
  out << "#samdp-eject v1 trajectories=" << report.trajectories.size() << '\n';
  for (const auto& row : report.trajectories) {
    out << row.traj_id << ' ';
    if (row.ejected_at)
      out << *row.ejected_at;
    else
      out << '-';
    out << ' ' << format_double(row.total_reward) << '\n';
  }
  out << "mean_all " << format_double(report.mean_all) << '\n';
  out << "mean_unejected " << (report.mean_kept ? format_double(*report.mean_kept) : std::string("-")) << '\n';
  out << "gain_percent " << format_double(report.gain_percent) << '\n';
}

std::string to_eject_report_string(const EjectReport& report) {
  std::ostringstream out;
  write_eject_report(out, report);
  return out.str();
}

EjectReport read_eject_report(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty eject report");
  parse_header(line, "#samdp-eject");
  EjectReport report;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    try {
      if (tokens.size() == 2 && tokens[0] == "mean_all") {
        report.mean_all = parse_double(tokens[1]);
      } else if (tokens.size() == 2 && tokens[0] == "mean_unejected") {
        if (tokens[1] != "-") report.mean_kept = parse_double(tokens[1]);
      } else if (tokens.size() == 2 && tokens[0] == "gain_percent") {
        report.gain_percent = parse_double(tokens[1]);
      } else if (tokens.size() == 3) {
        EjectTrajectory row;
        row.traj_id = static_cast<int>(parse_int(tokens[0]));
        if (tokens[1] != "-") {
          row.ejected_at = static_cast<int>(parse_int(tokens[1]));
          ++report.ejected;
        }
        row.total_reward = parse_double(tokens[2]);
        report.trajectories.push_back(row);
      } else {
        throw ParseError(line_no, "unrecognised line");
      }
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return report;
}

FeatureMatrix select_rows(const FeatureMatrix& full_features, const TrajectoryDataset& full,
                          const TrajectoryDataset& part) {
  if (static_cast<std::size_t>(full_features.rows()) != full.size())
    throw DimensionError("features do not match the full dataset");
  std::map<std::pair<int, int>, std::size_t> index;
  for (std::size_t i = 0; i < full.size(); ++i) index[{full[i].traj_id, full[i].t}] = i;
  FeatureMatrix out(static_cast<Eigen::Index>(part.size()), full_features.cols());
  for (std::size_t i = 0; i < part.size(); ++i) {
    auto it = index.find({part[i].traj_id, part[i].t});
    if (it == index.end()) throw DimensionError("record of the part is missing from the full dataset");
    out.row(static_cast<Eigen::Index>(i)) = full_features.row(static_cast<Eigen::Index>(it->second));
  }
  return out;
}

EjectExperiment eject_experiment(const TrajectoryDataset& full, const FeatureMatrix& features,
                                 std::size_t train_count, std::uint64_t split_seed, const GridSpec& grid, int top_k,
                                 double smoothing, double threshold) {
  auto [train, test] = split(full, train_count, split_seed);
  const FeatureMatrix train_x = select_rows(features, full, train);
  const FeatureMatrix test_x = select_rows(features, full, test);

  EjectExperiment out;
  out.train_trajectories = train.trajectory_count();
  auto set = grid_search(train, train_x, grid);
  out.selected = std::move(set.candidates[select(set).index]);
  if (top_k == 0) top_k = static_cast<int>(train.trajectory_count() / 3);
  out.monitor = fit_eject(train, train_x, out.selected.clustering, out.selected.model, top_k, smoothing);
  out.report = eject_run(test, test_x, out.monitor, threshold);
  return out;
}

}  // namespace samdp
