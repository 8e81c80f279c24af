#pragma once

// Synthetic datasets and independent oracles shared by the unit and acceptance
// suites. Nothing here calls into the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "samdp/rng.hpp"
#include "samdp/trajectory_store.hpp"

namespace fixtures {

#ifndef SAMDP_DATA_DIR
#define SAMDP_DATA_DIR "data"
#endif

inline std::string maze_path(const std::string& name) { return std::string(SAMDP_DATA_DIR) + "/mazes/" + name; }

// One record per feature row; rewards default to 0, values to 1.
struct TrajSpec {
  std::vector<std::vector<double>> features;
  std::vector<double> rewards;
  std::vector<double> values;
};

inline samdp::TrajectoryDataset make_dataset(const std::vector<TrajSpec>& trajs, double gamma = 0.9) {
  std::vector<samdp::StateRecord> records;
  for (std::size_t j = 0; j < trajs.size(); ++j) {
    const auto& tr = trajs[j];
    for (std::size_t t = 0; t < tr.features.size(); ++t) {
      samdp::StateRecord r;
      r.traj_id = static_cast<int>(j);
      r.t = static_cast<int>(t);
      r.done = t + 1 == tr.features.size();
      r.reward = t < tr.rewards.size() ? tr.rewards[t] : 0.0;
      r.value_estimate = t < tr.values.size() ? tr.values[t] : 1.0;
      r.features = tr.features[t];
      records.push_back(std::move(r));
    }
  }
  return samdp::TrajectoryDataset(std::move(records), gamma);
}

// Dataset whose single feature is the cluster label itself, for tests that
// only care about assignments.
inline samdp::TrajectoryDataset labelled_dataset(const std::vector<std::vector<int>>& labels,
                                                 const std::vector<std::vector<double>>& rewards = {},
                                                 double gamma = 0.9) {
  std::vector<TrajSpec> specs;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    TrajSpec s;
    for (int c : labels[j]) s.features.push_back({static_cast<double>(c)});
    if (j < rewards.size()) s.rewards = rewards[j];
    specs.push_back(std::move(s));
  }
  return make_dataset(specs, gamma);
}

inline std::vector<int> flatten(const std::vector<std::vector<int>>& labels) {
  std::vector<int> out;
  for (const auto& l : labels) out.insert(out.end(), l.begin(), l.end());
  return out;
}

// Planted chain 0 -> 1 -> ... -> clusters-1: each trajectory spends `dwell`
// steps near each of `clusters` well separated centres.
struct Planted {
  samdp::TrajectoryDataset ds;
  Eigen::MatrixXd features;
  std::vector<int> truth;
};

inline Planted planted_chain(int clusters, int trajectories, int dwell, std::uint64_t seed) {
  samdp::Rng rng(seed);
  std::vector<TrajSpec> specs;
  for (int j = 0; j < trajectories; ++j) {
    TrajSpec s;
    for (int c = 0; c < clusters; ++c) {
      const int steps = dwell + static_cast<int>(rng.below(3));
      for (int k = 0; k < steps; ++k) {
        s.features.push_back({10.0 * c + 0.3 * rng.normal(), 5.0 * (c % 2) + 0.3 * rng.normal()});
        s.rewards.push_back(c == clusters - 1 ? 1.0 : 0.0);
        s.values.push_back(static_cast<double>(c));
      }
    }
    specs.push_back(std::move(s));
  }
  Planted p{make_dataset(specs, 0.9), {}, {}};
  p.features.resize(static_cast<Eigen::Index>(p.ds.size()), 2);
  for (std::size_t i = 0; i < p.ds.size(); ++i) {
    p.features(static_cast<Eigen::Index>(i), 0) = p.ds[i].features[0];
    p.features(static_cast<Eigen::Index>(i), 1) = p.ds[i].features[1];
    p.truth.push_back(static_cast<int>(std::lround(p.ds[i].features[0] / 10.0)));
  }
  return p;
}

// Three Gaussian blobs in 10 dimensions, 40 apart along separate axes.
inline std::pair<Eigen::MatrixXd, std::vector<int>> blobs(int per_blob, std::uint64_t seed) {
  samdp::Rng rng(seed);
  Eigen::MatrixXd x(3 * per_blob, 10);
  std::vector<int> labels;
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < per_blob; ++i) {
      for (int k = 0; k < 10; ++k) x(b * per_blob + i, k) = rng.normal() + (k == b ? 40.0 : 0.0);
      labels.push_back(b);
    }
  }
  return {x, labels};
}

// n one-record trajectories, for clustering data without temporal structure.
inline samdp::TrajectoryDataset independent_points(int n) {
  std::vector<samdp::StateRecord> records;
  for (int i = 0; i < n; ++i) records.push_back({i, 0, true, -1, 0.0, 0.0, {0.0}});
  return samdp::TrajectoryDataset(std::move(records), 0.9);
}

// Reference Lloyd's algorithm: nearest centroid by plain squared distance,
// lowest index on ties, point means, empty clusters re-seeded at the points
// farthest from their own centroid.
inline std::vector<int> reference_kmeans(const Eigen::MatrixXd& x, Eigen::MatrixXd centroids, int max_iter) {
  const auto n = x.rows();
  const auto K = centroids.rows();
  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<int> next(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (Eigen::Index c = 0; c < K; ++c) {
        double d = 0.0;
        for (Eigen::Index k = 0; k < x.cols(); ++k) d += (x(i, k) - centroids(c, k)) * (x(i, k) - centroids(c, k));
        if (d < best) {
          best = d;
          arg = static_cast<int>(c);
        }
      }
      next[static_cast<std::size_t>(i)] = arg;
    }
    if (next == assign) break;
    assign = next;
    std::vector<int> count(static_cast<std::size_t>(K), 0);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(K, x.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      sum.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
      ++count[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    std::vector<int> empties;
    for (Eigen::Index c = 0; c < K; ++c) {
      if (count[static_cast<std::size_t>(c)] == 0)
        empties.push_back(static_cast<int>(c));
      else
        centroids.row(c) = sum.row(c) / count[static_cast<std::size_t>(c)];
    }
    std::vector<char> used(static_cast<std::size_t>(n), 0);
    for (int c : empties) {
      double worst = -1.0;
      Eigen::Index arg = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        double d = 0.0;
        for (Eigen::Index k = 0; k < x.cols(); ++k) {
          const double diff = x(i, k) - centroids(assign[static_cast<std::size_t>(i)], k);
          d += diff * diff;
        }
        if (!used[static_cast<std::size_t>(i)] && d > worst) {
          worst = d;
          arg = i;
        }
      }
      used[static_cast<std::size_t>(arg)] = 1;
      centroids.row(c) = x.row(arg);
    }
  }
  return assign;
}

// Cyclic Jacobi eigenvalue iteration for symmetric matrices; eigenvalues descending.
inline std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a) {
  const auto n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> values(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(values.rbegin(), values.rend());
  return values;
}

// Purity of `predicted` against `truth`: each predicted cluster votes for its
// majority true label.
inline double purity(const std::vector<int>& predicted, const std::vector<int>& truth) {
  int kp = 0, kt = 0;
  for (int p : predicted) kp = std::max(kp, p + 1);
  for (int t : truth) kt = std::max(kt, t + 1);
  std::vector<std::vector<int>> table(static_cast<std::size_t>(kp), std::vector<int>(static_cast<std::size_t>(kt), 0));
  for (std::size_t i = 0; i < predicted.size(); ++i) ++table[static_cast<std::size_t>(predicted[i])][static_cast<std::size_t>(truth[i])];
  int correct = 0;
  for (const auto& row : table) correct += *std::max_element(row.begin(), row.end());
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

// Corridor SMDP: clusters 0..3 form a rewarded corridor 0 -> 1 -> 2 -> 3; from
// every corridor cluster the agent may instead detour to cluster 4 (a dead end
// that returns to the corridor source). `follow_prob` is drawn per trajectory,
// so trajectories that follow the corridor more often collect more reward.
inline samdp::TrajectoryDataset corridor_dataset(int trajectories, std::uint64_t seed) {
  samdp::Rng rng(seed);
  std::vector<std::vector<int>> labels;
  std::vector<std::vector<double>> rewards;
  for (int j = 0; j < trajectories; ++j) {
    const double follow = 0.3 + 0.7 * rng.uniform();
    std::vector<int> l;
    std::vector<double> r;
    auto dwell = [&](int c, double reward) {
      for (int k = 0; k < 3; ++k) {
        l.push_back(c);
        r.push_back(reward);
      }
    };
    int c = 0;
    while (c < 3) {
      if (rng.uniform() < follow) {
        dwell(c, 1.0);
        ++c;
      } else {
        dwell(c, -0.5);
        dwell(4, -0.5);
      }
    }
    dwell(3, 0.0);
    labels.push_back(std::move(l));
    rewards.push_back(std::move(r));
  }
  return labelled_dataset(labels, rewards, 0.9);
}

}  // namespace fixtures
