#include "samdp/st_cluster.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "samdp/errors.hpp"
#include "samdp/rng.hpp"
#include "samdp/text_format.hpp"

namespace samdp {

namespace {

double squared_distance(const FeatureMatrix& x, std::size_t row, const Eigen::MatrixXd& centroids, int c) {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    const double diff = x(static_cast<Eigen::Index>(row), k) - centroids(c, k);
    sum += diff * diff;
  }
  return sum;
}

void check_shapes(const FeatureMatrix& x, const TrajectoryDataset& ds) {
  if (static_cast<std::size_t>(x.rows()) != ds.size())
    throw DimensionError("feature rows (" + std::to_string(x.rows()) +
                         ") do not match dataset records (" + std::to_string(ds.size()) + ")");
}

}  // namespace

Eigen::MatrixXd kmeans_plus_plus(const FeatureMatrix& x, int K, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (K < 1 || static_cast<std::size_t>(K) > n)
    throw ArgumentError("K must lie in [1, n], got " + std::to_string(K));
  Rng rng(seed);
  Eigen::MatrixXd centroids(K, x.cols());
  centroids.row(0) = x.row(static_cast<Eigen::Index>(rng.below(n)));
  std::vector<double> best(n);
  for (std::size_t i = 0; i < n; ++i) best[i] = squared_distance(x, i, centroids, 0);
  for (int c = 1; c < K; ++c) {
    double total = 0.0;
    for (double b : best) total += b;
    std::size_t chosen = n - 1;
    if (total <= 0.0) {
      chosen = rng.below(n);
    } else {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += best[i];
        if (acc > target && best[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    }
    centroids.row(c) = x.row(static_cast<Eigen::Index>(chosen));
    for (std::size_t i = 0; i < n; ++i) best[i] = std::min(best[i], squared_distance(x, i, centroids, c));
  }
  return centroids;
}

Window window_of(const TrajectoryDataset& ds, std::size_t record, int w) {
  const auto& span = ds.trajectories()[ds.trajectory_of(record)];
  const std::size_t half = static_cast<std::size_t>(w);
  const std::size_t begin = record >= span.begin + half ? record - half : span.begin;
  const std::size_t end = std::min(span.end, record + half + 1);
  return {begin, end};
}

double windowed_objective(const FeatureMatrix& x, const TrajectoryDataset& ds,
                          const std::vector<int>& assignment, const Eigen::MatrixXd& centroids, int w) {
  check_shapes(x, ds);
  double total = 0.0;
  for (std::size_t t = 0; t < ds.size(); ++t) {
    const auto win = window_of(ds, t, w);
    for (std::size_t j = win.begin; j < win.end; ++j) total += squared_distance(x, j, centroids, assignment[t]);
  }
  return total;
}

Eigen::MatrixXd cluster_means(const FeatureMatrix& x, const std::vector<int>& assignment, int K) {
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, x.cols());
  std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    sums.row(assignment[i]) += x.row(static_cast<Eigen::Index>(i));
    ++counts[static_cast<std::size_t>(assignment[i])];
  }
  for (int c = 0; c < K; ++c)
    if (counts[static_cast<std::size_t>(c)] > 0) sums.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  return sums;
}

Clustering st_kmeans_from(const FeatureMatrix& x, const TrajectoryDataset& ds,
                          Eigen::MatrixXd initial_centroids, int w, int max_iter) {
  check_shapes(x, ds);
  const int K = static_cast<int>(initial_centroids.rows());
  const std::size_t n = ds.size();
  if (K < 1 || static_cast<std::size_t>(K) > n) throw ArgumentError("K must lie in [1, n]");
  if (w < 0) throw ArgumentError("window half-width must be non-negative");
  if (initial_centroids.cols() != x.cols()) throw DimensionError("centroid dimension mismatch");
  if (max_iter < 1) throw ArgumentError("max_iter must be positive");

  Clustering result;
  result.K = K;
  result.w = w;
  result.centroids = std::move(initial_centroids);
  result.assignment.assign(n, -1);

  if (K > 1 && (x.rowwise() - x.row(0)).cwiseAbs().maxCoeff() == 0.0)
    result.warnings.push_back("all points are identical; clusters beyond the first stay degenerate");

  // Window sums of x and ||x||^2 from per-dataset prefix sums; windows never
  // cross a trajectory boundary, so one running prefix over all records works.
  const auto d = x.cols();
  Eigen::MatrixXd prefix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n) + 1, d);
  std::vector<double> prefix_sq(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    prefix.row(static_cast<Eigen::Index>(i) + 1) = prefix.row(static_cast<Eigen::Index>(i)) + x.row(static_cast<Eigen::Index>(i));
    prefix_sq[i + 1] = prefix_sq[i] + x.row(static_cast<Eigen::Index>(i)).squaredNorm();
  }

  std::vector<int> next(n);
  std::vector<double> own_cost(n);
  Eigen::RowVectorXd window_sum(d);
  Eigen::VectorXd centroid_sq(K);
  for (int iter = 0; iter < max_iter; ++iter) {
    for (int c = 0; c < K; ++c) centroid_sq(c) = result.centroids.row(c).squaredNorm();
    for (std::size_t t = 0; t < n; ++t) {
      int best = 0;
      double best_cost = std::numeric_limits<double>::infinity();
      if (w == 0) {
        for (int c = 0; c < K; ++c) {
          const double cost = squared_distance(x, t, result.centroids, c);
          if (cost < best_cost) {
            best_cost = cost;
            best = c;
          }
        }
      } else {
        // sum_j ||x_j - mu||^2 = sum_j ||x_j||^2 - 2 mu . sum_j x_j + |W| ||mu||^2
        const auto win = window_of(ds, t, w);
        window_sum = prefix.row(static_cast<Eigen::Index>(win.end)) - prefix.row(static_cast<Eigen::Index>(win.begin));
        const double sq = prefix_sq[win.end] - prefix_sq[win.begin];
        const double size = static_cast<double>(win.end - win.begin);
        for (int c = 0; c < K; ++c) {
          const double cost = sq - 2.0 * result.centroids.row(c).dot(window_sum) + size * centroid_sq(c);
          if (cost < best_cost) {
            best_cost = cost;
            best = c;
          }
        }
      }
      next[t] = best;
    }
    result.iterations = iter + 1;
    result.objective_trace.push_back(windowed_objective(x, ds, next, result.centroids, w));
    if (next == result.assignment) {
      result.converged = true;
      break;
    }
    result.assignment = next;

    // Update step: point means, then re-seed empty clusters at the points that
    // currently contribute the most distance.
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, x.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(result.assignment[i]) += x.row(static_cast<Eigen::Index>(i));
      ++counts[static_cast<std::size_t>(result.assignment[i])];
    }
    std::vector<int> empty_clusters;
    for (int c = 0; c < K; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) {
        empty_clusters.push_back(c);
        continue;
      }
      result.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
    if (!empty_clusters.empty()) {
      for (std::size_t i = 0; i < n; ++i) own_cost[i] = squared_distance(x, i, result.centroids, result.assignment[i]);
      std::vector<char> taken(n, 0);
      for (int c : empty_clusters) {
        std::size_t arg = 0;
        double worst = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (!taken[i] && own_cost[i] > worst) {
            worst = own_cost[i];
            arg = i;
          }
        }
        taken[arg] = 1;
        result.centroids.row(c) = x.row(static_cast<Eigen::Index>(arg));
      }
    }
  }

  result.empty.assign(static_cast<std::size_t>(K), true);
  for (int c : result.assignment) result.empty[static_cast<std::size_t>(c)] = false;
  for (int c = 0; c < K; ++c)
    if (result.empty[static_cast<std::size_t>(c)])
      result.warnings.push_back("cluster " + std::to_string(c) + " is empty");
  result.inertia = inertia(x, result.centroids);
  return result;
}

Clustering st_kmeans(const FeatureMatrix& x, const TrajectoryDataset& ds, int K, int w,
                     std::uint64_t seed, int max_iter) {
  check_shapes(x, ds);
  if (K < 1 || static_cast<std::size_t>(K) > ds.size())
    throw ArgumentError("K must lie in [1, n], got " + std::to_string(K));
  auto result = st_kmeans_from(x, ds, kmeans_plus_plus(x, K, seed), w, max_iter);
  result.seed = seed;
  return result;
}

int nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::Ref<const Eigen::RowVectorXd>& point) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - point).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

double inertia(const FeatureMatrix& x, const Eigen::MatrixXd& centroids) {
  if (x.cols() != centroids.cols()) throw DimensionError("centroid dimension mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c)
      best = std::min(best, squared_distance(x, static_cast<std::size_t>(i), centroids, static_cast<int>(c)));
    total += best;
  }
  return total;
}

double inertia(const FeatureMatrix& x, const Clustering& clustering) {
  return inertia(x, clustering.centroids);
}

void write_clustering(std::ostream& out, const Clustering& clustering, const TrajectoryDataset& ds) {
  if (clustering.assignment.size() != ds.size())
    throw DimensionError("clustering does not cover the dataset");
  out << "#samdp-clusters v1 K=" << clustering.K << " w=" << clustering.w
      << " d=" << clustering.centroids.cols() << " seed=" << clustering.seed << '\n';
  for (int c = 0; c < clustering.K; ++c) {
    out << "centroid " << c;
    for (Eigen::Index k = 0; k < clustering.centroids.cols(); ++k)
      out << ' ' << format_double(clustering.centroids(c, k));
    out << '\n';
  }
  for (std::size_t i = 0; i < ds.size(); ++i)
    out << ds[i].traj_id << ' ' << ds[i].t << ' ' << clustering.assignment[i] << '\n';
}

std::string to_clustering_string(const Clustering& clustering, const TrajectoryDataset& ds) {
  std::ostringstream out;
  write_clustering(out, clustering, ds);
  return out.str();
}

Clustering read_clustering(std::istream& in, const TrajectoryDataset& ds) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty clustering file");
  auto header = parse_header(line, "#samdp-clusters");
  Clustering c;
  long long d = 0;
  try {
    c.K = static_cast<int>(parse_int(header.at("K")));
    c.w = static_cast<int>(parse_int(header.at("w")));
    d = parse_int(header.at("d"));
    c.seed = static_cast<std::uint64_t>(std::stoull(header.at("seed")));
  } catch (const std::exception&) {
    throw ParseError(1, "header must define integer K, w, d and seed");
  }
  if (c.K < 1 || c.w < 0 || d < 1) throw ParseError(1, "K and d must be positive, w non-negative");

  std::map<std::pair<int, int>, std::size_t> index;
  for (std::size_t i = 0; i < ds.size(); ++i) index[{ds[i].traj_id, ds[i].t}] = i;

  c.centroids.resize(c.K, d);
  c.assignment.assign(ds.size(), -1);
  std::size_t line_no = 1;
  int centroid_lines = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    try {
      if (tokens[0] == "centroid") {
        if (tokens.size() != static_cast<std::size_t>(2 + d)) throw ParseError(line_no, "bad centroid line");
        const auto idx = parse_int(tokens[1]);
        if (idx != centroid_lines || idx >= c.K) throw ParseError(line_no, "centroids out of order");
        for (long long k = 0; k < d; ++k) c.centroids(idx, k) = parse_double(tokens[2 + k]);
        ++centroid_lines;
        continue;
      }
      if (tokens.size() != 3) throw ParseError(line_no, "expected 'traj_id t cluster'");
      const int traj = static_cast<int>(parse_int(tokens[0]));
      const int t = static_cast<int>(parse_int(tokens[1]));
      const int cluster = static_cast<int>(parse_int(tokens[2]));
      auto it = index.find({traj, t});
      if (it == index.end() || c.assignment[it->second] != -1)
        throw ParseError(line_no, "record is unknown or repeated");
      if (cluster < 0 || cluster >= c.K) throw ParseError(line_no, "cluster index out of range");
      c.assignment[it->second] = cluster;
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (centroid_lines != c.K) throw ParseError(line_no, "expected " + std::to_string(c.K) + " centroids");
  if (std::find(c.assignment.begin(), c.assignment.end(), -1) != c.assignment.end())
    throw DimensionError("clustering does not cover every dataset record");
  c.empty.assign(static_cast<std::size_t>(c.K), true);
  for (int a : c.assignment) c.empty[static_cast<std::size_t>(a)] = false;
  c.converged = true;
  return c;
}

Clustering load_clustering(const std::string& path, const TrajectoryDataset& ds) {
  std::istringstream in(read_file(path));
  return read_clustering(in, ds);
}

}  // namespace samdp
