#include "samdp/model_select.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <mutex>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "samdp/errors.hpp"
#include "samdp/rng.hpp"
#include "samdp/text_format.hpp"

namespace samdp {

namespace {

// Runs job(i) for i in [0, count) on a few worker threads. Each job writes
// only its own output slot, so the result is independent of scheduling.
template <typename Job>
void parallel_for(std::size_t count, unsigned threads, Job job) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

Eigen::VectorXd cluster_values(const std::vector<int>& assignment, int K, const TrajectoryDataset& ds) {
  if (assignment.size() != ds.size()) throw DimensionError("assignment does not cover the dataset");
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(K);
  std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    sums(assignment[i]) += ds[i].value_estimate;
    ++counts[static_cast<std::size_t>(assignment[i])];
  }
  for (int c = 0; c < K; ++c)
    if (counts[static_cast<std::size_t>(c)] > 0) sums(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  return sums;
}

std::vector<std::size_t> cluster_sizes(const std::vector<int>& assignment, int K) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(K), 0);
  for (int c : assignment) ++sizes[static_cast<std::size_t>(c)];
  return sizes;
}

double vmse(const SamdpModel& model, const Clustering& clustering, const TrajectoryDataset& ds) {
  if (model.K != clustering.K) throw DimensionError("model and clustering disagree on K");
  const Eigen::VectorXd v = cluster_values(clustering.assignment, clustering.K, ds);
  const double norm = v.norm();
  if (norm < 1e-12) throw DegenerateError("cluster values are all ~0; VMSE is undefined");
  return (v - model.v).norm() / norm;
}

double intensity_factor(const std::vector<int>& assignment, const TrajectoryDataset& ds) {
  if (assignment.size() != ds.size()) throw DimensionError("assignment does not cover the dataset");
  std::size_t pairs = 0;
  std::size_t crossings = 0;
  for (const auto& span : ds.trajectories()) {
    for (std::size_t i = span.begin + 1; i < span.end; ++i) {
      ++pairs;
      if (assignment[i] != assignment[i - 1]) ++crossings;
    }
  }
  return pairs == 0 ? 0.0 : static_cast<double>(crossings) / static_cast<double>(pairs);
}

double intensity_factor(const Clustering& clustering, const TrajectoryDataset& ds) {
  return intensity_factor(clustering.assignment, ds);
}

double samdp_entropy(const Eigen::MatrixXd& P, const std::vector<std::size_t>& sizes) {
  if (static_cast<std::size_t>(P.rows()) != sizes.size()) throw DimensionError("size vector length mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    double h = 0.0;
    for (Eigen::Index j = 0; j < P.cols(); ++j)
      if (P(i, j) > 0.0) h -= P(i, j) * std::log(P(i, j));
    total += static_cast<double>(sizes[static_cast<std::size_t>(i)]) * h;
  }
  return total;
}

double samdp_entropy(const SamdpModel& model, const Clustering& clustering) {
  return samdp_entropy(model.P, cluster_sizes(clustering.assignment, clustering.K));
}

ModelScore score_model(const SamdpModel& model, const Clustering& clustering, const FeatureMatrix& x,
                       const TrajectoryDataset& ds) {
  ModelScore s;
  s.vmse = vmse(model, clustering, ds);
  s.inertia = inertia(x, clustering);
  s.intensity = intensity_factor(clustering, ds);
  s.entropy = samdp_entropy(model, clustering);
  return s;
}

Candidate build_candidate(const FeatureMatrix& x, const TrajectoryDataset& ds, int K, int w,
                          std::uint64_t seed, int max_iter, const InferenceOptions& inference) {
  Candidate c;
  c.K = K;
  c.w = w;
  c.seed = seed;
  try {
    c.clustering = st_kmeans(x, ds, K, w, seed, max_iter);
    c.model = infer(identify_skills(c.clustering.assignment, K, ds), K, ds, ds.gamma(), inference);
    c.model.w = w;
    c.score = score_model(c.model, c.clustering, x, ds);
    c.valid = true;
  } catch (const Error& e) {
    c.valid = false;
    c.failure = e.what();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    c.score = {nan, nan, nan, nan};
  }
  return c;
}

std::uint64_t cell_seed(std::uint64_t master, int K, int w, int restart) {
  const auto key = (static_cast<std::uint64_t>(K) << 40) ^ (static_cast<std::uint64_t>(w) << 20) ^
                   static_cast<std::uint64_t>(restart);
  return derive_seed(master, key);
}

CandidateSet grid_search(const TrajectoryDataset& ds, const FeatureMatrix& x, const GridSpec& grid) {
  if (grid.k_min < 1 || grid.k_max < grid.k_min || grid.w_min < 0 || grid.w_max < grid.w_min ||
      grid.restarts < 1)
    throw ArgumentError("grid ranges must be non-empty (k_min >= 1, w_min >= 0, restarts >= 1)");
  CandidateSet set;
  set.grid = grid;
  struct Cell {
    int K, w, restart;
  };
  std::vector<Cell> cells;
  for (int K = grid.k_min; K <= grid.k_max; ++K)
    for (int w = grid.w_min; w <= grid.w_max; ++w)
      for (int r = 0; r < grid.restarts; ++r) cells.push_back({K, w, r});

  set.candidates.resize(cells.size());
  parallel_for(cells.size(), grid.threads, [&](std::size_t i) {
    const auto& cell = cells[i];
    auto c = build_candidate(x, ds, cell.K, cell.w, cell_seed(grid.seed, cell.K, cell.w, cell.restart),
                             grid.max_iter, grid.inference);
    c.restart = cell.restart;
    set.candidates[i] = std::move(c);
  });
  return set;
}

Selection select(const std::vector<Candidate>& candidates) {
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i].valid) valid.push_back(i);
  if (valid.empty()) throw SelectionError("no valid candidate to select from");

  auto key = [&](std::size_t i) {
    const auto& c = candidates[i];
    return std::make_tuple(c.K, c.w, c.restart, c.seed);
  };
  const std::array<double ModelScore::*, 4> criteria = {&ModelScore::vmse, &ModelScore::inertia,
                                                        &ModelScore::intensity, &ModelScore::entropy};
  // worst_rank[i] = max over criteria of i's 0-based position; i is in every
  // p-prefix exactly when worst_rank[i] < p.
  std::vector<std::size_t> worst_rank(candidates.size(), 0);
  for (auto criterion : criteria) {
    auto order = valid;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = candidates[a].score.*criterion;
      const double vb = candidates[b].score.*criterion;
      if (va != vb) return va < vb;
      return key(a) < key(b);
    });
    for (std::size_t rank = 0; rank < order.size(); ++rank)
      worst_rank[order[rank]] = std::max(worst_rank[order[rank]], rank);
  }
  std::size_t p = std::numeric_limits<std::size_t>::max();
  for (std::size_t i : valid) p = std::min(p, worst_rank[i] + 1);

  std::optional<std::size_t> best;
  for (std::size_t i : valid) {
    if (worst_rank[i] + 1 != p) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& a = candidates[i];
    const auto& b = candidates[*best];
    if (std::make_tuple(a.score.vmse, a.K, a.w, a.restart, a.seed) <
        std::make_tuple(b.score.vmse, b.K, b.w, b.restart, b.seed))
      best = i;
  }
  return {*best, static_cast<int>(p)};
}

Selection select(const CandidateSet& set) { return select(set.candidates); }

NullTestResult null_p_value(const Candidate& selected, const TrajectoryDataset& ds, const FeatureMatrix& x,
                            std::size_t trials, std::uint64_t seed, const InferenceOptions& inference,
                            unsigned threads) {
  if (trials == 0) throw ArgumentError("null test needs at least one trial");
  if (!selected.valid) throw ArgumentError("selected candidate has no score");
  const int K = selected.K;
  std::vector<char> better(trials, 0);
  std::vector<char> degenerate(trials, 0);
  parallel_for(trials, threads, [&](std::size_t trial) {
    Rng rng(derive_seed(seed, trial));
    Clustering random;
    random.K = K;
    random.assignment.resize(ds.size());
    for (auto& a : random.assignment) a = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
    random.centroids = cluster_means(x, random.assignment, K);
    try {
      auto model = infer(identify_skills(random.assignment, K, ds), K, ds, ds.gamma(), inference);
      const auto s = score_model(model, random, x, ds);
      better[trial] = s.strictly_better_than(selected.score) ? 1 : 0;
    } catch (const Error&) {
      degenerate[trial] = 1;
    }
  });
  NullTestResult result;
  result.trials = trials;
  result.better = static_cast<std::size_t>(std::count(better.begin(), better.end(), 1));
  result.degenerate = static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), 1));
  result.p_value = static_cast<double>(result.better) / static_cast<double>(trials);
  return result;
}

std::vector<GridReportRow> report_rows(const CandidateSet& set, std::optional<std::size_t> selected) {
  std::vector<GridReportRow> rows;
  rows.reserve(set.candidates.size());
  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    const auto& c = set.candidates[i];
    rows.push_back({c.K, c.w, c.seed, c.score, c.valid, selected && *selected == i});
  }
  return rows;
}

void write_grid_report(std::ostream& out, const std::vector<GridReportRow>& rows) {
  out << "#samdp-grid v1 candidates=" << rows.size() << '\n';
  for (const auto& r : rows) {
    out << r.K << ' ' << r.w << ' ' << r.seed << ' ' << format_double(r.score.vmse) << ' '
        << format_double(r.score.inertia) << ' ' << format_double(r.score.intensity) << ' '
        << format_double(r.score.entropy) << ' ' << (r.selected ? 1 : 0) << '\n';
  }
}

std::string to_grid_report_string(const std::vector<GridReportRow>& rows) {
  std::ostringstream out;
  write_grid_report(out, rows);
  return out.str();
}

std::vector<GridReportRow> read_grid_report(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty grid report");
  auto header = parse_header(line, "#samdp-grid");
  std::vector<GridReportRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 8) throw ParseError(line_no, "expected 8 fields");
    GridReportRow r;
    try {
      r.K = static_cast<int>(parse_int(tokens[0]));
      r.w = static_cast<int>(parse_int(tokens[1]));
      r.seed = std::stoull(std::string(tokens[2]));
      r.score.vmse = parse_double(tokens[3]);
      r.score.inertia = parse_double(tokens[4]);
      r.score.intensity = parse_double(tokens[5]);
      r.score.entropy = parse_double(tokens[6]);
      r.selected = parse_int(tokens[7]) == 1;
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
    r.valid = !std::isnan(r.score.vmse);
    rows.push_back(r);
  }
  if (header.count("candidates") && header["candidates"] != std::to_string(rows.size()))
    throw ParseError(1, "candidate count does not match the number of rows");
  return rows;
}

}  // namespace samdp
