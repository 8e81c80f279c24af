#include "samdp/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "samdp/errors.hpp"
#include "samdp/rng.hpp"
#include "samdp/text_format.hpp"

namespace samdp {

FeatureMatrix feature_matrix(const TrajectoryDataset& ds) {
  FeatureMatrix x(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(ds.feature_dim()));
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t k = 0; k < ds.feature_dim(); ++k)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = ds[i].features[k];
  return x;
}

FeatureMatrix normalize(const FeatureMatrix& x) {
  const auto n = x.rows();
  if (n < 2) throw ArgumentError("normalize needs at least 2 rows");
  FeatureMatrix out(n, x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).mean();
    const double var = (x.col(c).array() - mean).square().sum() / static_cast<double>(n);
    // Relative test so that columns equal up to rounding count as constant.
    const double scale = std::max(1.0, x.col(c).cwiseAbs().maxCoeff());
    if (var <= 1e-24 * scale * scale) {
      out.col(c).setZero();
      continue;
    }
    out.col(c) = (x.col(c).array() - mean) / std::sqrt(var);
  }
  return out;
}

PcaResult pca_detailed(const FeatureMatrix& x, int dims) {
  const auto n = x.rows();
  const auto m = x.cols();
  if (dims < 1 || dims > std::min<Eigen::Index>(n, m))
    throw ArgumentError("pca dims must lie in [1, min(n, m)] = [1, " +
                        std::to_string(std::min<Eigen::Index>(n, m)) + "]");
  FeatureMatrix centred = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw SolverError("covariance eigendecomposition failed");

  // Eigen returns ascending eigenvalues.
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double largest = values(m - 1);
  const double total = values.cwiseMax(0.0).sum();
  PcaResult result;
  std::vector<Eigen::Index> kept;
  for (int k = 0; k < dims; ++k) {
    const Eigen::Index idx = m - 1 - k;
    if (largest <= 0.0 || values(idx) < 1e-12 * largest) {
      result.warnings.push_back("pca: dropped component " + std::to_string(k) +
                                " with negligible variance");
      continue;
    }
    kept.push_back(idx);
    result.explained_ratio.push_back(values(idx) / total);
  }
  Eigen::MatrixXd basis(m, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) {
    Eigen::VectorXd axis = eig.eigenvectors().col(kept[k]);
    // Fix the sign so the largest-magnitude loading is positive.
    Eigen::Index arg;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0) axis = -axis;
    basis.col(static_cast<Eigen::Index>(k)) = axis;
  }
  result.projected = centred * basis;
  return result;
}

FeatureMatrix pca(const FeatureMatrix& x, int dims) { return pca_detailed(x, dims).projected; }

namespace {

// Row-conditional Gaussian affinities with per-point precision found by
// bisection so that the entropy matches log(perplexity).
Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& sq_dist, double perplexity) {
  const auto n = sq_dist.rows();
  const double target = std::log(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd row(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < 200; ++attempt) {
      double sum = 0.0;
      double weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        row(j) = (j == i) ? 0.0 : std::exp(-beta * sq_dist(i, j));
        sum += row(j);
        weighted += row(j) * sq_dist(i, j);
      }
      double entropy;
      if (sum <= 0.0) {
        entropy = 0.0;
      } else {
        entropy = std::log(sum) + beta * weighted / sum;
      }
      const double diff = entropy - target;
      if (sum > 0.0 && std::abs(diff) < 1e-5) break;
      if (sum <= 0.0 || diff < 0.0) {
        // Too peaked: lower the precision.
        hi = beta;
        beta = (lo + beta) / 2.0;
      } else {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      }
    }
    const double sum = row.sum();
    if (sum > 0.0) {
      p.row(i) = row.transpose() / sum;
    } else {
      p.row(i).setConstant(1.0 / static_cast<double>(n - 1));
      p(i, i) = 0.0;
    }
  }
  return p;
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (x.row(i) - x.row(j)).squaredNorm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

}  // namespace

FeatureMatrix tsne(const FeatureMatrix& x, const EmbeddingConfig& cfg, std::vector<KlSample>* trace) {
  const auto n = x.rows();
  if (cfg.perplexity <= 0.0) throw ArgumentError("perplexity must be positive");
  if (static_cast<double>(n) < 3.0 * cfg.perplexity)
    throw ArgumentError("t-SNE needs n >= 3 * perplexity (n = " + std::to_string(n) + ")");
  if (static_cast<std::size_t>(n) > kTsneMaxPoints)
    throw SizeError("exact t-SNE is limited to " + std::to_string(kTsneMaxPoints) +
                    " points; subsample the dataset first");
  if (cfg.tsne_dims != 2 && cfg.tsne_dims != 3) throw ArgumentError("tsne_dims must be 2 or 3");
  if (cfg.learning_rate <= 0.0) throw ArgumentError("learning rate must be positive");

  Eigen::MatrixXd p = conditional_affinities(squared_distances(x), cfg.perplexity);
  p = (p + p.transpose()).eval() / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);
  p.diagonal().setZero();

  const int d = cfg.tsne_dims;
  Rng rng(cfg.seed);
  Eigen::MatrixXd y(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) y(i, k) = 1e-4 * rng.normal();
  // Identical inputs start together; their gradients then coincide.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  auto row_less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index k = 0; k < x.cols(); ++k)
      if (x(a, k) != x(b, k)) return x(a, k) < x(b, k);
    return a < b;
  };
  std::sort(order.begin(), order.end(), row_less);
  for (std::size_t i = 1; i < order.size(); ++i) {
    const Eigen::Index a = order[i - 1], b = order[i];
    if (x.row(a) == x.row(b)) y.row(b) = y.row(a);
  }

  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, d);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, d);
  Eigen::MatrixXd grad(n, d);
  Eigen::MatrixXd num(n, n);

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const bool exaggerating = iter < cfg.exaggeration_iterations;
    const double exaggeration = exaggerating ? cfg.early_exaggeration : 1.0;
    const double momentum = exaggerating ? cfg.initial_momentum : cfg.final_momentum;

    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      num(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        num(i, j) = v;
        num(j, i) = v;
        z += 2.0 * v;
      }
    }

    grad.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = num(i, j) / z;
        const double mult = (exaggeration * p(i, j) - q) * num(i, j);
        grad.row(i) += 4.0 * mult * (y.row(i) - y.row(j));
      }
    }

    for (Eigen::Index i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) {
        const bool same_sign = (grad(i, k) > 0.0) == (velocity(i, k) > 0.0);
        gains(i, k) = same_sign ? std::max(gains(i, k) * 0.8, 0.01) : gains(i, k) + 0.2;
        velocity(i, k) = momentum * velocity(i, k) - cfg.learning_rate * gains(i, k) * grad(i, k);
        y(i, k) += velocity(i, k);
      }
    }
    y.rowwise() -= y.colwise().mean();

    const bool last = iter + 1 == cfg.iterations;
    if (trace != nullptr && ((iter + 1) % 50 == 0 || last)) {
      // KL(P || Q) against the true (unexaggerated) P, using the pre-update Q.
      double kl = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
          if (i != j) kl += p(i, j) * std::log(p(i, j) / std::max(num(i, j) / z, 1e-300));
      trace->push_back({iter + 1, kl});
    }
  }
  return y;
}

FeatureMatrix embed(const FeatureMatrix& x, const EmbeddingConfig& cfg, std::vector<std::string>* warnings) {
  FeatureMatrix z = normalize(x);
  if (z.cols() > cfg.pca_dims) {
    auto reduced = pca_detailed(z, cfg.pca_dims);
    if (warnings != nullptr)
      warnings->insert(warnings->end(), reduced.warnings.begin(), reduced.warnings.end());
    z = std::move(reduced.projected);
  }
  return tsne(z, cfg);
}

FeatureMatrix assemble(const FeatureMatrix& embedding, const TrajectoryDataset& ds) {
  if (static_cast<std::size_t>(embedding.rows()) != ds.size())
    throw DimensionError("embedding has " + std::to_string(embedding.rows()) +
                         " rows but the dataset has " + std::to_string(ds.size()) + " records");
  FeatureMatrix stacked(embedding.rows(), embedding.cols() + 1);
  stacked.leftCols(embedding.cols()) = embedding;
  for (std::size_t i = 0; i < ds.size(); ++i)
    stacked(static_cast<Eigen::Index>(i), embedding.cols()) = ds[i].value_estimate;
  return normalize(stacked);
}

void write_embedding(std::ostream& out, const FeatureMatrix& embedding, const TrajectoryDataset& ds) {
  if (static_cast<std::size_t>(embedding.rows()) != ds.size())
    throw DimensionError("embedding row count does not match the dataset");
  out << "#samdp-embedding v1 dims=" << embedding.cols() << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds[i].traj_id << ' ' << ds[i].t;
    for (Eigen::Index k = 0; k < embedding.cols(); ++k)
      out << ' ' << format_double(embedding(static_cast<Eigen::Index>(i), k));
    out << '\n';
  }
}

std::string to_embedding_string(const FeatureMatrix& embedding, const TrajectoryDataset& ds) {
  std::ostringstream out;
  write_embedding(out, embedding, ds);
  return out.str();
}

FeatureMatrix read_embedding(std::istream& in, const TrajectoryDataset& ds) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty embedding file");
  auto header = parse_header(line, "#samdp-embedding");
  long long dims = 0;
  try {
    dims = parse_int(header.at("dims"));
  } catch (const std::exception&) {
    throw ParseError(1, "header must define an integer dims");
  }
  if (dims < 1) throw ParseError(1, "dims must be positive");

  std::map<std::pair<int, int>, std::size_t> index;
  for (std::size_t i = 0; i < ds.size(); ++i) index[{ds[i].traj_id, ds[i].t}] = i;

  FeatureMatrix out(static_cast<Eigen::Index>(ds.size()), dims);
  std::vector<char> seen(ds.size(), 0);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != static_cast<std::size_t>(2 + dims))
      throw ParseError(line_no, "expected " + std::to_string(2 + dims) + " fields");
    try {
      const int traj = static_cast<int>(parse_int(tokens[0]));
      const int t = static_cast<int>(parse_int(tokens[1]));
      auto it = index.find({traj, t});
      if (it == index.end() || seen[it->second])
        throw ParseError(line_no, "record (" + std::to_string(traj) + ", " + std::to_string(t) +
                                      ") is unknown or repeated");
      seen[it->second] = 1;
      for (long long k = 0; k < dims; ++k)
        out(static_cast<Eigen::Index>(it->second), k) = parse_double(tokens[2 + k]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw DimensionError("embedding does not cover every dataset record");
  return out;
}

FeatureMatrix load_embedding(const std::string& path, const TrajectoryDataset& ds) {
  std::istringstream in(read_file(path));
  return read_embedding(in, ds);
}

}  // namespace samdp
