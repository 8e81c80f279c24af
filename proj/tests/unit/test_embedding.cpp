#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "samdp/embedding.hpp"
#include "samdp/errors.hpp"
#include "samdp/gridworld.hpp"
#include "samdp/rng.hpp"
#include "samdp/st_cluster.hpp"

using namespace samdp;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) x(i, j) = rng.normal() * (1.0 + j) + 3.0 * j;
  return x;
}

double max_distance_change(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.rows(); ++j)
      worst = std::max(worst, std::abs((a.row(i) - a.row(j)).norm() - (b.row(i) - b.row(j)).norm()));
  return worst;
}

}  // namespace

TEST_CASE("normalize") {
  SUBCASE("two-point column") {
    Eigen::MatrixXd x(2, 1);
    x << 1, 3;
    auto z = normalize(x);
    CHECK(z(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(z(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("constant column maps to zeros") {
    Eigen::MatrixXd x(3, 2);
    x << 5, 1, 5, 2, 5, 3;
    auto z = normalize(x);
    CHECK(z.col(0).isZero(0.0));
  }
  SUBCASE("random matrix satisfies the column invariants") {
    auto z = normalize(random_matrix(100, 4, 7));
    for (Eigen::Index c = 0; c < 4; ++c) {
      double mean = 0.0, var = 0.0;
      for (Eigen::Index i = 0; i < 100; ++i) mean += z(i, c);
      mean /= 100.0;
      for (Eigen::Index i = 0; i < 100; ++i) var += (z(i, c) - mean) * (z(i, c) - mean);
      var /= 100.0;
      CHECK(std::abs(mean) < 1e-9);
      CHECK(std::abs(var - 1.0) < 1e-6);
    }
  }
  SUBCASE("needs two rows") { CHECK_THROWS_AS(normalize(Eigen::MatrixXd::Ones(1, 3)), ArgumentError); }
}

TEST_CASE("pca") {
  SUBCASE("data on a 2-D plane in R^10 is captured exactly") {
    Rng rng(1);
    Eigen::MatrixXd basis = random_matrix(2, 10, 2);
    Eigen::MatrixXd coeffs(60, 2);
    for (Eigen::Index i = 0; i < 60; ++i) coeffs.row(i) << rng.normal(), rng.normal();
    Eigen::MatrixXd x = coeffs * basis;
    x.rowwise() += Eigen::RowVectorXd::LinSpaced(10, -1.0, 4.0);
    auto z = pca(x, 2);
    CHECK(z.cols() == 2);
    CHECK(max_distance_change(x, z) < 1e-9);
  }
  SUBCASE("dims = m is a rotation") {
    auto x = random_matrix(40, 6, 3);
    auto z = pca(x, 6);
    CHECK(max_distance_change(x, z) < 1e-9);
    for (Eigen::Index c = 1; c < 6; ++c) CHECK(z.col(c - 1).squaredNorm() >= z.col(c).squaredNorm());
  }
  SUBCASE("explained variance matches an independent Jacobi eigensolver") {
    // Activations-like data: 512 features driven by 20 latent factors plus noise.
    Rng rng(4);
    Eigen::MatrixXd latent(600, 20), mixing(20, 512);
    for (Eigen::Index i = 0; i < latent.size(); ++i) latent(i) = rng.normal() * (1.0 + (i % 20));
    for (Eigen::Index i = 0; i < mixing.size(); ++i) mixing(i) = rng.normal();
    Eigen::MatrixXd x = latent * mixing;
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = std::max(0.0, x(i) + 0.5 * rng.normal());

    auto result = pca_detailed(x, 50);
    Eigen::MatrixXd centred = x.rowwise() - x.colwise().mean();
    Eigen::MatrixXd cov = centred.transpose() * centred / 600.0;
    auto oracle = fixtures::jacobi_eigenvalues(cov);
    double total = 0.0;
    for (double v : oracle) total += std::max(0.0, v);
    REQUIRE(result.explained_ratio.size() == 50);
    for (std::size_t k = 0; k < 50; ++k) CHECK(std::abs(result.explained_ratio[k] - oracle[k] / total) < 1e-6);
  }
  SUBCASE("idempotent up to component sign") {
    auto x = random_matrix(50, 8, 5);
    auto once = pca(x, 3);
    auto twice = pca(once, 3);
    for (Eigen::Index c = 0; c < 3; ++c) {
      const double same = (once.col(c) - twice.col(c)).cwiseAbs().maxCoeff();
      const double flipped = (once.col(c) + twice.col(c)).cwiseAbs().maxCoeff();
      CHECK(std::min(same, flipped) < 1e-9);
    }
  }
  SUBCASE("rank-deficient input drops components with a warning") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(10, 3);
    for (Eigen::Index i = 0; i < 10; ++i) x(i, 0) = static_cast<double>(i);
    auto r = pca_detailed(x, 3);
    CHECK(r.projected.cols() == 1);
    CHECK(r.warnings.size() == 2);
  }
  SUBCASE("dims above min(n, m)") { CHECK_THROWS_AS(pca(random_matrix(5, 3, 1), 4), ArgumentError); }
}

TEST_CASE("tsne on separated blobs") {
  auto [x, labels] = fixtures::blobs(100, 9);
  EmbeddingConfig cfg;
  cfg.seed = 5;
  std::vector<KlSample> trace;
  auto y = tsne(x, cfg, &trace);
  REQUIRE(y.rows() == 300);
  REQUIRE(y.cols() == 2);

  auto ds = fixtures::independent_points(300);
  auto clustering = st_kmeans(y, ds, 3, 0, 1);
  CHECK(fixtures::purity(clustering.assignment, labels) >= 0.95);

  double kl100 = 0, kl1000 = 0;
  for (const auto& s : trace) {
    if (s.iteration == 100) kl100 = s.kl;
    if (s.iteration == 1000) kl1000 = s.kl;
  }
  CHECK(kl1000 < kl100);

  SUBCASE("deterministic for a fixed seed") { CHECK(tsne(x, cfg) == y); }
}

TEST_CASE("tsne places duplicate points together") {
  auto [x, labels] = fixtures::blobs(40, 10);
  x.row(7) = x.row(3);
  x.row(50) = x.row(3);
  EmbeddingConfig cfg;
  cfg.seed = 2;
  cfg.iterations = 500;
  auto y = tsne(x, cfg);
  double diameter = 0.0;
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index j = i + 1; j < y.rows(); ++j) diameter = std::max(diameter, (y.row(i) - y.row(j)).norm());
  CHECK((y.row(3) - y.row(7)).norm() < 1e-3 * diameter);
  CHECK((y.row(3) - y.row(50)).norm() < 1e-3 * diameter);
}

TEST_CASE("tsne guards") {
  EmbeddingConfig cfg;
  CHECK_THROWS_AS(tsne(Eigen::MatrixXd::Random(50, 3), cfg), ArgumentError);
  cfg.perplexity = 5;
  cfg.tsne_dims = 4;
  CHECK_THROWS_AS(tsne(Eigen::MatrixXd::Random(50, 3), cfg), ArgumentError);
  cfg.tsne_dims = 2;
  CHECK_THROWS_AS(tsne(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kTsneMaxPoints) + 1, 1), cfg), SizeError);
}

TEST_CASE("assemble") {
  SUBCASE("two rows") {
    Eigen::MatrixXd e(2, 2);
    e << 0, 0, 2, 0;
    auto ds = fixtures::make_dataset({{{{0.0}, {0.0}}, {}, {1.0, 3.0}}});
    auto f = assemble(e, ds);
    REQUIRE(f.rows() == 2);
    REQUIRE(f.cols() == 3);
    CHECK(f(0, 0) == doctest::Approx(-1.0));
    CHECK(f(1, 0) == doctest::Approx(1.0));
    CHECK(f(0, 1) == 0.0);
    CHECK(f(1, 1) == 0.0);
    CHECK(f(0, 2) == doctest::Approx(-1.0));
    CHECK(f(1, 2) == doctest::Approx(1.0));
  }
  SUBCASE("row mismatch") {
    auto ds = fixtures::make_dataset({{{{0.0}, {0.0}, {1.0}}, {}, {}}});
    CHECK_THROWS_AS(assemble(Eigen::MatrixXd::Zero(2, 2), ds), DimensionError);
  }
  SUBCASE("gridworld value column is an affine image of the value estimates") {
    auto cfg = gridworld::load_maze(fixtures::maze_path("maze_a.txt"));
    auto ds = gridworld::generate(cfg, 20, 0.0);
    auto f = assemble(feature_matrix(ds), ds);
    CHECK(f.rows() == static_cast<Eigen::Index>(ds.size()));
    Eigen::VectorXd v(static_cast<Eigen::Index>(ds.size()));
    for (std::size_t i = 0; i < ds.size(); ++i) v(static_cast<Eigen::Index>(i)) = ds[i].value_estimate;
    Eigen::VectorXd a = f.col(2).array() - f.col(2).mean();
    Eigen::VectorXd b = v.array() - v.mean();
    CHECK(a.dot(b) / (a.norm() * b.norm()) == doctest::Approx(1.0).epsilon(1e-12));
    for (Eigen::Index c = 0; c < 3; ++c) {
      CHECK(std::abs(f.col(c).mean()) < 1e-9);
      CHECK(std::abs(f.col(c).squaredNorm() / static_cast<double>(f.rows()) - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("embedding file round trip") {
  auto ds = fixtures::make_dataset({{{{0.0}, {1.0}}, {}, {}}, {{{2.0}}, {}, {}}});
  Eigen::MatrixXd e(3, 2);
  e << 0.1, -2, 1e-9, 3.25, 1.0 / 3.0, 7;
  const auto text = to_embedding_string(e, ds);
  std::istringstream in(text);
  auto back = read_embedding(in, ds);
  CHECK(back == e);
  CHECK(to_embedding_string(back, ds) == text);

  std::istringstream missing("#samdp-embedding v1 dims=2\n0 0 1 1\n");
  CHECK_THROWS_AS(read_embedding(missing, ds), DimensionError);
}
