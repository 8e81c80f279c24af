#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "samdp/errors.hpp"
#include "samdp/evaluate_eject.hpp"
#include "samdp/gridworld.hpp"
#include "samdp/model_select.hpp"

using namespace samdp;

namespace {

std::vector<int> labels_of(const TrajectoryDataset& ds) {
  std::vector<int> out;
  for (const auto& r : ds.records()) out.push_back(static_cast<int>(r.features[0]));
  return out;
}

SamdpModel model_of(const TrajectoryDataset& ds, int K, InferenceOptions opt = {}) {
  return infer(identify_skills(labels_of(ds), K, ds), K, ds, ds.gamma(), opt);
}

// Label-valued clustering with one centroid per integer label.
Clustering label_clustering(const TrajectoryDataset& ds, int K) {
  Clustering c;
  c.K = K;
  c.assignment = labels_of(ds);
  c.centroids.resize(K, 1);
  for (int k = 0; k < K; ++k) c.centroids(k, 0) = k;
  return c;
}

// Per-trajectory fraction of departures from `cluster` that go to `choice`,
// paired with total reward; trajectories that never leave `cluster` are skipped.
std::pair<std::vector<double>, std::vector<double>> match_pairs(const TrajectoryDataset& ds,
                                                                const std::vector<int>& assign, int cluster,
                                                                int choice) {
  std::vector<double> frac, reward;
  for (const auto& s : ds.trajectories()) {
    int leaves = 0, hits = 0;
    for (std::size_t i = s.begin + 1; i < s.end; ++i)
      if (assign[i - 1] == cluster && assign[i] != cluster) {
        ++leaves;
        hits += assign[i] == choice;
      }
    if (leaves == 0) continue;
    frac.push_back(static_cast<double>(hits) / leaves);
    reward.push_back(ds.total_reward(s));
  }
  return {frac, reward};
}

double plain_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("greedy policy picks the dominant successor") {
  // 0 -> 1 pays 1 + 0.9 and continues to a rewarding loop; 0 -> 2 pays nothing.
  std::vector<std::vector<int>> labels{{0, 0, 1, 1, 3, 3, 1, 1, 3, 3}, {0, 0, 2, 2, 4, 4}, {0, 0, 1, 1, 3, 3}};
  std::vector<std::vector<double>> rewards{{1, 1, 1, 1, 1, 1, 1, 1, 0, 0}, {0, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 0, 0}};
  auto ds = fixtures::labelled_dataset(labels, rewards);
  auto m = model_of(ds, 5);
  auto pol = greedy_policy(m);
  CHECK(pol.choice[0] == 1);
  CHECK(pol.choice[4] == -1);
  CHECK(std::isinf(pol.criterion(0, 4)));
  CHECK(pol.criterion(0, 1) == doctest::Approx(m.R(0, 1) + std::pow(0.9, m.L(0, 1)) * m.v(1)));

  SUBCASE("myopic limit") {
    m.gamma = 1e-9;
    m.v = samdp_value(m.P, m.R, m.L, 1e-9);
    auto myopic = greedy_policy(m);
    for (int i = 0; i < 5; ++i) {
      if (myopic.choice[static_cast<std::size_t>(i)] < 0) continue;
      for (int j = 0; j < 5; ++j)
        if (m.counts(i, j) > 0) CHECK(m.R(i, myopic.choice[static_cast<std::size_t>(i)]) >= m.R(i, j));
    }
  }
  SUBCASE("ties go to the lower index") {
    auto tie = fixtures::labelled_dataset({{0, 0, 1, 1}, {0, 0, 2, 2}});
    CHECK(greedy_policy(model_of(tie, 3)).choice[0] == 1);
  }
}

TEST_CASE("greedy policy follows the corridor") {
  auto ds = fixtures::corridor_dataset(200, 5);
  auto m = model_of(ds, 5);
  auto pol = greedy_policy(m);

  // Value iteration on the planted SMDP: corridor skills pay 1 per step for three
  // steps, detours pay -0.5 per step; every skill lasts three steps.
  const double g3 = std::pow(0.9, 3);
  const double forward = 1 + 0.9 + 0.81, detour = -0.5 * (1 + 0.9 + 0.81);
  std::vector<double> V(5, 0.0);
  for (int sweep = 0; sweep < 200; ++sweep) {
    std::vector<double> next(5, 0.0);
    for (int c = 0; c < 3; ++c) next[static_cast<std::size_t>(c)] = std::max(forward + g3 * V[static_cast<std::size_t>(c) + 1], detour + g3 * V[4]);
    next[4] = detour + g3 * std::max({V[0], V[1], V[2]});
    V = next;
  }
  for (int c = 0; c < 3; ++c) {
    const bool oracle_forward = forward + g3 * V[static_cast<std::size_t>(c) + 1] > detour + g3 * V[4];
    CHECK(oracle_forward);
    CHECK(pol.choice[static_cast<std::size_t>(c)] == c + 1);
  }

  auto corr = greedy_correlation(m, pol, ds, labels_of(ds));
  REQUIRE(corr[0].has_value());
  CHECK(*corr[0] > 0.0);
  auto [frac, reward] = match_pairs(ds, labels_of(ds), 0, 1);
  CHECK(*corr[0] == doctest::Approx(plain_pearson(frac, reward)).epsilon(1e-12));
  CHECK_FALSE(corr[3].has_value());
}

TEST_CASE("greedy correlation") {
  SUBCASE("matching the choice adds +10") {
    std::vector<std::vector<int>> labels{{0, 0, 1, 1}, {0, 0, 1, 1}, {0, 0, 1, 1}, {0, 0, 2, 2}, {0, 0, 2, 2}};
    std::vector<std::vector<double>> rewards{{5, 5, 0, 0}, {5, 5, 0, 0}, {5, 5, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}};
    auto ds = fixtures::labelled_dataset(labels, rewards);
    auto m = model_of(ds, 3);
    auto pol = greedy_policy(m);
    REQUIRE(pol.choice[0] == 1);
    auto corr = greedy_correlation(m, pol, ds, labels_of(ds));
    CHECK(corr[0] == doctest::Approx(1.0));
  }
  SUBCASE("single visiting trajectory is undefined") {
    auto ds = fixtures::labelled_dataset({{0, 0, 1, 1}, {2, 2, 2}});
    auto m = model_of(ds, 3);
    auto corr = greedy_correlation(m, greedy_policy(m), ds, labels_of(ds));
    CHECK_FALSE(corr[0].has_value());
  }
  SUBCASE("coin-flip rewards are insignificant") {
    Rng rng(31);
    std::vector<std::vector<int>> labels;
    std::vector<std::vector<double>> rewards;
    for (int j = 0; j < 200; ++j) {
      std::vector<int> l;
      for (int visit = 0; visit < 4; ++visit) {
        l.insert(l.end(), {0, 0});
        const int to = rng.uniform() < 0.5 ? 1 : 2;
        l.insert(l.end(), {to, to});
      }
      std::vector<double> r(l.size(), 0.0);
      r.back() = rng.uniform() < 0.5 ? 1.0 : -1.0;  // terminal run carries no skill reward
      labels.push_back(l);
      rewards.push_back(r);
    }
    auto ds = fixtures::labelled_dataset(labels, rewards);
    auto m = model_of(ds, 3);
    auto pol = greedy_policy(m);
    auto corr = greedy_correlation(m, pol, ds, labels_of(ds));
    REQUIRE(corr[0].has_value());
    auto [frac, reward] = match_pairs(ds, labels_of(ds), 0, pol.choice[0]);
    std::vector<double> boot;
    for (int b = 0; b < 1000; ++b) {
      std::vector<double> fa, ra;
      for (std::size_t k = 0; k < frac.size(); ++k) {
        const auto pick = rng.below(frac.size());
        fa.push_back(frac[pick]);
        ra.push_back(reward[pick]);
      }
      boot.push_back(plain_pearson(fa, ra));
    }
    std::sort(boot.begin(), boot.end());
    MESSAGE("coin-flip corr " << *corr[0] << " band [" << boot[25] << ", " << boot[974] << "]");
    CHECK(std::abs(*corr[0]) < 0.2);
    CHECK(boot[25] < 0.0);
    CHECK(boot[974] > 0.0);
  }
}

TEST_CASE("pearson") {
  CHECK(pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK(pearson({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
  CHECK_FALSE(pearson({1, 1, 1}, {1, 2, 3}).has_value());
  CHECK_FALSE(pearson({1}, {2}).has_value());
}

TEST_CASE("greedy choice is invariant to positive reward scaling") {
  auto cfg = gridworld::load_maze(fixtures::maze_path("maze_b.txt"));
  cfg.seed = 3;
  auto ds = gridworld::generate(cfg, 40, 0.2);
  auto x = assemble(feature_matrix(ds), ds);
  auto c = st_kmeans(x, ds, 15, 2, 1);
  auto m = infer(identify_skills(c.assignment, 15, ds), 15, ds, ds.gamma());
  auto scaled_records = ds.records();
  for (auto& r : scaled_records) r.reward *= 7.5;
  TrajectoryDataset scaled(scaled_records, ds.gamma());
  auto m2 = infer(identify_skills(c.assignment, 15, scaled), 15, scaled, scaled.gamma());
  CHECK(greedy_policy(m).choice == greedy_policy(m2).choice);
}

TEST_CASE("transition matrices") {
  auto ds = fixtures::labelled_dataset({{0, 0, 1, 1, 0}, {0, 2, 2}});
  auto T = transition_matrix(labels_of(ds), 3, ds, {0, 1}, 0.0);
  CHECK(T(0, 1) == doctest::Approx(0.5));
  CHECK(T(0, 2) == doctest::Approx(0.5));
  CHECK(T(1, 0) == 1.0);
  CHECK(T.row(2).sum() == 0.0);

  auto only_first = transition_matrix(labels_of(ds), 3, ds, {0}, 0.0);
  CHECK(only_first(0, 1) == 1.0);
}

TEST_CASE("fit_eject") {
  // Top trajectories go 0 -> 1, bottom ones 0 -> 2.
  std::vector<std::vector<int>> labels{{0, 0, 1, 1}, {0, 0, 1, 1}, {0, 0, 2, 2}, {0, 0, 2, 2}};
  std::vector<std::vector<double>> rewards{{1, 1, 1, 1}, {1, 1, 1, 1}, {0, 0, 0, 0}, {0, 0, 0, 0}};
  auto ds = fixtures::labelled_dataset(labels, rewards);
  auto c = label_clustering(ds, 3);
  auto m = model_of(ds, 3);
  auto mon = fit_eject(ds, feature_matrix(ds), c, m, 2, 0.01);
  CHECK(mon.T_plus(0, 0) == 0.0);
  CHECK(mon.T_plus(0, 1) == doctest::Approx(1.01 / 1.02).epsilon(1e-15));
  CHECK(mon.T_plus(0, 2) == doctest::Approx(0.01 / 1.02).epsilon(1e-15));
  CHECK(mon.T_minus(0, 2) == doctest::Approx(1.01 / 1.02).epsilon(1e-15));
  CHECK(mon.T_minus(0, 1) == doctest::Approx(0.01 / 1.02).epsilon(1e-15));
  for (int i = 0; i < 3; ++i) {
    CHECK(mon.T_plus.row(i).sum() == doctest::Approx(1.0));
    CHECK(mon.T_minus.row(i).sum() == doctest::Approx(1.0));
  }

  SUBCASE("identical trajectories give identical matrices") {
    auto same = fixtures::labelled_dataset({{0, 0, 1, 1, 2}, {0, 0, 1, 1, 2}, {0, 0, 1, 1, 2}, {0, 0, 1, 1, 2}});
    auto mon2 = fit_eject(same, feature_matrix(same), label_clustering(same, 3), model_of(same, 3), 2);
    CHECK(mon2.T_plus == mon2.T_minus);
  }

  CHECK_THROWS_AS(fit_eject(ds, feature_matrix(ds), c, m, 3), ArgumentError);
  CHECK_THROWS_AS(fit_eject(ds, feature_matrix(ds), c, m, 0), ArgumentError);
  CHECK_THROWS_AS(fit_eject(ds, feature_matrix(ds), c, m, 1, 0.0), ArgumentError);
}

TEST_CASE("eject_run") {
  std::vector<std::vector<int>> labels{{0, 0, 1, 1}, {0, 0, 1, 1}, {0, 0, 2, 2}, {0, 0, 2, 2}};
  std::vector<std::vector<double>> rewards{{1, 1, 1, 1}, {1, 1, 1, 1}, {0, 0, 0, 0}, {0, 0, 0, 0}};
  auto ds = fixtures::labelled_dataset(labels, rewards);
  auto x = feature_matrix(ds);
  auto mon = fit_eject(ds, x, label_clustering(ds, 3), model_of(ds, 3), 2);

  auto report = eject_run(ds, x, mon);
  CHECK(report.ejected == 2);
  CHECK_FALSE(report.trajectories[0].ejected_at.has_value());
  REQUIRE(report.trajectories[2].ejected_at.has_value());
  CHECK(*report.trajectories[2].ejected_at == 2);
  CHECK(report.mean_all == 2.0);
  CHECK(*report.mean_kept == 4.0);
  CHECK(report.gain_percent == doctest::Approx(100.0));

  SUBCASE("threshold at infinity ejects nothing") {
    auto r = eject_run(ds, x, mon, std::numeric_limits<double>::infinity());
    CHECK(r.ejected == 0);
    CHECK(r.gain_percent == 0.0);
  }
  SUBCASE("equal matrices never eject") {
    auto flat = mon;
    flat.T_minus = flat.T_plus;
    auto r = eject_run(ds, x, flat);
    CHECK(r.ejected == 0);
    CHECK(r.gain_percent == 0.0);
  }
  SUBCASE("trajectory order does not matter") {
    auto rev = ds.subset({3, 2, 1, 0});
    auto r = eject_run(rev, select_rows(x, ds, rev), mon);
    for (const auto& t : r.trajectories) {
      const auto& orig = report.trajectories[static_cast<std::size_t>(t.traj_id)];
      CHECK(t.ejected_at == orig.ejected_at);
    }
  }
  SUBCASE("everything ejected") {
    auto bad = fixtures::labelled_dataset({{0, 0, 2, 2}, {0, 0, 2, 2}}, {{0, 0, 0, 1}, {0, 0, 0, 3}});
    auto r = eject_run(bad, feature_matrix(bad), mon);
    CHECK(r.ejected == 2);
    CHECK_FALSE(r.mean_kept.has_value());
  }
}

TEST_CASE("projection reproduces pointwise clusters") {
  auto planted = fixtures::planted_chain(4, 5, 5, 9);
  auto c = st_kmeans(planted.features, planted.ds, 4, 0, 3);
  CHECK(project(planted.features, c.centroids) == c.assignment);
}

TEST_CASE("eject report round trip") {
  EjectReport r;
  r.trajectories = {{0, std::nullopt, 1.5}, {1, 3, -0.25}, {2, std::nullopt, 0.1}};
  r.mean_all = (1.5 - 0.25 + 0.1) / 3;
  r.mean_kept = 0.8;
  r.gain_percent = (0.8 - r.mean_all) / r.mean_all * 100.0;
  r.ejected = 1;
  const auto text = to_eject_report_string(r);
  std::istringstream in(text);
  auto back = read_eject_report(in);
  CHECK(back.trajectories.size() == 3);
  CHECK(back.trajectories[1].ejected_at == 3);
  CHECK_FALSE(back.trajectories[0].ejected_at.has_value());
  CHECK(back.mean_all == r.mean_all);
  CHECK(back.mean_kept == r.mean_kept);
  CHECK(back.gain_percent == r.gain_percent);
  CHECK(back.ejected == 1);
  CHECK(to_eject_report_string(back) == text);

  std::istringstream bad("#samdp-eject v1 trajectories=1\n0 x 1.0\n");
  CHECK_THROWS_AS(read_eject_report(bad), ParseError);
}
