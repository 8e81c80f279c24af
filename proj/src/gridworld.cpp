#include "samdp/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "samdp/errors.hpp"
#include "samdp/rng.hpp"
#include "samdp/text_format.hpp"

namespace samdp::gridworld {

bool GridConfig::is_wall(int x, int y) const {
  if (x < 0 || y < 0 || x >= width || y >= height) return true;
  return walls[static_cast<std::size_t>(y * width + x)];
}

bool GridConfig::is_free(int x, int y) const { return !is_wall(x, y); }

namespace {

constexpr std::array<std::array<int, 2>, kActionCount> kMoves{{{0, -1}, {0, 1}, {-1, 0}, {1, 0}}};

bool reachable(const GridConfig& cfg, Cell from, Cell to) {
  std::vector<char> seen(static_cast<std::size_t>(cfg.width * cfg.height), 0);
  std::deque<Cell> queue{from};
  seen[static_cast<std::size_t>(from.y * cfg.width + from.x)] = 1;
  while (!queue.empty()) {
    Cell c = queue.front();
    queue.pop_front();
    if (c == to) return true;
    for (auto [dx, dy] : kMoves) {
      Cell n{c.x + dx, c.y + dy};
      if (!cfg.is_free(n.x, n.y)) continue;
      auto& s = seen[static_cast<std::size_t>(n.y * cfg.width + n.x)];
      if (s) continue;
      s = 1;
      queue.push_back(n);
    }
  }
  return false;
}

template <typename Fn>
void for_each_state(const GridConfig& cfg, Fn fn) {
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x)
        if (cfg.is_free(x, y)) fn(GridState{x, y, b == 1});
}

double backup(const GridConfig& cfg, const ValueTable& v, const GridState& s, Action a) {
  const auto r = step(cfg, s, a);
  return r.reward + (r.done ? 0.0 : cfg.gamma * v(r.next));
}

}  // namespace

GridConfig parse_maze(const std::string& text) {
  GridConfig cfg;
  std::vector<std::string> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool origin = false, ball = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      if (!rows.empty()) throw ParseError(line_no, "header fields must precede the grid");
      std::string key = line.substr(0, eq);
      std::string value = line.substr(eq + 1);
      key.erase(key.find_last_not_of(" \t") + 1);
      value.erase(0, value.find_first_not_of(" \t"));
      try {
        if (key == "step_reward") cfg.step_reward = parse_double(value);
        else if (key == "goal_reward") cfg.goal_reward = parse_double(value);
        else if (key == "epsilon") cfg.epsilon = parse_double(value);
        else if (key == "gamma") cfg.gamma = parse_double(value);
        else if (key == "max_steps") cfg.max_steps = static_cast<int>(parse_int(value));
        else if (key == "corruption_min_steps") cfg.corruption_min_steps = static_cast<int>(parse_int(value));
        else if (key == "corruption_max_steps") cfg.corruption_max_steps = static_cast<int>(parse_int(value));
        else if (key == "seed") cfg.seed = std::stoull(value);
        else throw ParseError(line_no, "unknown key '" + key + "'");
      } catch (const std::logic_error& e) {
        throw ParseError(line_no, e.what());
      }
      continue;
    }
    if (line.find_first_not_of("#.XB") != std::string::npos)
      throw ParseError(line_no, "grid rows may only contain '#', '.', 'X' and 'B'");
    if (!rows.empty() && line.size() != rows.front().size()) throw ParseError(line_no, "ragged grid row");
    const int y = static_cast<int>(rows.size());
    for (std::size_t x = 0; x < line.size(); ++x) {
      if (line[x] == 'X') {
        if (origin) throw ParseError(line_no, "more than one origin");
        origin = true;
        cfg.origin = {static_cast<int>(x), y};
      } else if (line[x] == 'B') {
        if (ball) throw ParseError(line_no, "more than one ball");
        ball = true;
        cfg.ball = {static_cast<int>(x), y};
      }
    }
    rows.push_back(line);
  }
  if (rows.empty()) throw ValidationError("maze has no grid");
  if (!origin || !ball) throw ValidationError("maze needs exactly one 'X' and one 'B'");
  cfg.height = static_cast<int>(rows.size());
  cfg.width = static_cast<int>(rows.front().size());
  cfg.walls.resize(static_cast<std::size_t>(cfg.width * cfg.height));
  for (int y = 0; y < cfg.height; ++y)
    for (int x = 0; x < cfg.width; ++x)
      cfg.walls[static_cast<std::size_t>(y * cfg.width + x)] = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] == '#';
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) throw ValidationError("gamma must lie in [0, 1]");
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0)) throw ValidationError("epsilon must lie in [0, 1]");
  if (cfg.max_steps < 1) throw ValidationError("max_steps must be positive");
  if (cfg.corruption_min_steps < 1 || cfg.corruption_max_steps < cfg.corruption_min_steps)
    throw ValidationError("corruption step range is empty");
  if (!reachable(cfg, cfg.origin, cfg.ball)) throw ValidationError("no path between origin and ball");
  return cfg;
}

GridConfig load_maze(const std::string& path) { return parse_maze(read_file(path)); }

StepResult step(const GridConfig& cfg, const GridState& s, Action a) {
  if (cfg.is_wall(s.x, s.y)) throw ArgumentError("state lies outside the free cells");
  const auto [dx, dy] = kMoves[static_cast<std::size_t>(a)];
  StepResult r;
  r.next = s;
  if (cfg.is_free(s.x + dx, s.y + dy)) {
    r.next.x += dx;
    r.next.y += dy;
  }
  r.reward = cfg.step_reward;
  if (!r.next.b && r.next.x == cfg.ball.x && r.next.y == cfg.ball.y) r.next.b = true;
  if (s.b && r.next.x == cfg.origin.x && r.next.y == cfg.origin.y && !(s.x == cfg.origin.x && s.y == cfg.origin.y)) {
    r.done = true;
    r.reward += cfg.goal_reward;
  }
  return r;
}

std::array<double, 2> phi(const GridState& s, int L) {
  if (!s.b) return {static_cast<double>(s.x), static_cast<double>(s.y)};
  return {static_cast<double>(2 * L - s.x), static_cast<double>(s.y)};
}

ValueTable value_oracle(const GridConfig& cfg) {
  if (!reachable(cfg, cfg.origin, cfg.ball)) throw ValidationError("goal is unreachable");
  ValueTable v(cfg.width, cfg.height);
  ValueTable next(cfg.width, cfg.height);
  for (int iter = 0; iter < 1000000; ++iter) {
    double delta = 0.0;
    for_each_state(cfg, [&](const GridState& s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < kActionCount; ++a) best = std::max(best, backup(cfg, v, s, static_cast<Action>(a)));
      next(s) = best;
      delta = std::max(delta, std::abs(best - v(s)));
    });
    std::swap(v, next);
    if (delta < 1e-12) break;
  }
  if (bellman_residual(cfg, v) >= 1e-10) throw SolverError("value iteration did not converge");
  return v;
}

double bellman_residual(const GridConfig& cfg, const ValueTable& v) {
  double worst = 0.0;
  for_each_state(cfg, [&](const GridState& s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < kActionCount; ++a) best = std::max(best, backup(cfg, v, s, static_cast<Action>(a)));
    worst = std::max(worst, std::abs(best - v(s)));
  });
  return worst;
}

Action greedy_action(const GridConfig& cfg, const ValueTable& v, const GridState& s, bool negated) {
  int best_a = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < kActionCount; ++a) {
    double q;
    if (negated) {
      const auto r = step(cfg, s, static_cast<Action>(a));
      q = r.done ? -std::numeric_limits<double>::infinity() : -v(r.next);
    } else {
      q = backup(cfg, v, s, static_cast<Action>(a));
    }
    if (q > best) {
      best = q;
      best_a = a;
    }
  }
  return static_cast<Action>(best_a);
}

TrajectoryDataset generate(const GridConfig& cfg, int n_traj, double corruption) {
  if (n_traj < 1) throw ArgumentError("n_traj must be at least 1");
  if (!(corruption >= 0.0 && corruption <= 1.0)) throw ArgumentError("corruption must lie in [0, 1]");
  if (!(cfg.gamma > 0.0)) throw ArgumentError("trajectory datasets need gamma > 0");
  const ValueTable v = value_oracle(cfg);
  std::vector<StateRecord> records;
  for (int traj = 0; traj < n_traj; ++traj) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(traj)));
    const bool corrupted = rng.uniform() < corruption;
    int corrupt_begin = 0;
    int corrupt_end = 0;
    if (corrupted) {
      // The segment starts somewhere along the outbound or return route.
      const auto span = static_cast<std::uint64_t>(cfg.corruption_max_steps - cfg.corruption_min_steps + 1);
      corrupt_begin = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * (cfg.width + cfg.height))));
      corrupt_end = corrupt_begin + cfg.corruption_min_steps + static_cast<int>(rng.below(span));
    }
    GridState s{cfg.origin.x, cfg.origin.y, false};
    for (int t = 0; t < cfg.max_steps; ++t) {
      Action a;
      if (corrupted && t >= corrupt_begin && t < corrupt_end) {
        a = greedy_action(cfg, v, s, true);
      } else if (rng.uniform() < cfg.epsilon) {
        a = static_cast<Action>(rng.below(kActionCount));
      } else {
        a = greedy_action(cfg, v, s);
      }
      const auto r = step(cfg, s, a);
      const auto f = phi(s, cfg.width);
      records.push_back({traj, t, r.done, static_cast<int>(a), r.reward, v(s), {f[0], f[1]}});
      if (r.done) break;
      s = r.next;
    }
  }
  return TrajectoryDataset(std::move(records), cfg.gamma);
}

std::vector<std::array<double, 2>> raw_positions(const TrajectoryDataset& ds, int L) {
  if (ds.feature_dim() != 2) throw DimensionError("gridworld features are 2-dimensional");
  std::vector<std::array<double, 2>> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records()) {
    const double x = r.features[0];
    out.push_back({x >= L ? 2.0 * L - x : x, r.features[1]});
  }
  return out;
}

std::vector<bool> ball_flags(const TrajectoryDataset& ds, int L) {
  if (ds.feature_dim() != 2) throw DimensionError("gridworld features are 2-dimensional");
  std::vector<bool> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records()) out.push_back(r.features[0] >= L);
  return out;
}

int mixed_clusters(const std::vector<int>& assignment, int K, const std::vector<bool>& flags) {
  if (assignment.size() != flags.size()) throw DimensionError("flag vector length mismatch");
  std::vector<char> seen0(static_cast<std::size_t>(K), 0), seen1(static_cast<std::size_t>(K), 0);
  for (std::size_t i = 0; i < assignment.size(); ++i)
    (flags[i] ? seen1 : seen0)[static_cast<std::size_t>(assignment[i])] = 1;
  int mixed = 0;
  for (int c = 0; c < K; ++c) mixed += seen0[static_cast<std::size_t>(c)] && seen1[static_cast<std::size_t>(c)];
  return mixed;
}

}  // namespace samdp::gridworld
