#include "samdp/trajectory_store.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "samdp/errors.hpp"
#include "samdp/rng.hpp"
#include "samdp/text_format.hpp"

namespace samdp {

TrajectoryDataset::TrajectoryDataset(std::vector<StateRecord> records, double gamma)
    : gamma_(gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw ArgumentError("gamma must lie in (0, 1], got " + format_double(gamma));
  if (records.empty()) throw ValidationError("dataset has no records");

  m_ = records.front().features.size();
  std::vector<int> order;
  std::map<int, std::vector<StateRecord>> groups;
  for (auto& r : records) {
    if (r.features.size() != m_)
      throw DimensionError("traj_id " + std::to_string(r.traj_id) + " t " + std::to_string(r.t) +
                           ": feature length " + std::to_string(r.features.size()) +
                           " differs from " + std::to_string(m_));
    if (r.traj_id < 0) throw ValidationError("negative traj_id " + std::to_string(r.traj_id));
    if (r.action < -1)
      throw ValidationError("traj_id " + std::to_string(r.traj_id) + ": action below -1");
    if (!std::isfinite(r.value_estimate) || !std::isfinite(r.reward) ||
        !std::all_of(r.features.begin(), r.features.end(), [](double f) { return std::isfinite(f); }))
      throw ValidationError("traj_id " + std::to_string(r.traj_id) + " t " + std::to_string(r.t) +
                            ": non-finite value");
    auto [it, inserted] = groups.try_emplace(r.traj_id);
    if (inserted) order.push_back(r.traj_id);
    it->second.push_back(std::move(r));
  }

  records_.reserve(records.size());
  for (int id : order) {
    auto& group = groups[id];
    std::stable_sort(group.begin(), group.end(),
                     [](const StateRecord& a, const StateRecord& b) { return a.t < b.t; });
    for (std::size_t k = 0; k < group.size(); ++k) {
      if (group[k].t != static_cast<int>(k))
        throw ValidationError("traj_id " + std::to_string(id) +
                              ": time indices are not consecutive from 0");
      if (group[k].done && k + 1 != group.size())
        throw ValidationError("traj_id " + std::to_string(id) + ": done flag before final record");
    }
    TrajectorySpan span{id, records_.size(), records_.size() + group.size()};
    for (auto& r : group) {
      records_.push_back(std::move(r));
      owner_.push_back(spans_.size());
    }
    spans_.push_back(span);
  }
}

double TrajectoryDataset::total_reward(const TrajectorySpan& span) const {
  double total = 0.0;
  for (std::size_t i = span.begin; i < span.end; ++i) total += records_[i].reward;
  return total;
}

TrajectoryDataset TrajectoryDataset::subset(const std::vector<std::size_t>& trajectory_indices) const {
  std::vector<StateRecord> out;
  for (std::size_t idx : trajectory_indices) {
    if (idx >= spans_.size()) throw ArgumentError("trajectory index out of range");
    const auto& span = spans_[idx];
    out.insert(out.end(), records_.begin() + static_cast<std::ptrdiff_t>(span.begin),
               records_.begin() + static_cast<std::ptrdiff_t>(span.end));
  }
  return TrajectoryDataset(std::move(out), gamma_);
}

TrajectoryDataset read_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty log");
  auto header = parse_header(line, "#samdp-log");
  if (!header.count("m") || !header.count("gamma"))
    throw ParseError(1, "header must define m and gamma");
  std::size_t m = 0;
  double gamma = 0.0;
  try {
    m = static_cast<std::size_t>(parse_int(header["m"]));
    gamma = parse_double(header["gamma"]);
  } catch (const std::invalid_argument& e) {
    throw ParseError(1, e.what());
  }

  std::vector<StateRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 6 + m)
      throw ParseError(line_no, "expected " + std::to_string(6 + m) + " fields, found " +
                                    std::to_string(tokens.size()));
    StateRecord r;
    try {
      r.traj_id = static_cast<int>(parse_int(tokens[0]));
      r.t = static_cast<int>(parse_int(tokens[1]));
      auto done = parse_int(tokens[2]);
      if (done != 0 && done != 1) throw std::invalid_argument("done must be 0 or 1");
      r.done = done == 1;
      r.action = static_cast<int>(parse_int(tokens[3]));
      r.reward = parse_double(tokens[4]);
      r.value_estimate = parse_double(tokens[5]);
      r.features.reserve(m);
      for (std::size_t k = 0; k < m; ++k) r.features.push_back(parse_double(tokens[6 + k]));
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
    records.push_back(std::move(r));
  }
  return TrajectoryDataset(std::move(records), gamma);
}

TrajectoryDataset ingest(const std::string& path) {
  std::istringstream in(read_file(path));
  return read_log(in);
}

TrajectoryDataset ingest(const std::string& path, double gamma) {
  auto ds = ingest(path);
  return TrajectoryDataset(ds.records(), gamma);
}

void write_log(std::ostream& out, const TrajectoryDataset& ds) {
  out << "#samdp-log v1 m=" << ds.feature_dim() << " gamma=" << format_double(ds.gamma()) << '\n';
  for (const auto& r : ds.records()) {
    out << r.traj_id << ' ' << r.t << ' ' << (r.done ? 1 : 0) << ' ' << r.action << ' '
        << format_double(r.reward) << ' ' << format_double(r.value_estimate);
    for (double f : r.features) out << ' ' << format_double(f);
    out << '\n';
  }
}

std::string to_log_string(const TrajectoryDataset& ds) {
  std::ostringstream out;
  write_log(out, ds);
  return out.str();
}

std::pair<TrajectoryDataset, TrajectoryDataset> split(const TrajectoryDataset& ds,
                                                      std::size_t train_count,
                                                      std::uint64_t seed) {
  const std::size_t n = ds.trajectory_count();
  if (train_count == 0 || train_count >= n)
    throw ArgumentError("train_count must lie in [1, " + std::to_string(n) + "), got " +
                        std::to_string(train_count));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);

  std::vector<char> in_train(n, 0);
  for (std::size_t i = 0; i < train_count; ++i) in_train[perm[i]] = 1;
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? train : test).push_back(i);
  return {ds.subset(train), ds.subset(test)};
}

}  // namespace samdp
