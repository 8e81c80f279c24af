#include "samdp/samdp_core.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <Eigen/LU>

#include "samdp/errors.hpp"
#include "samdp/text_format.hpp"

namespace samdp {

std::vector<Skill> identify_skills(const std::vector<int>& assignment, int K, const TrajectoryDataset& ds) {
  if (assignment.size() != ds.size())
    throw DimensionError("assignment length " + std::to_string(assignment.size()) +
                         " does not match dataset size " + std::to_string(ds.size()));
  std::map<std::pair<int, int>, Skill> by_pair;
  for (const auto& span : ds.trajectories()) {
    std::size_t run_start = span.begin;
    for (std::size_t i = span.begin + 1; i < span.end; ++i) {
      if (assignment[i] == assignment[i - 1]) continue;
      const int from = assignment[run_start];
      const int to = assignment[i];
      if (from < 0 || from >= K || to < 0 || to >= K) throw DimensionError("cluster index out of range");
      auto& skill = by_pair[{from, to}];
      skill.from = from;
      skill.to = to;
      skill.instances.push_back({span.traj_id, ds[run_start].t, ds[i].t, run_start});
      run_start = i;
    }
  }
  std::vector<Skill> skills;
  skills.reserve(by_pair.size());
  for (auto& [key, skill] : by_pair) skills.push_back(std::move(skill));
  return skills;
}

double instance_reward(const SkillInstance& instance, const TrajectoryDataset& ds, double gamma) {
  double total = 0.0;
  double discount = 1.0;
  for (int k = 0; k < instance.length(); ++k) {
    total += discount * ds[instance.record + static_cast<std::size_t>(k)].reward;
    discount *= gamma;
  }
  return total;
}

Eigen::VectorXd SamdpModel::expected_length() const { return (P.cwiseProduct(L)).rowwise().sum(); }

Eigen::VectorXd SamdpModel::expected_reward() const { return (P.cwiseProduct(R)).rowwise().sum(); }

Eigen::MatrixXd SamdpModel::frequencies() const {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(K, K);
  for (int i = 0; i < K; ++i) {
    const double total = counts.row(i).cast<double>().sum();
    if (total > 0) f.row(i) = counts.row(i).cast<double>() / total;
  }
  return f;
}

SamdpModel infer(const std::vector<Skill>& skills, int K, const TrajectoryDataset& ds, double gamma,
                 const InferenceOptions& options) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ArgumentError("gamma must lie in (0, 1]");
  if (K < 1) throw ArgumentError("K must be positive");
  SamdpModel m;
  m.K = K;
  m.gamma = gamma;
  m.min_length = options.prune ? options.min_length : 1;
  m.min_prob = options.prune ? options.min_prob : 0.0;
  m.P = Eigen::MatrixXd::Zero(K, K);
  m.R = Eigen::MatrixXd::Zero(K, K);
  m.L = Eigen::MatrixXd::Zero(K, K);
  m.counts = Eigen::MatrixXi::Zero(K, K);

  std::size_t surviving = 0;
  for (const auto& s : skills) {
    if (s.from < 0 || s.from >= K || s.to < 0 || s.to >= K) throw DimensionError("skill cluster out of range");
    if (s.from == s.to) throw ArgumentError("self-transitions are not skills");
    double reward_sum = 0.0;
    double length_sum = 0.0;
    int count = 0;
    for (const auto& inst : s.instances) {
      if (inst.length() < m.min_length) continue;
      reward_sum += instance_reward(inst, ds, gamma);
      length_sum += inst.length();
      ++count;
    }
    if (count == 0) continue;
    m.counts(s.from, s.to) += count;
    m.R(s.from, s.to) = reward_sum / count;
    m.L(s.from, s.to) = length_sum / count;
    surviving += static_cast<std::size_t>(count);
  }
  if (surviving == 0) throw EmptyModelError("no skill instance survives the length threshold");

  m.absorbing.assign(static_cast<std::size_t>(K), false);
  for (int i = 0; i < K; ++i) {
    const double total = m.counts.row(i).cast<double>().sum();
    if (total == 0) {
      m.absorbing[static_cast<std::size_t>(i)] = true;
      continue;
    }
    for (int j = 0; j < K; ++j) {
      const double p = m.counts(i, j) / total;
      m.P(i, j) = p < m.min_prob ? 0.0 : p;
    }
    const double kept = m.P.row(i).sum();
    if (kept == 0.0) {
      m.absorbing[static_cast<std::size_t>(i)] = true;
      m.warnings.push_back("cluster " + std::to_string(i) +
                           " lost every transition to truncation; treated as absorbing");
      continue;
    }
    m.P.row(i) /= kept;
  }
  m.v = samdp_value(m.P, m.R, m.L, gamma);
  return m;
}

Eigen::VectorXd samdp_value(const Eigen::MatrixXd& P, const Eigen::MatrixXd& R, const Eigen::MatrixXd& L,
                            double gamma) {
  const auto K = P.rows();
  if (P.cols() != K || R.rows() != K || R.cols() != K || L.rows() != K || L.cols() != K)
    throw DimensionError("P, R and L must be square and of equal size");
  const Eigen::VectorXd r = P.cwiseProduct(R).rowwise().sum();
  const Eigen::VectorXd k = P.cwiseProduct(L).rowwise().sum();
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(K, K);
  for (Eigen::Index i = 0; i < K; ++i) {
    if (P.row(i).sum() == 0.0) continue;  // absorbing: v_i = r_i = 0
    system.row(i) -= std::pow(gamma, k(i)) * P.row(i);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible())
    throw SolverError("SAMDP value system is singular; use gamma < 1 or check for closed recurrent classes");
  Eigen::VectorXd v = lu.solve(r);
  if (!v.allFinite()) throw SolverError("SAMDP value solve produced non-finite values");
  return v;
}

double bellman_residual(const SamdpModel& model) {
  const Eigen::VectorXd r = model.expected_reward();
  const Eigen::VectorXd k = model.expected_length();
  const Eigen::VectorXd pv = model.P * model.v;
  double worst = 0.0;
  for (int i = 0; i < model.K; ++i)
    worst = std::max(worst, std::abs(model.v(i) - (r(i) + std::pow(model.gamma, k(i)) * pv(i))));
  return worst;
}

namespace {

template <typename Matrix>
void write_block(std::ostream& out, const char* name, const Matrix& m) {
  out << name << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ' ';
      if constexpr (std::is_integral_v<typename Matrix::Scalar>)
        out << m(i, j);
      else
        out << format_double(m(i, j));
    }
    out << '\n';
  }
}

}  // namespace

void write_model(std::ostream& out, const SamdpModel& model) {
  out << "#samdp-model v1 K=" << model.K << " w=" << model.w << " gamma=" << format_double(model.gamma)
      << " min_length=" << model.min_length << " min_prob=" << format_double(model.min_prob) << '\n';
  out << "absorbing";
  for (bool a : model.absorbing) out << ' ' << (a ? 1 : 0);
  out << '\n';
  write_block(out, "P", model.P);
  write_block(out, "R", model.R);
  write_block(out, "L", model.L);
  write_block(out, "v", Eigen::MatrixXd(model.v.transpose()));
  write_block(out, "counts", model.counts);
}

std::string to_model_string(const SamdpModel& model) {
  std::ostringstream out;
  write_model(out, model);
  return out.str();
}

SamdpModel read_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty model file");
  auto header = parse_header(line, "#samdp-model");
  SamdpModel m;
  try {
    m.K = static_cast<int>(parse_int(header.at("K")));
    m.w = static_cast<int>(parse_int(header.at("w")));
    m.gamma = parse_double(header.at("gamma"));
    m.min_length = static_cast<int>(parse_int(header.at("min_length")));
    m.min_prob = parse_double(header.at("min_prob"));
  } catch (const std::exception&) {
    throw ParseError(1, "header must define K, w, gamma, min_length and min_prob");
  }
  if (m.K < 1) throw ParseError(1, "K must be positive");
  const int K = m.K;

  std::size_t line_no = 1;
  auto next_tokens = [&](std::size_t expected) {
    if (!std::getline(in, line)) throw ParseError(line_no + 1, "unexpected end of model file");
    ++line_no;
    auto tokens = split_ws(line);
    if (tokens.size() != expected)
      throw ParseError(line_no, "expected " + std::to_string(expected) + " fields");
    return tokens;
  };
  auto expect_label = [&](const char* name) {
    auto tokens = next_tokens(1);
    if (tokens[0] != name) throw ParseError(line_no, std::string("expected block '") + name + "'");
  };
  auto read_matrix = [&](const char* name, Eigen::MatrixXd& target, int rows) {
    expect_label(name);
    target.resize(rows, K);
    for (int i = 0; i < rows; ++i) {
      auto tokens = next_tokens(static_cast<std::size_t>(K));
      try {
        for (int j = 0; j < K; ++j) target(i, j) = parse_double(tokens[static_cast<std::size_t>(j)]);
      } catch (const std::invalid_argument& e) {
        throw ParseError(line_no, e.what());
      }
    }
  };

  try {
    auto tokens = next_tokens(static_cast<std::size_t>(K) + 1);
    if (tokens[0] != "absorbing") throw ParseError(line_no, "expected 'absorbing' line");
    for (int i = 0; i < K; ++i) m.absorbing.push_back(parse_int(tokens[static_cast<std::size_t>(i) + 1]) != 0);
  } catch (const std::invalid_argument& e) {
    throw ParseError(line_no, e.what());
  }
  read_matrix("P", m.P, K);
  read_matrix("R", m.R, K);
  read_matrix("L", m.L, K);
  Eigen::MatrixXd v;
  read_matrix("v", v, 1);
  m.v = v.row(0).transpose();
  Eigen::MatrixXd counts;
  read_matrix("counts", counts, K);
  m.counts = counts.cast<int>();
  return m;
}

SamdpModel load_model(const std::string& path) {
  std::istringstream in(read_file(path));
  return read_model(in);
}

}  // namespace samdp
