// samdp: command-line driver for the SAMDP pipeline.
//
// Every subcommand reads and writes the text formats of the library, prints a
// short summary and records a run manifest (inputs, outputs, checksums,
// configuration, timings) next to its primary output.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "samdp/embedding.hpp"
#include "samdp/errors.hpp"
#include "samdp/evaluate_eject.hpp"
#include "samdp/export_ui.hpp"
#include "samdp/gridworld.hpp"
#include "samdp/model_select.hpp"
#include "samdp/rng.hpp"
#include "samdp/samdp_core.hpp"
#include "samdp/st_cluster.hpp"
#include "samdp/text_format.hpp"
#include "samdp/trajectory_store.hpp"

using namespace samdp;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

class Manifest {
 public:
  explicit Manifest(std::string command) {
    doc_["command"] = std::move(command);
    doc_["version"] = kVersion;
    doc_["inputs"] = json::array();
    doc_["outputs"] = json::array();
    doc_["config"] = json::object();
    doc_["timings"] = json::object();
  }

  void input(const std::string& path) { doc_["inputs"].push_back(entry(path, read_file(path))); }

  void output(const std::string& path, const std::string& contents) {
    write_file(path, contents);
    doc_["outputs"].push_back(entry(path, contents));
  }

  template <class T>
  void config(const std::string& key, const T& value) {
    doc_["config"][key] = value;
  }

  template <class F>
  auto timed(const std::string& stage, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    auto result = f();
    doc_["timings"][stage] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
  }

  void write(const std::string& path) const { write_file(path, doc_.dump(2) + "\n"); }

 private:
  static json entry(const std::string& path, const std::string& contents) {
    return {{"path", path}, {"bytes", contents.size()}, {"checksum", checksum(contents)}};
  }
  json doc_;
};

std::string manifest_path(const std::string& explicit_path, const std::string& primary_output) {
  return explicit_path.empty() ? primary_output + ".manifest.json" : explicit_path;
}

std::string seed_string(std::uint64_t seed) { return std::to_string(seed); }

std::string maybe(const std::optional<double>& v) { return v ? format_double(*v) : std::string("-"); }

// Features for clustering: embedding coordinates plus the value column, normalised.
FeatureMatrix clustering_features(const TrajectoryDataset& ds, const std::string& embedding_path) {
  return assemble(load_embedding(embedding_path, ds), ds);
}

void add_grid_options(CLI::App* cmd, GridSpec& grid) {
  cmd->add_option("--k-min", grid.k_min, "Smallest K in the grid")->capture_default_str();
  cmd->add_option("--k-max", grid.k_max, "Largest K in the grid")->capture_default_str();
  cmd->add_option("--w-min", grid.w_min, "Smallest window half-width")->capture_default_str();
  cmd->add_option("--w-max", grid.w_max, "Largest window half-width")->capture_default_str();
  cmd->add_option("--restarts", grid.restarts, "Clustering restarts per (K, w) cell")->capture_default_str();
  cmd->add_option("--max-iter", grid.max_iter, "K-means iteration cap")->capture_default_str();
  cmd->add_option("--threads", grid.threads, "Worker threads (0: all cores)")->capture_default_str();
  cmd->add_option("--min-length", grid.inference.min_length, "Shortest skill instance kept")->capture_default_str();
  cmd->add_option("--min-prob", grid.inference.min_prob, "Transition probability cut-off")->capture_default_str();
}

void record_grid(Manifest& m, const GridSpec& g) {
  m.config("k_min", g.k_min);
  m.config("k_max", g.k_max);
  m.config("w_min", g.w_min);
  m.config("w_max", g.w_max);
  m.config("restarts", g.restarts);
  m.config("max_iter", g.max_iter);
  m.config("min_length", g.inference.min_length);
  m.config("min_prob", g.inference.min_prob);
  m.config("seed", seed_string(g.seed));
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cout << "warning: " << w << "\n";
}

void print_score(const ModelScore& s) {
  std::cout << "  vmse       " << format_double(s.vmse) << "\n"
            << "  inertia    " << format_double(s.inertia) << "\n"
            << "  intensity  " << format_double(s.intensity) << "\n"
            << "  entropy    " << format_double(s.entropy) << "\n";
}

// ---- gridworld-gen --------------------------------------------------------

struct GenOptions {
  std::string maze, out, manifest;
  int trajectories = 100;
  double corruption = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> epsilon;
};

void run_gen(const GenOptions& o) {
  Manifest m("gridworld-gen");
  m.input(o.maze);
  auto cfg = gridworld::load_maze(o.maze);
  cfg.seed = o.seed;
  if (o.epsilon) cfg.epsilon = *o.epsilon;
  m.config("trajectories", o.trajectories);
  m.config("corruption", o.corruption);
  m.config("epsilon", cfg.epsilon);
  m.config("seed", seed_string(o.seed));
  auto ds = m.timed("generate", [&] { return gridworld::generate(cfg, o.trajectories, o.corruption); });
  m.output(o.out, to_log_string(ds));
  m.write(manifest_path(o.manifest, o.out));

  double total = 0.0;
  for (const auto& s : ds.trajectories()) total += ds.total_reward(s);
  std::cout << "maze " << o.maze << " (" << cfg.width << "x" << cfg.height << ")\n"
            << "trajectories " << ds.trajectory_count() << ", records " << ds.size() << "\n"
            << "mean trajectory reward " << format_double(total / static_cast<double>(ds.trajectory_count())) << "\n"
            << "wrote " << o.out << "\n";
}

// ---- embed ----------------------------------------------------------------

struct EmbedOptions {
  std::string log, out, manifest, method = "tsne";
  EmbeddingConfig cfg;
};

void run_embed(const EmbedOptions& o) {
  Manifest m("embed");
  m.input(o.log);
  auto ds = ingest(o.log);
  m.config("method", o.method);
  FeatureMatrix x = feature_matrix(ds);
  FeatureMatrix y;
  std::vector<std::string> warnings;
  std::vector<KlSample> trace;
  if (o.method == "identity") {
    y = x;
  } else if (o.method == "pca") {
    m.config("pca_dims", o.cfg.pca_dims);
    auto r = m.timed("pca", [&] { return pca_detailed(normalize(x), o.cfg.pca_dims); });
    y = r.projected;
    warnings = r.warnings;
  } else {
    m.config("pca_dims", o.cfg.pca_dims);
    m.config("tsne_dims", o.cfg.tsne_dims);
    m.config("perplexity", o.cfg.perplexity);
    m.config("iterations", o.cfg.iterations);
    m.config("learning_rate", o.cfg.learning_rate);
    m.config("seed", seed_string(o.cfg.seed));
    y = m.timed("embed", [&] {
      FeatureMatrix z = normalize(x);
      if (z.cols() > o.cfg.pca_dims) {
        auto r = pca_detailed(z, o.cfg.pca_dims);
        warnings = r.warnings;
        z = r.projected;
      }
      return tsne(z, o.cfg, &trace);
    });
  }
  m.output(o.out, to_embedding_string(y, ds));
  m.write(manifest_path(o.manifest, o.out));

  print_warnings(warnings);
  std::cout << "method " << o.method << ", records " << ds.size() << ", dims " << y.cols() << "\n";
  if (!trace.empty())
    std::cout << "KL at iteration " << trace.front().iteration << ": " << format_double(trace.front().kl)
              << ", at " << trace.back().iteration << ": " << format_double(trace.back().kl) << "\n";
  std::cout << "wrote " << o.out << "\n";
}

// ---- cluster --------------------------------------------------------------

struct ClusterOptions {
  std::string log, embedding, out, manifest;
  int K = 0, w = 0, max_iter = 300;
  std::uint64_t seed = 0;
};

void run_cluster(const ClusterOptions& o) {
  Manifest m("cluster");
  m.input(o.log);
  m.input(o.embedding);
  auto ds = ingest(o.log);
  auto x = clustering_features(ds, o.embedding);
  m.config("K", o.K);
  m.config("w", o.w);
  m.config("max_iter", o.max_iter);
  m.config("seed", seed_string(o.seed));
  auto c = m.timed("cluster", [&] { return st_kmeans(x, ds, o.K, o.w, o.seed, o.max_iter); });
  m.output(o.out, to_clustering_string(c, ds));
  m.write(manifest_path(o.manifest, o.out));

  print_warnings(c.warnings);
  std::cout << "K " << c.K << ", w " << c.w << ", iterations " << c.iterations
            << (c.converged ? " (converged)" : " (iteration cap reached)") << "\n"
            << "inertia " << format_double(c.inertia) << "\n"
            << "intensity " << format_double(intensity_factor(c, ds)) << "\n"
            << "wrote " << o.out << "\n";
}

// ---- build ----------------------------------------------------------------

struct BuildOptions {
  std::string log, clusters, out, manifest;
  InferenceOptions inference;
  bool no_prune = false;
};

void run_build(BuildOptions o) {
  Manifest m("build");
  m.input(o.log);
  m.input(o.clusters);
  auto ds = ingest(o.log);
  auto c = load_clustering(o.clusters, ds);
  o.inference.prune = !o.no_prune;
  m.config("min_length", o.inference.min_length);
  m.config("min_prob", o.inference.min_prob);
  m.config("prune", o.inference.prune);
  auto model = m.timed("infer", [&] {
    auto mdl = infer(identify_skills(c.assignment, c.K, ds), c.K, ds, ds.gamma(), o.inference);
    mdl.w = c.w;
    return mdl;
  });
  m.output(o.out, to_model_string(model));
  m.write(manifest_path(o.manifest, o.out));

  print_warnings(model.warnings);
  int absorbing = 0, skills = 0;
  for (int i = 0; i < model.K; ++i) {
    absorbing += model.absorbing[static_cast<std::size_t>(i)] ? 1 : 0;
    for (int j = 0; j < model.K; ++j) skills += model.P(i, j) > 0 ? 1 : 0;
  }
  std::cout << "K " << model.K << ", skills " << skills << ", absorbing clusters " << absorbing << "\n"
            << "Bellman residual " << format_double(bellman_residual(model)) << "\n"
            << "wrote " << o.out << "\n";
}

// ---- select ---------------------------------------------------------------

struct SelectOptions {
  std::string log, embedding, report, clusters_out, model_out, manifest;
  GridSpec grid;
  std::size_t trials = 10000;
  std::optional<std::uint64_t> null_seed;
};

void run_select(const SelectOptions& o) {
  Manifest m("select");
  m.input(o.log);
  m.input(o.embedding);
  auto ds = ingest(o.log);
  auto x = clustering_features(ds, o.embedding);
  record_grid(m, o.grid);
  m.config("trials", o.trials);

  auto set = m.timed("grid_search", [&] { return grid_search(ds, x, o.grid); });
  const auto sel = select(set);
  const auto& best = set.candidates[sel.index];
  m.output(o.report, to_grid_report_string(report_rows(set, sel.index)));
  if (!o.clusters_out.empty()) m.output(o.clusters_out, to_clustering_string(best.clustering, ds));
  if (!o.model_out.empty()) {
    auto model = best.model;
    model.w = best.w;
    m.output(o.model_out, to_model_string(model));
  }

  std::optional<NullTestResult> null;
  if (o.trials > 0) {
    const std::uint64_t seed = o.null_seed.value_or(derive_seed(o.grid.seed, 0x6e756c6cULL));
    m.config("null_seed", seed_string(seed));
    null = m.timed("null_test", [&] {
      return null_p_value(best, ds, x, o.trials, seed, o.grid.inference, o.grid.threads);
    });
  }
  m.write(manifest_path(o.manifest, o.report));

  std::size_t valid = 0;
  for (const auto& c : set.candidates) valid += c.valid ? 1 : 0;
  std::cout << "candidates " << set.candidates.size() << " (" << valid << " valid)\n"
            << "selected K " << best.K << ", w " << best.w << " at prefix " << sel.prefix << "\n";
  print_score(best.score);
  if (null)
    std::cout << "null test: " << null->better << " of " << null->trials << " random models better on all criteria"
              << " (p = " << format_double(null->p_value) << ", " << null->degenerate << " degenerate)\n";
  std::cout << "wrote " << o.report << "\n";
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateOptions {
  std::string log, embedding, clusters, model, out, manifest;
  int top_k = 0;
};

void run_evaluate(const EvaluateOptions& o) {
  Manifest m("evaluate");
  m.input(o.log);
  m.input(o.embedding);
  m.input(o.clusters);
  m.input(o.model);
  auto ds = ingest(o.log);
  auto x = clustering_features(ds, o.embedding);
  auto c = load_clustering(o.clusters, ds);
  auto model = load_model(o.model);
  if (model.K != c.K) throw ValidationError("model and clustering disagree on K");

  const auto score = score_model(model, c, x, ds);
  const auto policy = greedy_policy(model);
  const auto corr = greedy_correlation(model, policy, ds, c.assignment);

  const auto ranked = rank_by_reward(ds);
  const int top_k = o.top_k > 0 ? o.top_k : static_cast<int>(ranked.size() / 3);
  if (top_k < 1 || 2 * static_cast<std::size_t>(top_k) > ranked.size())
    throw ArgumentError("top-k must lie in [1, trajectories / 2]");
  std::vector<std::size_t> top(ranked.begin(), ranked.begin() + top_k);
  std::vector<std::size_t> bottom(ranked.end() - top_k, ranked.end());
  const auto t_plus = transition_matrix(c.assignment, c.K, ds, top, kDefaultEjectSmoothing);
  const auto t_minus = transition_matrix(c.assignment, c.K, ds, bottom, kDefaultEjectSmoothing);
  const auto corr_plus = transition_correlation(policy, t_plus);
  const auto corr_minus = transition_correlation(policy, t_minus);

  if (!o.out.empty()) {
    json doc;
    doc["vmse"] = score.vmse;
    doc["inertia"] = score.inertia;
    doc["intensity"] = score.intensity;
    doc["entropy"] = score.entropy;
    doc["bellman_residual"] = bellman_residual(model);
    json choice = json::array(), corr_json = json::array();
    for (int i = 0; i < c.K; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      choice.push_back(policy.choice[iu] < 0 ? json(nullptr) : json(policy.choice[iu]));
      corr_json.push_back(corr[iu] ? json(*corr[iu]) : json(nullptr));
    }
    doc["greedy_choice"] = choice;
    doc["greedy_correlation"] = corr_json;
    doc["top_k"] = top_k;
    doc["policy_vs_top"] = corr_plus ? json(*corr_plus) : json(nullptr);
    doc["policy_vs_bottom"] = corr_minus ? json(*corr_minus) : json(nullptr);
    m.output(o.out, doc.dump(2) + "\n");
    m.write(manifest_path(o.manifest, o.out));
  } else if (!o.manifest.empty()) {
    m.write(o.manifest);
  }

  std::cout << "VMSE " << format_double(score.vmse) << "\n"
            << "inertia " << format_double(score.inertia) << "\n"
            << "intensity " << format_double(score.intensity) << "\n"
            << "entropy " << format_double(score.entropy) << "\n"
            << "Bellman residual " << format_double(bellman_residual(model)) << "\n"
            << "cluster  greedy  corr\n";
  for (int i = 0; i < c.K; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    std::cout << "  " << i << "  " << (policy.choice[iu] < 0 ? std::string("-") : std::to_string(policy.choice[iu]))
              << "  " << maybe(corr[iu]) << "\n";
  }
  std::cout << "greedy policy vs T+ " << maybe(corr_plus) << ", vs T- " << maybe(corr_minus) << " (top-k " << top_k
            << ")\n";
}

// ---- eject ----------------------------------------------------------------

struct EjectOptions {
  std::string log, embedding, out, manifest;
  GridSpec grid;
  std::size_t train_count = 0;
  std::optional<std::uint64_t> split_seed;
  int top_k = 0;
  double smoothing = kDefaultEjectSmoothing;
  double threshold = 0.0;
};

void run_eject(const EjectOptions& o) {
  Manifest m("eject");
  m.input(o.log);
  m.input(o.embedding);
  auto ds = ingest(o.log);
  auto x = clustering_features(ds, o.embedding);
  const std::size_t train_count = o.train_count > 0 ? o.train_count : (ds.trajectory_count() * 5) / 8;
  const std::uint64_t split_seed = o.split_seed.value_or(o.grid.seed);
  record_grid(m, o.grid);
  m.config("train_count", train_count);
  m.config("split_seed", seed_string(split_seed));
  m.config("top_k", o.top_k);
  m.config("smoothing", o.smoothing);
  m.config("threshold", o.threshold);

  auto exp = m.timed("eject", [&] {
    return eject_experiment(ds, x, train_count, split_seed, o.grid, o.top_k, o.smoothing, o.threshold);
  });
  m.output(o.out, to_eject_report_string(exp.report));
  m.write(manifest_path(o.manifest, o.out));

  const auto& r = exp.report;
  std::cout << "train " << exp.train_trajectories << ", test " << r.trajectories.size() << " trajectories\n"
            << "selected K " << exp.selected.K << ", w " << exp.selected.w << ", top-k " << exp.monitor.top_k << "\n"
            << "ejected " << r.ejected << " of " << r.trajectories.size() << "\n"
            << "mean reward, all test     " << format_double(r.mean_all) << "\n"
            << "mean reward, not ejected  " << maybe(r.mean_kept) << "\n"
            << "gain " << format_double(r.gain_percent) << "%\n"
            << "wrote " << o.out << "\n";
}

// ---- export-ui ------------------------------------------------------------

struct ExportOptions {
  std::string log, embedding, clusters, model, report, out, manifest;
};

void run_export(const ExportOptions& o) {
  Manifest m("export-ui");
  m.input(o.log);
  m.input(o.embedding);
  m.input(o.clusters);
  m.input(o.model);
  auto ds = ingest(o.log);
  auto emb = load_embedding(o.embedding, ds);
  auto c = load_clustering(o.clusters, ds);
  auto model = load_model(o.model);
  std::vector<GridReportRow> rows;
  if (!o.report.empty()) {
    m.input(o.report);
    std::istringstream in(read_file(o.report));
    rows = read_grid_report(in);
  }
  auto doc = export_document(ds, emb, c, model, rows);
  m.output(o.out, doc.dump() + "\n");
  m.write(manifest_path(o.manifest, o.out));
  std::cout << "records " << ds.size() << ", clusters " << model.K << ", grid rows " << rows.size() << "\n"
            << "wrote " << o.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAMDP toolkit: build semi-aggregated MDP models from policy trajectories"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gridworld-gen", "Generate a gridworld trajectory log");
  gen_cmd->add_option("--maze", gen.maze, "Maze file")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", gen.out, "Output log")->required();
  gen_cmd->add_option("--trajectories,-n", gen.trajectories, "Number of trajectories")->capture_default_str();
  gen_cmd->add_option("--corruption", gen.corruption, "Fraction of corrupted trajectories")->capture_default_str();
  gen_cmd->add_option("--epsilon", gen.epsilon, "Override the maze exploration rate");
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--manifest", gen.manifest, "Run manifest path (default: <out>.manifest.json)");

  EmbedOptions emb;
  auto* emb_cmd = app.add_subcommand("embed", "Embed record features");
  emb_cmd->add_option("--log", emb.log, "Trajectory log")->required()->check(CLI::ExistingFile);
  emb_cmd->add_option("--out", emb.out, "Output embedding")->required();
  emb_cmd->add_option("--method", emb.method, "tsne, pca or identity")
      ->check(CLI::IsMember({"tsne", "pca", "identity"}))
      ->capture_default_str();
  emb_cmd->add_option("--pca-dims", emb.cfg.pca_dims, "PCA dimensions before t-SNE")->capture_default_str();
  emb_cmd->add_option("--dims", emb.cfg.tsne_dims, "t-SNE output dimensions (2 or 3)")->capture_default_str();
  emb_cmd->add_option("--perplexity", emb.cfg.perplexity, "t-SNE perplexity")->capture_default_str();
  emb_cmd->add_option("--iterations", emb.cfg.iterations, "t-SNE iterations")->capture_default_str();
  emb_cmd->add_option("--learning-rate", emb.cfg.learning_rate, "t-SNE learning rate")->capture_default_str();
  emb_cmd->add_option("--seed", emb.cfg.seed, "Random seed")->capture_default_str();
  emb_cmd->add_option("--manifest", emb.manifest, "Run manifest path");

  ClusterOptions cl;
  auto* cl_cmd = app.add_subcommand("cluster", "Spatio-temporal K-means");
  cl_cmd->add_option("--log", cl.log, "Trajectory log")->required()->check(CLI::ExistingFile);
  cl_cmd->add_option("--embedding", cl.embedding, "Embedding file")->required()->check(CLI::ExistingFile);
  cl_cmd->add_option("--out", cl.out, "Output clustering")->required();
  cl_cmd->add_option("-K,--clusters", cl.K, "Number of clusters")->required();
  cl_cmd->add_option("-w,--window", cl.w, "Window half-width")->required();
  cl_cmd->add_option("--max-iter", cl.max_iter, "Iteration cap")->capture_default_str();
  cl_cmd->add_option("--seed", cl.seed, "Random seed")->capture_default_str();
  cl_cmd->add_option("--manifest", cl.manifest, "Run manifest path");

  BuildOptions bd;
  auto* bd_cmd = app.add_subcommand("build", "Infer the SAMDP from a clustering");
  bd_cmd->add_option("--log", bd.log, "Trajectory log")->required()->check(CLI::ExistingFile);
  bd_cmd->add_option("--clusters", bd.clusters, "Clustering file")->required()->check(CLI::ExistingFile);
  bd_cmd->add_option("--out", bd.out, "Output model")->required();
  bd_cmd->add_option("--min-length", bd.inference.min_length, "Shortest skill instance kept")->capture_default_str();
  bd_cmd->add_option("--min-prob", bd.inference.min_prob, "Transition probability cut-off")->capture_default_str();
  bd_cmd->add_flag("--no-prune", bd.no_prune, "Keep every observed transition");
  bd_cmd->add_option("--manifest", bd.manifest, "Run manifest path");

  SelectOptions sel;
  auto* sel_cmd = app.add_subcommand("select", "Grid search, model selection and null test");
  sel_cmd->add_option("--log", sel.log, "Trajectory log")->required()->check(CLI::ExistingFile);
  sel_cmd->add_option("--embedding", sel.embedding, "Embedding file")->required()->check(CLI::ExistingFile);
  sel_cmd->add_option("--report", sel.report, "Output grid report")->required();
  sel_cmd->add_option("--clusters-out", sel.clusters_out, "Write the selected clustering");
  sel_cmd->add_option("--model-out", sel.model_out, "Write the selected model");
  add_grid_options(sel_cmd, sel.grid);
  sel_cmd->add_option("--seed", sel.grid.seed, "Master seed")->capture_default_str();
  sel_cmd->add_option("--trials", sel.trials, "Random models in the null test (0: skip)")->capture_default_str();
  sel_cmd->add_option("--null-seed", sel.null_seed, "Seed of the null test");
  sel_cmd->add_option("--manifest", sel.manifest, "Run manifest path");

  EvaluateOptions ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Score a model and its greedy policy");
  ev_cmd->add_option("--log", ev.log, "Trajectory log")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--embedding", ev.embedding, "Embedding file")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--clusters", ev.clusters, "Clustering file")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--model", ev.model, "Model file")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--top-k", ev.top_k, "Trajectories per side for T+/T- (0: a third)")->capture_default_str();
  ev_cmd->add_option("--out", ev.out, "Write the evaluation as JSON");
  ev_cmd->add_option("--manifest", ev.manifest, "Run manifest path");

  EjectOptions ej;
  auto* ej_cmd = app.add_subcommand("eject", "Train/test eject-button experiment");
  ej_cmd->add_option("--log", ej.log, "Trajectory log")->required()->check(CLI::ExistingFile);
  ej_cmd->add_option("--embedding", ej.embedding, "Embedding file")->required()->check(CLI::ExistingFile);
  ej_cmd->add_option("--out", ej.out, "Output eject report")->required();
  add_grid_options(ej_cmd, ej.grid);
  ej_cmd->add_option("--seed", ej.grid.seed, "Master seed of the grid search")->capture_default_str();
  ej_cmd->add_option("--train-count", ej.train_count, "Training trajectories (0: five eighths)")->capture_default_str();
  ej_cmd->add_option("--split-seed", ej.split_seed, "Seed of the train/test split (default: --seed)");
  ej_cmd->add_option("--top-k", ej.top_k, "Trajectories per side (0: a third of training)")->capture_default_str();
  ej_cmd->add_option("--smoothing", ej.smoothing, "Additive smoothing of T+/T-")->capture_default_str();
  ej_cmd->add_option("--threshold", ej.threshold, "Log-likelihood ratio threshold")->capture_default_str();
  ej_cmd->add_option("--manifest", ej.manifest, "Run manifest path");

  ExportOptions ex;
  auto* ex_cmd = app.add_subcommand("export-ui", "Write the explorer document");
  ex_cmd->add_option("--log", ex.log, "Trajectory log")->required()->check(CLI::ExistingFile);
  ex_cmd->add_option("--embedding", ex.embedding, "Embedding file")->required()->check(CLI::ExistingFile);
  ex_cmd->add_option("--clusters", ex.clusters, "Clustering file")->required()->check(CLI::ExistingFile);
  ex_cmd->add_option("--model", ex.model, "Model file")->required()->check(CLI::ExistingFile);
  ex_cmd->add_option("--report", ex.report, "Grid report")->check(CLI::ExistingFile);
  ex_cmd->add_option("--out", ex.out, "Output JSON document")->required();
  ex_cmd->add_option("--manifest", ex.manifest, "Run manifest path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen_cmd) run_gen(gen);
    else if (*emb_cmd) run_embed(emb);
    else if (*cl_cmd) run_cluster(cl);
    else if (*bd_cmd) run_build(bd);
    else if (*sel_cmd) run_select(sel);
    else if (*ev_cmd) run_evaluate(ev);
    else if (*ej_cmd) run_eject(ej);
    else if (*ex_cmd) run_export(ex);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
