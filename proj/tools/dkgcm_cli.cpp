// dkgcm: clustering, training, evaluation, prediction and ablation drivers
// for the cluster-wise spatiotemporal traffic forecasting pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dkgcm/config.hpp"
#include "dkgcm/hashio.hpp"
#include "dkgcm/svgplot.hpp"
#include "dkgcm/synthdata.hpp"
#include "dkgcm/trainer.hpp"

namespace fs = std::filesystem;
using namespace dkgcm;

namespace {

/// Advisory lock on the output directory for the process lifetime.
class OutDirLock {
 public:
  explicit OutDirLock(const fs::path& dir) : lock_(dir / ".dkgcm.lock") {
    fs::create_directories(dir);
    std::ofstream probe(lock_, std::ios::out | std::ios::app);
    require(probe.good(), "cannot access output directory " + dir.string());
    probe.close();
    // A stale lock from a crashed run is refused rather than stolen.
    std::ifstream existing(lock_);
    std::string owner;
    std::getline(existing, owner);
    require(owner.empty() || owner == marker(),
            "output directory " + dir.string() + " is locked by another run (" +
                owner + "); remove " + lock_.string() + " if that run is gone");
    std::ofstream os(lock_, std::ios::trunc);
    os << marker() << "\n";
    held_ = true;
  }
  ~OutDirLock() {
    if (held_) {
      std::error_code ec;
      fs::remove(lock_, ec);
    }
  }
  OutDirLock(const OutDirLock&) = delete;
  OutDirLock& operator=(const OutDirLock&) = delete;

 private:
  static std::string marker() { return "pid:" + std::to_string(::getpid()); }
  fs::path lock_;
  bool held_ = false;
};

/// Collects emitted files and writes the run manifest last.
class ManifestWriter {
 public:
  ManifestWriter(fs::path dir, nlohmann::json config_snapshot, std::uint64_t seed)
      : dir_(std::move(dir)), seed_(seed), config_(std::move(config_snapshot)) {}

  void set_dataset_hash(std::uint64_t h) { dataset_hash_ = h; }
  void record(const fs::path& file) { outputs_.push_back(file); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void finish() {
    nlohmann::json j;
    j["config"] = config_;
    j["config_hash"] = hash_hex(fnv1a64(config_.dump()));
    j["dataset_hash"] = hash_hex(dataset_hash_);
    j["seed"] = seed_;
    j["generated_at_unix"] = static_cast<long>(::time(nullptr));
    j["output_dir"] = dir_.string();
    nlohmann::json files = nlohmann::json::array();
    std::uint64_t combined = fnv1a64("");
    for (const auto& f : outputs_) {
      const std::uint64_t h = hash_file(f.string());
      files.push_back({{"file", f.filename().string()}, {"hash", hash_hex(h)}});
      combined ^= h;
    }
    j["outputs"] = files;
    j["artifact_hash"] = hash_hex(combined);
    std::ofstream os(dir_ / "manifest.json");
    require(os.good(), "cannot write manifest.json");
    os << j.dump(2) << "\n";
  }

 private:
  fs::path dir_;
  std::uint64_t seed_;
  std::uint64_t dataset_hash_ = 0;
  nlohmann::json config_;
  std::vector<fs::path> outputs_;
};

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream os(path);
  require(os.good(), "cannot write " + path);
  char buf[64];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.6g", m.at(r, c));
      os << (c ? "," : "") << buf;
    }
    os << "\n";
  }
  require(os.good(), "write failed for " + path);
}

nlohmann::json clusters_json(const ClusterAssignment& a) {
  nlohmann::json j;
  j["K"] = a.k;
  j["seed"] = a.seed;
  j["labels"] = a.labels;
  j["inertia"] = a.inertia;
  return j;
}

void write_losslog(const std::string& path,
                   const std::vector<std::tuple<std::string, double, std::vector<double>>>&
                       runs) {
  std::ofstream os(path);
  require(os.good(), "cannot write " + path);
  os << "epoch,variant,epsilon,loss\n";
  char buf[64];
  for (const auto& [variant, epsilon, losses] : runs)
    for (std::size_t e = 0; e < losses.size(); ++e) {
      std::snprintf(buf, sizeof(buf), "%.9g", losses[e]);
      os << e + 1 << "," << variant << "," << epsilon << "," << buf << "\n";
    }
  require(os.good(), "write failed for " + path);
}

void plot_losslog(const std::string& path,
                  const std::vector<std::tuple<std::string, double, std::vector<double>>>&
                      runs) {
  std::vector<PlotSeries> series;
  for (const auto& [variant, epsilon, losses] : runs) {
    PlotSeries s;
    s.label = variant;
    for (std::size_t e = 0; e < losses.size(); ++e) {
      s.x.push_back(static_cast<double>(e + 1));
      s.y.push_back(losses[e]);
    }
    series.push_back(std::move(s));
  }
  write_svg_lines(path, "training loss per epoch", "epoch", "loss", series);
}

struct LoadedData {
  TrafficSeries series;
  AdjacencyMatrix adjacency;
  std::uint64_t series_hash = 0;
};

LoadedData load_data(const RunConfig& cfg) {
  require(!cfg.data.series.empty(), "config: data.series is required");
  require(!cfg.data.adjacency.empty(), "config: data.adjacency is required");
  LoadedData d;
  d.series = load_series(cfg.data.series, parse_series_format(cfg.data.format),
                         parse_missing_policy(cfg.data.missing));
  d.adjacency = load_adjacency(cfg.data.adjacency, d.series.node_ids);
  d.series_hash = hash_file(cfg.data.series);
  return d;
}

nlohmann::json checkpoint_extra(const RunConfig& rc, const TrainedModel<float>& model,
                                std::uint64_t dataset_hash) {
  nlohmann::json extra;
  extra["config"] = run_config_json(rc);
  extra["config_hash"] = hash_hex(fnv1a64(run_config_json(rc).dump()));
  extra["dataset_hash"] = hash_hex(dataset_hash);
  extra["node_ids"] = model.node_ids;
  extra["clusters"] = clusters_json(model.assignment);
  extra["norm_mean"] = model.stats.mean;
  extra["norm_std"] = model.stats.stddev;
  // Sparse upper triangle of the physical adjacency, enough to rebuild
  // every cluster subgraph at load time.
  nlohmann::json edges = nlohmann::json::array();
  const Matrix full = [&] {
    Matrix m(model.node_ids.size(), model.node_ids.size());
    for (const auto& g : model.graphs)
      for (std::size_t a = 0; a < g.member_nodes.size(); ++a)
        for (std::size_t b = 0; b < g.member_nodes.size(); ++b)
          m.at(static_cast<std::size_t>(g.member_nodes[a]),
               static_cast<std::size_t>(g.member_nodes[b])) = g.adjacency.at(a, b);
    return m;
  }();
  for (std::size_t i = 0; i < full.rows(); ++i)
    for (std::size_t j = i + 1; j < full.cols(); ++j)
      if (full.at(i, j) != 0.0) edges.push_back({i, j, full.at(i, j)});
  extra["adjacency_edges"] = edges;
  extra["n_nodes"] = model.node_ids.size();
  return extra;
}

struct LoadedBundle {
  RunConfig run_config;
  TrainRunConfig cfg;
  ClusterAssignment assignment;
  NormStats stats;
  std::vector<std::string> node_ids;
  std::vector<ClusterSubgraph> graphs;
  std::vector<ClusterModel<float>> models;
  std::string dataset_hash;
  std::string config_hash;
};

LoadedBundle load_bundle(const std::string& path) {
  diff::Checkpoint ck = diff::load_checkpoint(path);
  LoadedBundle b;
  b.run_config = parse_run_config(ck.manifest.at("config"));
  b.cfg = to_train_config(b.run_config);
  b.dataset_hash = ck.manifest.at("dataset_hash");
  b.config_hash = ck.manifest.at("config_hash");
  b.node_ids = ck.manifest.at("node_ids").get<std::vector<std::string>>();
  b.assignment.k = ck.manifest.at("clusters").at("K").get<int>();
  b.assignment.seed = ck.manifest.at("clusters").at("seed").get<std::uint64_t>();
  b.assignment.labels = ck.manifest.at("clusters").at("labels").get<std::vector<int>>();
  b.assignment.inertia = ck.manifest.at("clusters").at("inertia").get<double>();
  b.stats.mean = ck.manifest.at("norm_mean").get<std::vector<double>>();
  b.stats.stddev = ck.manifest.at("norm_std").get<std::vector<double>>();

  const std::size_t n = ck.manifest.at("n_nodes").get<std::size_t>();
  Matrix adj(n, n);
  for (const auto& e : ck.manifest.at("adjacency_edges")) {
    const auto i = e.at(0).get<std::size_t>(), j = e.at(1).get<std::size_t>();
    adj.at(i, j) = e.at(2).get<double>();
    adj.at(j, i) = e.at(2).get<double>();
  }
  b.graphs = build_cluster_subgraphs(adj, b.assignment);
  b.models = models_from_values<float>(b.cfg, b.graphs, ck.params);
  return b;
}

// ---- subcommands ---------------------------------------------------------

int cmd_synth(const std::string& out_dir, std::size_t nodes, std::size_t steps,
              std::uint64_t seed) {
  OutDirLock lock(out_dir);
  SyntheticData data = generate_synthetic(nodes, steps, seed);
  const fs::path dir(out_dir);
  save_series_csv((dir / "series.csv").string(), data.series);
  save_adjacency_csv((dir / "adjacency.csv").string(), data.adjacency);
  std::ofstream labels(dir / "true_labels.json");
  labels << nlohmann::json(data.true_labels).dump() << "\n";
  std::cout << "wrote " << (dir / "series.csv").string() << " (" << steps << " x "
            << nodes << ") and adjacency.csv\n";
  return 0;
}

int cmd_cluster(const std::string& data_path, const std::string& adjacency_path,
                const std::string& format, int k, std::uint64_t seed, int band,
                const std::string& out_dir) {
  require(k >= 1, "cluster: --k must be a positive integer");
  OutDirLock lock(out_dir);
  TrafficSeries series = load_series(data_path, parse_series_format(format));
  AdjacencyMatrix adjacency = load_adjacency(adjacency_path, series.node_ids);

  nlohmann::json cfg_snapshot = {{"command", "cluster"}, {"k", k},
                                 {"seed", seed},         {"band", band},
                                 {"data", data_path},    {"adjacency", adjacency_path}};
  ManifestWriter manifest(out_dir, cfg_snapshot, seed);
  manifest.set_dataset_hash(hash_file(data_path));

  SplitSeries split = split_chronological(series);
  NormStats stats = zscore_fit(split.train);
  Matrix train_norm = zscore_apply(split.train.values, stats);

  Matrix dtw = dtw_matrix(train_norm, band > 0 ? band : -1);
  ClusterAssignment assignment = kmeans_cluster(dtw, k, seed);
  Matrix cosine = cosine_similarity_matrix(train_norm);
  auto graphs = build_cluster_subgraphs(adjacency.weights, assignment);

  write_matrix_csv(manifest.path("dtw.csv"), dtw);
  manifest.record(manifest.path("dtw.csv"));
  write_matrix_csv(manifest.path("cosine.csv"), cosine);
  manifest.record(manifest.path("cosine.csv"));
  {
    std::ofstream os(manifest.path("clusters.json"));
    require(os.good(), "cannot write clusters.json");
    os << clusters_json(assignment).dump(2) << "\n";
  }
  manifest.record(manifest.path("clusters.json"));
  manifest.finish();

  std::cout << "clusters (K=" << k << ", seed=" << seed
            << ", inertia=" << assignment.inertia << "):\n";
  for (const auto& g : graphs) {
    std::cout << "  cluster " << (&g - graphs.data()) << ": " << g.member_nodes.size()
              << " nodes\n";
  }
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
  RunConfig rc = load_run_config(config_path);
  TrainRunConfig cfg = to_train_config(rc);
  OutDirLock lock(out_dir);
  ManifestWriter manifest(out_dir, run_config_json(rc), cfg.seed);

  LoadedData data = load_data(rc);
  manifest.set_dataset_hash(data.series_hash);
  PreparedData prepared = prepare_data(data.series, data.adjacency, cfg);
  TrainedModel<float> model = train_model<float>(cfg, prepared, data.series.node_ids);

  diff::save_checkpoint(manifest.path("checkpoint.bin"), model.parameter_values(),
                        checkpoint_extra(rc, model, data.series_hash));
  manifest.record(manifest.path("checkpoint.bin"));

  std::vector<std::tuple<std::string, double, std::vector<double>>> runs{
      {"full", cfg.grpo.enabled ? cfg.grpo.epsilon : 0.0, model.epoch_loss}};
  write_losslog(manifest.path("losslog.csv"), runs);
  manifest.record(manifest.path("losslog.csv"));
  plot_losslog(manifest.path("losslog.svg"), runs);
  manifest.record(manifest.path("losslog.svg"));
  manifest.finish();

  std::cout << "trained " << model.models.size() << " cluster model(s), final loss "
            << model.epoch_loss.back() << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
             const std::string& out_dir, int at) {
  LoadedBundle bundle = load_bundle(checkpoint_path);
  OutDirLock lock(out_dir);

  const std::uint64_t dhash = hash_file(data_path);
  require(hash_hex(dhash) == bundle.dataset_hash,
          "checkpoint/data mismatch: checkpoint was trained on dataset " +
              bundle.dataset_hash + ", given data hashes to " + hash_hex(dhash));

  TrafficSeries series =
      load_series(data_path, parse_series_format(bundle.run_config.data.format),
                  parse_missing_policy(bundle.run_config.data.missing));
  require(series.node_ids == bundle.node_ids,
          "checkpoint/data mismatch: node ids differ");

  // Reuse the checkpointed normalization and clustering; recompute windows.
  SplitSeries split = split_chronological(series);
  Matrix test_norm = zscore_apply(split.test.values, bundle.stats);
  SampleSet test_windows =
      make_windows(test_norm, bundle.cfg.model.seq_len, bundle.cfg.model.horizon);

  MetricsReport report = evaluate_model(bundle.models, bundle.graphs, bundle.stats,
                                        test_windows, bundle.cfg.batch_size);

  ManifestWriter manifest(out_dir, run_config_json(bundle.run_config),
                          bundle.cfg.seed);
  manifest.set_dataset_hash(dhash);
  nlohmann::json mj = report.to_json();
  mj["config_hash"] = bundle.config_hash;
  mj["seed"] = bundle.cfg.seed;
  {
    std::ofstream os(manifest.path("metrics.json"));
    require(os.good(), "cannot write metrics.json");
    os << mj.dump(2) << "\n";
  }
  manifest.record(manifest.path("metrics.json"));
  manifest.finish();

  const std::size_t slice = at > 0 ? static_cast<std::size_t>(at)
                                   : bundle.cfg.model.horizon;
  require(slice >= 1 && slice <= report.per_horizon.size(),
          "--at must lie in [1, horizon]");
  const MetricPair& mp = report.per_horizon[slice - 1];
  std::printf("@%zu: MAE %.4f RMSE %.4f (pooled over %zu errors)\n", slice, mp.mae,
              mp.rmse, mp.count);
  for (const auto& c : report.per_cluster)
    std::printf("cluster %d (%zu nodes): MAE %.4f RMSE %.4f\n", c.cluster,
                c.node_count, c.metrics.mae, c.metrics.rmse);
  return 0;
}

int cmd_predict(const std::string& checkpoint_path, const std::string& window_csv,
                const std::string& out_path) {
  LoadedBundle bundle = load_bundle(checkpoint_path);
  TrafficSeries window = load_series(window_csv, SeriesFormat::Csv);
  require(window.node_ids == bundle.node_ids,
          "predict: window node ids do not match the checkpoint");
  require(window.steps() == bundle.cfg.model.seq_len,
          "predict: window must have exactly " +
              std::to_string(bundle.cfg.model.seq_len) + " rows, got " +
              std::to_string(window.steps()));

  Matrix forecast = predict_window(bundle.models, bundle.graphs, bundle.stats,
                                   window.values, bundle.cfg.model.horizon);
  std::ofstream os(out_path);
  require(os.good(), "cannot write " + out_path);
  for (std::size_t c = 0; c < bundle.node_ids.size(); ++c)
    os << (c ? "," : "") << bundle.node_ids[c];
  os << "\n";
  char buf[64];
  for (std::size_t r = 0; r < forecast.rows(); ++r) {
    for (std::size_t c = 0; c < forecast.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.6g", forecast.at(r, c));
      os << (c ? "," : "") << buf;
    }
    os << "\n";
  }
  require(os.good(), "write failed for " + out_path);
  std::cout << "wrote " << out_path << " (" << forecast.rows() << " x "
            << forecast.cols() << ")\n";
  return 0;
}

struct VariantResult {
  std::string name;
  MetricsReport report;
  std::vector<double> epoch_loss;
};

VariantResult run_variant(const std::string& name, const TrainRunConfig& base,
                          const LoadedData& data, const PreparedData* shared) {
  TrainRunConfig cfg = base;
  bool rebuild = false;
  if (name == "no-clustering") {
    cfg.n_clusters = 1;
    rebuild = true;
  } else if (name == "no-fbmamba") {
    cfg.model.use_fbmamba = false;
  } else if (name == "no-grpo") {
    cfg.grpo.tau = 0.0;
  } else {
    require(name == "full", "unknown ablation variant '" + name + "'");
  }

  PreparedData local;
  const PreparedData* prepared = shared;
  if (rebuild || shared == nullptr) {
    local = prepare_data(data.series, data.adjacency, cfg);
    prepared = &local;
  }
  TrainedModel<float> model = train_model<float>(cfg, *prepared, data.series.node_ids);
  VariantResult r;
  r.name = name;
  r.report = evaluate_model(model.models, model.graphs, model.stats,
                            prepared->test_windows, cfg.batch_size);
  r.epoch_loss = model.epoch_loss;
  return r;
}

int cmd_ablate(const std::string& config_path, const std::string& out_dir,
               std::vector<std::string> variants) {
  RunConfig rc = load_run_config(config_path);
  TrainRunConfig cfg = to_train_config(rc);
  if (variants.empty())
    variants = {"full", "no-clustering", "no-fbmamba", "no-grpo"};
  OutDirLock lock(out_dir);
  ManifestWriter manifest(out_dir, run_config_json(rc), cfg.seed);

  LoadedData data = load_data(rc);
  manifest.set_dataset_hash(data.series_hash);
  PreparedData shared = prepare_data(data.series, data.adjacency, cfg);

  // All variants share the identical split; record its hash for the table.
  std::string split_hash;
  {
    std::string bytes;
    for (double v : shared.train_norm.data()) bytes.append(reinterpret_cast<const char*>(&v), sizeof(v));
    split_hash = hash_hex(fnv1a64(bytes + std::to_string(shared.test_windows.size())));
  }

  std::vector<VariantResult> results;
  for (const auto& name : variants)
    results.push_back(run_variant(name, cfg, data, &shared));

  {
    std::ofstream os(manifest.path("ablation.csv"));
    require(os.good(), "cannot write ablation.csv");
    os << "variant,mae,rmse,split_hash\n";
    char buf[96];
    for (const auto& r : results) {
      std::snprintf(buf, sizeof(buf), "%.6g,%.6g", r.report.pooled.mae,
                    r.report.pooled.rmse);
      os << r.name << "," << buf << "," << split_hash << "\n";
    }
  }
  manifest.record(manifest.path("ablation.csv"));

  std::vector<std::pair<std::string, double>> bars;
  for (const auto& r : results) bars.push_back({r.name, r.report.pooled.mae});
  write_svg_bars(manifest.path("ablation.svg"), "ablation test MAE", "MAE", bars);
  manifest.record(manifest.path("ablation.svg"));

  std::vector<std::tuple<std::string, double, std::vector<double>>> runs;
  for (const auto& r : results)
    runs.push_back({r.name, cfg.grpo.epsilon, r.epoch_loss});
  write_losslog(manifest.path("losslog.csv"), runs);
  manifest.record(manifest.path("losslog.csv"));
  plot_losslog(manifest.path("losslog.svg"), runs);
  manifest.record(manifest.path("losslog.svg"));
  manifest.finish();

  for (const auto& r : results)
    std::printf("%-14s MAE %.4f RMSE %.4f\n", r.name.c_str(), r.report.pooled.mae,
                r.report.pooled.rmse);
  return 0;
}

int cmd_sensitivity(const std::string& config_path, const std::string& out_dir,
                    const std::string& param, const std::vector<double>& values) {
  RunConfig rc = load_run_config(config_path);
  require(param == "k" || param == "seq_len" || param == "hidden_dim" ||
              param == "epsilon",
          "sensitivity: --param must be one of k, seq_len, hidden_dim, epsilon");
  require(!values.empty(), "sensitivity: --values must not be empty");
  OutDirLock lock(out_dir);
  ManifestWriter manifest(out_dir, run_config_json(rc),
                          rc.training.seed);

  LoadedData data = load_data(rc);
  manifest.set_dataset_hash(data.series_hash);

  std::vector<std::tuple<std::string, double, std::vector<double>>> runs;
  std::vector<std::array<double, 3>> rows;  // value, mae, rmse
  for (double value : values) {
    RunConfig vrc = rc;
    if (param == "k")
      vrc.clustering.k = static_cast<int>(value);
    else if (param == "seq_len")
      vrc.model.seq_len = static_cast<std::size_t>(value);
    else if (param == "hidden_dim")
      vrc.model.hidden_dim = static_cast<std::size_t>(value);
    else
      vrc.grpo.epsilon = value;
    TrainRunConfig cfg = to_train_config(vrc);
    PreparedData prepared = prepare_data(data.series, data.adjacency, cfg);
    TrainedModel<float> model = train_model<float>(cfg, prepared, data.series.node_ids);
    MetricsReport report = evaluate_model(model.models, model.graphs, model.stats,
                                          prepared.test_windows, cfg.batch_size);
    rows.push_back({value, report.pooled.mae, report.pooled.rmse});
    char label[64];
    std::snprintf(label, sizeof(label), "%s=%g", param.c_str(), value);
    runs.push_back({label, cfg.grpo.epsilon, model.epoch_loss});
    std::printf("%s=%g: MAE %.4f RMSE %.4f\n", param.c_str(), value,
                report.pooled.mae, report.pooled.rmse);
  }

  {
    std::ofstream os(manifest.path("sensitivity.csv"));
    require(os.good(), "cannot write sensitivity.csv");
    os << "param,value,mae,rmse\n";
    char buf[96];
    for (const auto& row : rows) {
      std::snprintf(buf, sizeof(buf), "%g,%.6g,%.6g", row[0], row[1], row[2]);
      os << param << "," << buf << "\n";
    }
  }
  manifest.record(manifest.path("sensitivity.csv"));

  PlotSeries mae_series{"MAE", {}, {}}, rmse_series{"RMSE", {}, {}};
  for (const auto& row : rows) {
    mae_series.x.push_back(row[0]);
    mae_series.y.push_back(row[1]);
    rmse_series.x.push_back(row[0]);
    rmse_series.y.push_back(row[2]);
  }
  write_svg_lines(manifest.path("sensitivity.svg"), "sensitivity over " + param, param,
                  "error", {mae_series, rmse_series});
  manifest.record(manifest.path("sensitivity.svg"));

  write_losslog(manifest.path("losslog.csv"), runs);
  manifest.record(manifest.path("losslog.csv"));
  plot_losslog(manifest.path("losslog.svg"), runs);
  manifest.record(manifest.path("losslog.svg"));
  manifest.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cluster-wise spatiotemporal traffic flow forecasting"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic two-family dataset");
  std::string synth_out = "synth";
  std::size_t synth_nodes = 20, synth_steps = 2000;
  std::uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--nodes", synth_nodes, "node count");
  synth->add_option("--steps", synth_steps, "time steps");
  synth->add_option("--seed", synth_seed, "rng seed");

  // cluster
  auto* cluster = app.add_subcommand("cluster", "DTW + k-means node clustering");
  std::string cl_data, cl_adj, cl_out = "cluster_out", cl_format = "csv";
  int cl_k = 5, cl_band = 0;
  std::uint64_t cl_seed = 0;
  cluster->add_option("--data", cl_data, "series file")->required();
  cluster->add_option("--adjacency", cl_adj, "adjacency CSV")->required();
  cluster->add_option("--format", cl_format, "csv or raw-f32");
  cluster->add_option("--k", cl_k, "cluster count");
  cluster->add_option("--seed", cl_seed, "rng seed");
  cluster->add_option("--band", cl_band, "Sakoe-Chiba band width (0 = off)");
  cluster->add_option("--out", cl_out, "output directory");

  // train
  auto* train = app.add_subcommand("train", "train per-cluster models");
  std::string tr_config, tr_out = "train_out";
  train->add_option("--config", tr_config, "config JSON")->required();
  train->add_option("--out", tr_out, "output directory");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  std::string ev_ckpt, ev_data, ev_out = "eval_out";
  int ev_at = 0;
  eval->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  eval->add_option("--data", ev_data, "series file")->required();
  eval->add_option("--out", ev_out, "output directory");
  eval->add_option("--at", ev_at, "report the first N horizon steps (default: all)");

  // predict
  auto* predict = app.add_subcommand("predict", "forecast one window");
  std::string pr_ckpt, pr_window, pr_out = "forecast.csv";
  predict->add_option("--checkpoint", pr_ckpt, "checkpoint file")->required();
  predict->add_option("--window-csv", pr_window, "H-row series CSV")->required();
  predict->add_option("--out", pr_out, "output CSV");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "train and compare ablation variants");
  std::string ab_config, ab_out = "ablate_out";
  std::vector<std::string> ab_variants;
  ablate->add_option("--config", ab_config, "config JSON")->required();
  ablate->add_option("--out", ab_out, "output directory");
  ablate->add_option("--variants", ab_variants,
                     "subset of: full no-clustering no-fbmamba no-grpo");

  // sensitivity
  auto* sens = app.add_subcommand("sensitivity", "sweep one parameter");
  std::string se_config, se_out = "sensitivity_out", se_param;
  std::vector<double> se_values;
  sens->add_option("--config", se_config, "config JSON")->required();
  sens->add_option("--out", se_out, "output directory");
  sens->add_option("--param", se_param, "k | seq_len | hidden_dim | epsilon")
      ->required();
  sens->add_option("--values", se_values, "sweep values")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_out, synth_nodes, synth_steps, synth_seed);
    if (cluster->parsed())
      return cmd_cluster(cl_data, cl_adj, cl_format, cl_k, cl_seed, cl_band, cl_out);
    if (train->parsed()) return cmd_train(tr_config, tr_out);
    if (eval->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_out, ev_at);
    if (predict->parsed()) return cmd_predict(pr_ckpt, pr_window, pr_out);
    if (ablate->parsed()) return cmd_ablate(ab_config, ab_out, ab_variants);
    if (sens->parsed()) return cmd_sensitivity(se_config, se_out, se_param, se_values);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
