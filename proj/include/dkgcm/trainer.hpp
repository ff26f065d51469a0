#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "dkgcm/dataio.hpp"
#include "dkgcm/metrics.hpp"
#include "dkgcm/model.hpp"
#include "dkgcm/simgraph.hpp"

namespace dkgcm {

struct GrpoConfig {
  bool enabled = true;
  double epsilon = 0.3;
  double tau = 0.1;
  double sigma = 1.0;   // policy std on the normalized scale
  double gamma = 0.99;  // accepted for completeness; the loss has no discounting
  int snapshot_cadence = 1;

  void validate() const {
    require(epsilon > 0.0 && epsilon < 1.0, "grpo.epsilon must lie in (0,1)");
    require(tau >= 0.0, "grpo.tau must be non-negative");
    require(sigma > 0.0, "grpo.sigma must be positive");
    require(snapshot_cadence >= 1, "grpo.snapshot_cadence must be >= 1");
  }
};

struct TrainRunConfig {
  int n_clusters = 5;
  ModelConfig model;
  std::size_t batch_size = 32;
  int epochs = 100;
  double lr = 0.001;
  std::uint64_t seed = 0;
  GrpoConfig grpo;

  std::uint64_t cluster_seed = 0;
  int kmeans_max_iter = 100;
  double kmeans_tol = 1e-4;
  int dtw_band = -1;

  void validate() const {
    require(n_clusters >= 1, "n_clusters must be positive");
    require(model.seq_len >= 1 && model.horizon >= 1, "seq_len and horizon must be positive");
    require(model.hidden_dim >= 1 && model.d_state >= 1, "hidden_dim and d_state must be positive");
    require(model.cheb_k >= 1, "cheb_k must be positive");
    require(batch_size >= 1, "batch_size must be positive");
    require(epochs >= 1, "epochs must be positive");
    require(lr > 0.0, "lr must be positive");
    grpo.validate();
  }
};

/// Split, normalization, clustering and windowing shared by train/eval/
/// ablation so every variant sees the identical data preparation.
struct PreparedData {
  SplitSeries split;
  NormStats stats;
  Matrix train_norm, val_norm, test_norm;
  SampleSet train_windows, val_windows, test_windows;
  ClusterAssignment assignment;
  std::vector<ClusterSubgraph> graphs;
};

PreparedData prepare_data(const TrafficSeries& series, const AdjacencyMatrix& adjacency,
                          const TrainRunConfig& cfg);

/// Thrown by the divergence guard when a loss stops being finite.
class TrainDivergence : public Error {
 public:
  TrainDivergence(int epoch, std::size_t batch)
      : Error("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
              ", batch " + std::to_string(batch)),
        epoch(epoch),
        batch(batch) {}
  int epoch;
  std::size_t batch;
};

namespace detail {

/// Gather a batch of windows restricted to `nodes` as a B x m x L tensor.
template <typename T>
diff::Tensor<T> gather_batch(const std::vector<Matrix>& samples,
                             const std::vector<std::size_t>& order, std::size_t first,
                             std::size_t count, const std::vector<int>& nodes) {
  const std::size_t len = samples[order[first]].rows();
  const std::size_t m = nodes.size();
  diff::Tensor<T> out(diff::Shape{count, m, len});
  for (std::size_t b = 0; b < count; ++b) {
    const Matrix& s = samples[order[first + b]];
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t t = 0; t < len; ++t)
        out[(b * m + j) * len + t] =
            static_cast<T>(s.at(t, static_cast<std::size_t>(nodes[j])));
  }
  return out;
}

/// Per-sample mean squared error of a B x m x F prediction graph node
/// against a constant target, as a length-B graph node.
template <typename T>
diff::Var<T> per_sample_mse(const diff::Var<T>& pred, const diff::Var<T>& target) {
  const auto& s = pred.value().shape();
  diff::Var<T> d = sub(pred, target);
  return mean(reshape(mul(d, d), {s[0], s[1] * s[2]}), 1);
}

/// Clipped-surrogate policy loss on the graph: advantages are constant,
/// gradients flow only through the ratio. The log-ratio is clamped to
/// +/-30 so an early wild policy cannot overflow exp().
template <typename T>
diff::Var<T> policy_loss_graph(const diff::Var<T>& mse_new,
                               const diff::Tensor<T>& mse_old,
                               const std::vector<double>& advantage, double sigma,
                               double epsilon) {
  using diff::Var;
  const std::size_t n = advantage.size();
  diff::Tensor<T> adv(diff::Shape{n});
  for (std::size_t i = 0; i < n; ++i) adv[i] = static_cast<T>(advantage[i]);
  Var<T> a = Var<T>::constant(std::move(adv));
  Var<T> scale = Var<T>::scalar(static_cast<T>(1.0 / (2.0 * sigma * sigma)));
  Var<T> expo = mul(sub(Var<T>::constant(mse_old), mse_new), scale);
  Var<T> r = diff::exp(clamp(expo, T(-30), T(30)));
  Var<T> surr = minimum(mul(r, a), mul(clamp(r, static_cast<T>(1.0 - epsilon),
                                             static_cast<T>(1.0 + epsilon)),
                                       a));
  return -mean_all(surr);
}

}  // namespace detail

/// A trained bundle: per-cluster models plus everything needed to run them
/// (assignment, subgraphs, normalization) and the training loss log.
template <typename T>
struct TrainedModel {
  TrainRunConfig cfg;
  ClusterAssignment assignment;
  std::vector<ClusterSubgraph> graphs;
  NormStats stats;
  std::vector<std::string> node_ids;
  std::vector<std::shared_ptr<diff::ParameterStore<T>>> stores;
  std::vector<ClusterModel<T>> models;
  std::vector<double> epoch_loss;

  std::map<std::string, diff::Tensor<T>> parameter_values() const {
    std::map<std::string, diff::Tensor<T>> out;
    for (const auto& store : stores)
      for (const auto& [name, p] : store->all()) out.emplace(name, p.value());
    return out;
  }
};

namespace detail {

template <typename T>
struct ClusterTrainState {
  std::shared_ptr<diff::ParameterStore<T>> store;
  std::unique_ptr<Rng> rng;
  ClusterModel<T> model;
  ClusterModel<T> old_model;
  bool has_old = false;
  std::vector<double> epoch_loss;
};

/// One optimization step. `inputs`/`targets` are B x m x {H,F}. Returns the
/// composite loss value.
template <typename T>
double train_step(ClusterTrainState<T>& st, const diff::Tensor<T>& inputs,
                  const diff::Tensor<T>& targets, const TrainRunConfig& cfg) {
  using diff::Var;
  const std::size_t batch = inputs.dim(0);
  Var<T> target = Var<T>::constant(targets);
  Var<T> pred = st.model.forward(inputs, /*train=*/true, *st.rng);
  Var<T> loss = mean_all(diff::abs(sub(pred, target)));

  if (cfg.grpo.enabled && batch >= 2) {
    // Old-policy predictions on the identical batch, dropout off.
    Var<T> old_pred = st.old_model.forward(inputs, /*train=*/false, *st.rng);
    const diff::Tensor<T>& pv = pred.value();
    const diff::Tensor<T>& ov = old_pred.value();
    const std::size_t per = pv.numel() / batch;
    std::vector<double> errs(batch, 0.0);
    diff::Tensor<T> mse_old(diff::Shape{batch});
    for (std::size_t b = 0; b < batch; ++b) {
      double abs_sum = 0.0, old_sq = 0.0;
      for (std::size_t i = 0; i < per; ++i) {
        const double e = static_cast<double>(pv[b * per + i]) -
                         static_cast<double>(targets[b * per + i]);
        abs_sum += std::abs(e);
        const double eo = static_cast<double>(ov[b * per + i]) -
                          static_cast<double>(targets[b * per + i]);
        old_sq += eo * eo;
      }
      errs[b] = abs_sum / static_cast<double>(per);
      mse_old[b] = static_cast<T>(old_sq / static_cast<double>(per));
    }
    const std::vector<double> adv = group_advantage(errs);
    Var<T> lpol = policy_loss_graph(per_sample_mse(pred, target), mse_old, adv,
                                    cfg.grpo.sigma, cfg.grpo.epsilon);
    loss = add(loss, mul(Var<T>::scalar(static_cast<T>(cfg.grpo.tau)), lpol));
  }

  const double value = static_cast<double>(loss.value().item());
  if (!std::isfinite(value)) return value;  // caller raises the guarded error
  st.store->zero_grad();
  backward(loss);
  st.store->adam_step(cfg.lr);
  return value;
}

}  // namespace detail

template <typename T>
TrainedModel<T> train_model_shared(const TrainRunConfig& cfg, const PreparedData& data,
                                   const std::vector<std::string>& node_ids);

/// Train one sub-model per cluster (independently, in parallel) on that
/// cluster's node columns. Deterministic for a fixed seed: each cluster owns
/// an RNG stream derived from (seed, cluster index). With
/// per_cluster_weights off, all clusters share one parameter set and train
/// jointly instead.
template <typename T>
TrainedModel<T> train_model(const TrainRunConfig& cfg, const PreparedData& data,
                            const std::vector<std::string>& node_ids) {
  cfg.validate();
  require(!data.train_windows.inputs.empty(), "train: no training windows");
  if (!cfg.model.per_cluster_weights) return train_model_shared<T>(cfg, data, node_ids);

  const std::size_t n_clusters = data.graphs.size();
  TrainedModel<T> out;
  out.cfg = cfg;
  out.assignment = data.assignment;
  out.graphs = data.graphs;
  out.stats = data.stats;
  out.node_ids = node_ids;
  out.stores.resize(n_clusters);
  out.models.resize(n_clusters);
  out.epoch_loss.assign(static_cast<std::size_t>(cfg.epochs), 0.0);

  std::vector<std::vector<double>> cluster_losses(n_clusters);
  std::vector<std::string> failures(n_clusters);

  parallel_for(n_clusters, [&](std::size_t c) {
    try {
      detail::ClusterTrainState<T> st;
      st.store = std::make_shared<diff::ParameterStore<T>>();
      st.rng = std::make_unique<Rng>(mix_seed(cfg.seed, c));
      const std::string prefix = "cluster" + std::to_string(c);
      diffops::ParamSource<T> src(*st.store, *st.rng);
      st.model = ClusterModel<T>::build(src, prefix, cfg.model, data.graphs[c].adjacency);

      const std::vector<int>& nodes = data.graphs[c].member_nodes;
      const std::size_t n_samples = data.train_windows.size();
      std::vector<std::size_t> order(n_samples);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::map<std::string, diff::Tensor<T>> snap;

      st.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
      for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.grpo.enabled && epoch % cfg.grpo.snapshot_cadence == 0) {
          snap = st.store->snapshot_values();
          diffops::ParamSource<T> old_src(snap);
          st.old_model =
              ClusterModel<T>::build(old_src, prefix, cfg.model, data.graphs[c].adjacency);
          st.has_old = true;
        }
        std::shuffle(order.begin(), order.end(), st.rng->engine());
        double sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t b0 = 0; b0 < n_samples; b0 += cfg.batch_size) {
          const std::size_t count = std::min(cfg.batch_size, n_samples - b0);
          auto inputs = detail::gather_batch<T>(data.train_windows.inputs, order, b0,
                                                count, nodes);
          auto targets = detail::gather_batch<T>(data.train_windows.targets, order, b0,
                                                 count, nodes);
          const double value = detail::train_step(st, inputs, targets, cfg);
          if (!std::isfinite(value)) throw TrainDivergence(epoch, batches);
          sum += value;
          ++batches;
        }
        st.epoch_loss.push_back(sum / static_cast<double>(batches));
      }
      cluster_losses[c] = std::move(st.epoch_loss);
      out.stores[c] = std::move(st.store);
      out.models[c] = std::move(st.model);
    } catch (const std::exception& e) {
      failures[c] = e.what();
    }
  });

  for (std::size_t c = 0; c < n_clusters; ++c)
    if (!failures[c].empty()) fail("cluster " + std::to_string(c) + ": " + failures[c]);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double sum = 0.0;
    for (std::size_t c = 0; c < n_clusters; ++c)
      sum += cluster_losses[c][static_cast<std::size_t>(epoch)];
    out.epoch_loss[static_cast<std::size_t>(epoch)] = sum / static_cast<double>(n_clusters);
  }
  return out;
}

/// Joint training with one shared parameter set: every batch combines all
/// clusters' errors into a single loss and one optimizer step. The GRPO
/// group is still the mini-batch, with per-sample errors pooled over all
/// clusters of that sample.
template <typename T>
TrainedModel<T> train_model_shared(const TrainRunConfig& cfg, const PreparedData& data,
                                   const std::vector<std::string>& node_ids) {
  using diff::Var;
  const std::size_t n_clusters = data.graphs.size();
  TrainedModel<T> out;
  out.cfg = cfg;
  out.assignment = data.assignment;
  out.graphs = data.graphs;
  out.stats = data.stats;
  out.node_ids = node_ids;

  auto store = std::make_shared<diff::ParameterStore<T>>();
  Rng rng(mix_seed(cfg.seed, 0));
  diffops::ParamSource<T> src(*store, rng);
  for (std::size_t c = 0; c < n_clusters; ++c)
    out.models.push_back(
        ClusterModel<T>::build(src, "shared", cfg.model, data.graphs[c].adjacency));
  out.stores.push_back(store);

  std::size_t total_per_sample = 0;  // node-step entries per sample, all clusters
  for (const auto& g : data.graphs)
    total_per_sample += g.member_nodes.size() * cfg.model.horizon;

  const std::size_t n_samples = data.train_windows.size();
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<ClusterModel<T>> old_models;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.grpo.enabled && epoch % cfg.grpo.snapshot_cadence == 0) {
      auto snap = store->snapshot_values();
      diffops::ParamSource<T> old_src(snap);
      old_models.clear();
      for (std::size_t c = 0; c < n_clusters; ++c)
        old_models.push_back(
            ClusterModel<T>::build(old_src, "shared", cfg.model, data.graphs[c].adjacency));
    }
    std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < n_samples; b0 += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n_samples - b0);
      Var<T> abs_sum;
      Var<T> sq_per_sample;  // B-vector of summed squared errors
      std::vector<double> err_abs(count, 0.0);
      std::vector<double> old_sq(count, 0.0);
      for (std::size_t c = 0; c < n_clusters; ++c) {
        const std::vector<int>& nodes = data.graphs[c].member_nodes;
        auto inputs = detail::gather_batch<T>(data.train_windows.inputs, order, b0,
                                              count, nodes);
        auto targets = detail::gather_batch<T>(data.train_windows.targets, order, b0,
                                               count, nodes);
        Var<T> target = Var<T>::constant(targets);
        Var<T> pred = out.models[c].forward(inputs, true, rng);
        Var<T> d = sub(pred, target);
        Var<T> part_abs = sum_all(diff::abs(d));
        Var<T> part_sq =
            sum(reshape(mul(d, d), {count, nodes.size() * cfg.model.horizon}), 1);
        abs_sum = abs_sum.defined() ? add(abs_sum, part_abs) : part_abs;
        sq_per_sample = sq_per_sample.defined() ? add(sq_per_sample, part_sq) : part_sq;

        const auto& pv = pred.value();
        const std::size_t per = nodes.size() * cfg.model.horizon;
        for (std::size_t b = 0; b < count; ++b)
          for (std::size_t i = 0; i < per; ++i)
            err_abs[b] += std::abs(static_cast<double>(pv[b * per + i]) -
                                   static_cast<double>(targets[b * per + i]));
        if (cfg.grpo.enabled && count >= 2) {
          const auto ov = old_models[c].forward(inputs, false, rng).value();
          for (std::size_t b = 0; b < count; ++b)
            for (std::size_t i = 0; i < per; ++i) {
              const double eo = static_cast<double>(ov[b * per + i]) -
                                static_cast<double>(targets[b * per + i]);
              old_sq[b] += eo * eo;
            }
        }
      }
      const T inv_total =
          static_cast<T>(1.0 / static_cast<double>(count * total_per_sample));
      Var<T> loss = mul(abs_sum, Var<T>::scalar(inv_total));
      if (cfg.grpo.enabled && count >= 2) {
        std::vector<double> errs(count);
        diff::Tensor<T> mse_old(diff::Shape{count});
        for (std::size_t b = 0; b < count; ++b) {
          errs[b] = err_abs[b] / static_cast<double>(total_per_sample);
          mse_old[b] = static_cast<T>(old_sq[b] / static_cast<double>(total_per_sample));
        }
        Var<T> mse_new = mul(sq_per_sample,
                             Var<T>::scalar(static_cast<T>(1.0 / total_per_sample)));
        Var<T> lpol = detail::policy_loss_graph(mse_new, mse_old, group_advantage(errs),
                                                cfg.grpo.sigma, cfg.grpo.epsilon);
        loss = add(loss, mul(Var<T>::scalar(static_cast<T>(cfg.grpo.tau)), lpol));
      }
      const double value = static_cast<double>(loss.value().item());
      if (!std::isfinite(value)) throw TrainDivergence(epoch, batches);
      store->zero_grad();
      backward(loss);
      store->adam_step(cfg.lr);
      epoch_sum += value;
      ++batches;
    }
    out.epoch_loss.push_back(epoch_sum / static_cast<double>(batches));
  }
  return out;
}

/// Rebuild runnable models from checkpointed parameter values (constants;
/// no further training).
template <typename T>
std::vector<ClusterModel<T>> models_from_values(
    const TrainRunConfig& cfg, const std::vector<ClusterSubgraph>& graphs,
    const std::map<std::string, diff::Tensor<T>>& values) {
  std::vector<ClusterModel<T>> models;
  diffops::ParamSource<T> src(values);
  for (std::size_t c = 0; c < graphs.size(); ++c) {
    const std::string prefix =
        cfg.model.per_cluster_weights ? "cluster" + std::to_string(c) : "shared";
    models.push_back(ClusterModel<T>::build(src, prefix, cfg.model, graphs[c].adjacency));
  }
  return models;
}

/// Per-cluster and pooled flow-scale metrics over a normalized window set.
/// `per_horizon[h-1]` pools the first h steps; `pooled` covers all of them.
template <typename T>
MetricsReport evaluate_model(const std::vector<ClusterModel<T>>& models,
                             const std::vector<ClusterSubgraph>& graphs,
                             const NormStats& stats, const SampleSet& windows,
                             std::size_t batch_size = 32) {
  require(models.size() == graphs.size(), "evaluate: model/graph count mismatch");
  require(windows.size() > 0, "evaluate: empty window set");
  const std::size_t horizon = windows.horizon;
  MetricsReport report;
  report.samples = windows.size();
  std::vector<ErrorAccumulator> step_acc(horizon);
  Rng rng(0);  // never consumed: eval forward has dropout off

  for (std::size_t c = 0; c < models.size(); ++c) {
    const std::vector<int>& nodes = graphs[c].member_nodes;
    ErrorAccumulator cluster_acc;
    const std::size_t n_samples = windows.size();
    if (n_samples == 0) continue;  // cluster reported as absent, not zero
    std::vector<std::size_t> order(n_samples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t b0 = 0; b0 < n_samples; b0 += batch_size) {
      const std::size_t count = std::min(batch_size, n_samples - b0);
      auto inputs = detail::gather_batch<T>(windows.inputs, order, b0, count, nodes);
      auto targets = detail::gather_batch<T>(windows.targets, order, b0, count, nodes);
      const diff::Tensor<T> pred =
          models[c].forward(inputs, /*train=*/false, rng).value();
      const std::size_t m = nodes.size();
      for (std::size_t b = 0; b < count; ++b)
        for (std::size_t j = 0; j < m; ++j) {
          const double sd = stats.stddev[static_cast<std::size_t>(nodes[j])];
          for (std::size_t h = 0; h < horizon; ++h) {
            // De-normalize both sides: the shared mean cancels in the error.
            const double e = (static_cast<double>(pred[(b * m + j) * horizon + h]) -
                              static_cast<double>(targets[(b * m + j) * horizon + h])) *
                             sd;
            step_acc[h].add(e);
            cluster_acc.add(e);
          }
        }
    }
    if (cluster_acc.n > 0)
      report.per_cluster.push_back(
          {static_cast<int>(c), nodes.size(), cluster_acc.finalize()});
  }

  ErrorAccumulator running;
  for (std::size_t h = 0; h < horizon; ++h) {
    running.merge(step_acc[h]);
    report.per_horizon.push_back(running.finalize());
  }
  report.pooled = report.per_horizon.back();
  return report;
}

/// Forecast one window: flow-scale H x N in, de-normalized F x N out.
template <typename T>
Matrix predict_window(const std::vector<ClusterModel<T>>& models,
                      const std::vector<ClusterSubgraph>& graphs,
                      const NormStats& stats, const Matrix& window,
                      std::size_t horizon) {
  require(window.cols() == stats.mean.size(),
          "predict: window has " + std::to_string(window.cols()) +
              " nodes, model expects " + std::to_string(stats.mean.size()));
  const Matrix norm = zscore_apply(window, stats);
  Matrix out(horizon, window.cols());
  Rng rng(0);
  for (std::size_t c = 0; c < models.size(); ++c) {
    const std::vector<int>& nodes = graphs[c].member_nodes;
    const std::size_t m = nodes.size();
    diff::Tensor<T> input(diff::Shape{1, m, window.rows()});
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t t = 0; t < window.rows(); ++t)
        input[j * window.rows() + t] =
            static_cast<T>(norm.at(t, static_cast<std::size_t>(nodes[j])));
    const diff::Tensor<T> pred = models[c].forward(input, false, rng).value();
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t col = static_cast<std::size_t>(nodes[j]);
      for (std::size_t h = 0; h < horizon; ++h)
        out.at(h, col) = static_cast<double>(pred[j * horizon + h]) * stats.stddev[col] +
                         stats.mean[col];
    }
  }
  return out;
}

}  // namespace dkgcm
