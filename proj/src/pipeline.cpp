#include "dkgcm/trainer.hpp"

namespace dkgcm {

PreparedData prepare_data(const TrafficSeries& series, const AdjacencyMatrix& adjacency,
                          const TrainRunConfig& cfg) {
  require(adjacency.weights.rows() == series.nodes(),
          "adjacency node count " + std::to_string(adjacency.weights.rows()) +
              " does not match series node count " + std::to_string(series.nodes()));
  PreparedData d;
  d.split = split_chronological(series);
  d.stats = zscore_fit(d.split.train);
  d.train_norm = zscore_apply(d.split.train.values, d.stats);
  d.val_norm = zscore_apply(d.split.val.values, d.stats);
  d.test_norm = zscore_apply(d.split.test.values, d.stats);
  d.train_windows = make_windows(d.train_norm, cfg.model.seq_len, cfg.model.horizon);
  d.val_windows = make_windows(d.val_norm, cfg.model.seq_len, cfg.model.horizon);
  d.test_windows = make_windows(d.test_norm, cfg.model.seq_len, cfg.model.horizon);
  // Similarity clustering runs on the normalized training partition only.
  d.assignment = cluster_nodes(d.train_norm, cfg.n_clusters, cfg.cluster_seed,
                               cfg.kmeans_max_iter, cfg.kmeans_tol, cfg.dtw_band);
  d.graphs = build_cluster_subgraphs(adjacency.weights, d.assignment);
  return d;
}

}  // namespace dkgcm
