#pragma once

#include <string>
#include <vector>

#include "dkgcm/fbmamba.hpp"
#include "dkgcm/gcn.hpp"

namespace dkgcm {

/// Architecture knobs shared by every cluster sub-model.
struct ModelConfig {
  std::size_t seq_len = 12;
  std::size_t horizon = 12;
  std::size_t hidden_dim = 64;
  std::size_t d_state = 16;
  GcnMode gcn_mode = GcnMode::FirstOrder;
  int cheb_k = 3;
  diffops::ScanAxis scan_axis = diffops::ScanAxis::Embedding;
  double dropout = 0.1;
  bool per_cluster_weights = true;
  bool use_fbmamba = true;  // false: temporal stack replaced by a linear map
};

/// One cluster's sub-model: spatial convolution on the cluster subgraph,
/// then the temporal stack over that cluster's node columns.
template <typename T>
struct ClusterModel {
  ModelConfig cfg;
  std::size_t m = 0;  // member count

  // Spatial operator constants for this cluster.
  diff::Var<T> a_hat;
  std::vector<diff::Var<T>> basis;

  // Spatial weights.
  diff::Var<T> gcn_w;                // first-order
  std::vector<diff::Var<T>> theta;   // chebyshev

  // Temporal stack.
  diffops::FftEmbedParams<T> embed;
  diffops::MambaDirParams<T> fwd, bwd;
  diffops::OutputHeadParams<T> head;

  // Linear replacement for the temporal stack (ablation variant).
  diff::Var<T> lin_w, lin_b;

  static ClusterModel build(const diffops::ParamSource<T>& src,
                            const std::string& prefix, const ModelConfig& cfg,
                            const Matrix& sub_adjacency) {
    require(cfg.per_cluster_weights || cfg.scan_axis == diffops::ScanAxis::Node,
            "shared cluster weights require scan_axis = node (the embedding "
            "axis ties channel width to the cluster size)");
    ClusterModel model;
    model.cfg = cfg;
    model.m = sub_adjacency.rows();
    const std::size_t h = cfg.seq_len;

    NormalizedOperator op = normalized_laplacian(sub_adjacency);
    auto to_tensor = [](const Matrix& mat) {
      diff::Tensor<T> t(diff::Shape{mat.rows(), mat.cols()});
      for (std::size_t i = 0; i < t.numel(); ++i)
        t[i] = static_cast<T>(mat.data()[i]);
      return t;
    };

    if (cfg.gcn_mode == GcnMode::FirstOrder) {
      model.a_hat = diff::Var<T>::constant(to_tensor(op.a_hat));
      model.gcn_w = src.get(prefix + "/gcn/w", [&src, h]() {
        return diffops::uniform_init<T>({h, h}, 1.0 / std::sqrt(static_cast<double>(h)),
                                        src.rng());
      });
    } else {
      for (const Matrix& tk : cheb_basis(op.l_scaled, cfg.cheb_k))
        model.basis.push_back(diff::Var<T>::constant(to_tensor(tk)));
      const double bound =
          1.0 / std::sqrt(static_cast<double>(h * static_cast<std::size_t>(cfg.cheb_k)));
      for (int k = 0; k < cfg.cheb_k; ++k)
        model.theta.push_back(src.get(prefix + "/gcn/theta" + std::to_string(k),
                                      [&src, h, bound]() {
                                        return diffops::uniform_init<T>({h, h}, bound,
                                                                        src.rng());
                                      }));
    }

    if (cfg.use_fbmamba) {
      model.embed = diffops::FftEmbedParams<T>::build(src, prefix + "/embed", h,
                                                      cfg.hidden_dim, cfg.dropout);
      const std::size_t d_inner =
          cfg.scan_axis == diffops::ScanAxis::Embedding ? model.m : cfg.hidden_dim;
      model.fwd = diffops::MambaDirParams<T>::build(src, prefix + "/mamba_fwd",
                                                    d_inner, cfg.d_state);
      model.bwd = diffops::MambaDirParams<T>::build(src, prefix + "/mamba_bwd",
                                                    d_inner, cfg.d_state);
      model.head = diffops::OutputHeadParams<T>::build(src, prefix + "/head",
                                                       cfg.hidden_dim, cfg.horizon);
    } else {
      const double bound = 1.0 / std::sqrt(static_cast<double>(h));
      model.lin_w = src.get(prefix + "/linear/w", [&src, &cfg, h, bound]() {
        return diffops::uniform_init<T>({h, cfg.horizon}, bound, src.rng());
      });
      model.lin_b = src.get(prefix + "/linear/b", [&src, &cfg, bound]() {
        return diffops::uniform_init<T>({cfg.horizon}, bound, src.rng());
      });
    }
    return model;
  }

  /// window: B x m x H (node-major, normalized scale) -> B x m x F.
  diff::Var<T> forward(const diff::Tensor<T>& window, bool train, Rng& rng) const {
    require(window.rank() == 3 && window.dim(1) == m && window.dim(2) == cfg.seq_len,
            "ClusterModel::forward: expected B x " + std::to_string(m) + " x " +
                std::to_string(cfg.seq_len) + " input, got " +
                diff::shape_str(window.shape()));
    diff::Var<T> x = diff::Var<T>::constant(window);
    diff::Var<T> g = cfg.gcn_mode == GcnMode::FirstOrder
                         ? diffops::gcn_layer(x, a_hat, gcn_w)
                         : diffops::cheb_gconv(x, basis, theta);
    if (!cfg.use_fbmamba) return linear(g, lin_w, lin_b);
    diff::Var<T> z = diffops::fft_embed(g, embed, train, rng);
    diff::Var<T> y = diffops::bidirectional_mamba(z, fwd, bwd, cfg.scan_axis);
    return diffops::output_head(y, head);
  }
};

}  // namespace dkgcm
