#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dkgcm/matrix.hpp"

#include <json.hpp>

namespace dkgcm {

struct MetricPair {
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t count = 0;
};

/// Streaming |e| and e^2 sums; finalize() yields MAE/RMSE over everything
/// added so far.
struct ErrorAccumulator {
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  std::size_t n = 0;

  void add(double err) {
    abs_sum += std::abs(err);
    sq_sum += err * err;
    ++n;
  }
  void merge(const ErrorAccumulator& other) {
    abs_sum += other.abs_sum;
    sq_sum += other.sq_sum;
    n += other.n;
  }
  MetricPair finalize() const;
};

/// MAE/RMSE over all node-step-sample entries of equally shaped matrices,
/// optionally restricted to a column subset. Values must be on flow scale.
MetricPair compute_metrics(const std::vector<Matrix>& pred,
                           const std::vector<Matrix>& truth,
                           const std::vector<int>* node_subset = nullptr);

struct ClusterMetrics {
  int cluster = 0;
  std::size_t node_count = 0;
  MetricPair metrics;
};

/// Pooled and per-cluster errors. per_horizon[h-1] covers the first h
/// prediction steps pooled over all nodes; pooled equals the last entry.
struct MetricsReport {
  std::vector<MetricPair> per_horizon;
  std::vector<ClusterMetrics> per_cluster;
  MetricPair pooled;
  std::size_t samples = 0;

  nlohmann::json to_json() const;
};

// ---- GRPO arithmetic (reference math; the training loop mirrors these
// through the autodiff graph where gradients are needed) ----------------

/// Group-relative advantages: (mean - err) / (population std + 1e-8).
/// Lower error means positive advantage; the result is mean-centered.
std::vector<double> group_advantage(const std::vector<double>& batch_errors);

/// Gaussian-policy ratio per sample from per-element mean log densities:
/// r = exp((mse_old - mse_new) / (2 sigma^2)), mse taken per sample.
std::vector<double> policy_ratio(const std::vector<Matrix>& pred_new,
                                 const std::vector<Matrix>& pred_old,
                                 const std::vector<Matrix>& target, double sigma);

/// Clipped-surrogate composite: mae - tau * E[min(r A, clip(r, 1-eps, 1+eps) A)].
double grpo_loss(double mae, const std::vector<double>& ratio,
                 const std::vector<double>& advantage, double epsilon, double tau);

}  // namespace dkgcm
