#include "dkgcm/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace dkgcm {

MetricPair ErrorAccumulator::finalize() const {
  require(n > 0, "metrics: empty selection");
  MetricPair m;
  m.count = n;
  m.mae = abs_sum / static_cast<double>(n);
  m.rmse = std::sqrt(sq_sum / static_cast<double>(n));
  return m;
}

MetricPair compute_metrics(const std::vector<Matrix>& pred,
                           const std::vector<Matrix>& truth,
                           const std::vector<int>* node_subset) {
  require(pred.size() == truth.size(), "compute_metrics: sample count mismatch");
  ErrorAccumulator acc;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const Matrix& p = pred[s];
    const Matrix& t = truth[s];
    require(p.rows() == t.rows() && p.cols() == t.cols(),
            "compute_metrics: shape mismatch at sample " + std::to_string(s));
    if (node_subset) {
      for (std::size_t r = 0; r < p.rows(); ++r)
        for (int c : *node_subset)
          acc.add(p.at(r, static_cast<std::size_t>(c)) -
                  t.at(r, static_cast<std::size_t>(c)));
    } else {
      for (std::size_t i = 0; i < p.data().size(); ++i)
        acc.add(p.data()[i] - t.data()[i]);
    }
  }
  return acc.finalize();
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["samples"] = samples;
  j["pooled"] = {{"mae", pooled.mae}, {"rmse", pooled.rmse}, {"count", pooled.count}};
  nlohmann::json hz = nlohmann::json::array();
  for (std::size_t h = 0; h < per_horizon.size(); ++h)
    hz.push_back({{"horizon", h + 1},
                  {"mae", per_horizon[h].mae},
                  {"rmse", per_horizon[h].rmse},
                  {"count", per_horizon[h].count}});
  j["per_horizon"] = hz;
  nlohmann::json pc = nlohmann::json::array();
  for (const auto& c : per_cluster)
    pc.push_back({{"cluster", c.cluster},
                  {"nodes", c.node_count},
                  {"mae", c.metrics.mae},
                  {"rmse", c.metrics.rmse},
                  {"count", c.metrics.count}});
  j["per_cluster"] = pc;
  return j;
}

std::vector<double> group_advantage(const std::vector<double>& batch_errors) {
  require(batch_errors.size() >= 2, "group_advantage: batch size must be >= 2");
  const double n = static_cast<double>(batch_errors.size());
  double mean = 0.0;
  for (double e : batch_errors) mean += e;
  mean /= n;
  double var = 0.0;
  for (double e : batch_errors) var += (e - mean) * (e - mean);
  var /= n;  // population
  const double denom = std::sqrt(var) + 1e-8;
  std::vector<double> adv(batch_errors.size());
  for (std::size_t i = 0; i < adv.size(); ++i)
    adv[i] = (mean - batch_errors[i]) / denom;
  return adv;
}

std::vector<double> policy_ratio(const std::vector<Matrix>& pred_new,
                                 const std::vector<Matrix>& pred_old,
                                 const std::vector<Matrix>& target, double sigma) {
  require(sigma > 0.0, "policy_ratio: sigma must be positive");
  require(pred_new.size() == pred_old.size() && pred_new.size() == target.size(),
          "policy_ratio: sample count mismatch");
  std::vector<double> ratio(pred_new.size());
  for (std::size_t s = 0; s < pred_new.size(); ++s) {
    const auto& pn = pred_new[s].data();
    const auto& po = pred_old[s].data();
    const auto& tg = target[s].data();
    require(pn.size() == po.size() && pn.size() == tg.size(),
            "policy_ratio: shape mismatch at sample " + std::to_string(s));
    double mse_new = 0.0, mse_old = 0.0;
    for (std::size_t i = 0; i < pn.size(); ++i) {
      mse_new += (pn[i] - tg[i]) * (pn[i] - tg[i]);
      mse_old += (po[i] - tg[i]) * (po[i] - tg[i]);
    }
    const double n = static_cast<double>(pn.size());
    ratio[s] = std::exp((mse_old / n - mse_new / n) / (2.0 * sigma * sigma));
  }
  return ratio;
}

double grpo_loss(double mae, const std::vector<double>& ratio,
                 const std::vector<double>& advantage, double epsilon, double tau) {
  require(epsilon > 0.0 && epsilon < 1.0, "grpo_loss: epsilon must lie in (0,1)");
  require(ratio.size() == advantage.size(), "grpo_loss: length mismatch");
  double surrogate = 0.0;
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    const double clipped = std::clamp(ratio[i], 1.0 - epsilon, 1.0 + epsilon);
    surrogate += std::min(ratio[i] * advantage[i], clipped * advantage[i]);
  }
  surrogate /= static_cast<double>(ratio.size());
  return mae - tau * surrogate;
}

}  // namespace dkgcm
