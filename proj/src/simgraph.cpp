#include "dkgcm/simgraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dkgcm {

double dtw_distance(std::span<const double> a, std::span<const double> b, int band) {
  require(!a.empty() && !b.empty(), "dtw_distance: empty sequence");
  const std::size_t ta = a.size(), tb = b.size();
  if (band >= 0)
    require(static_cast<std::size_t>(band) + 1 >= (ta > tb ? ta - tb : tb - ta),
            "dtw_distance: band " + std::to_string(band) +
                " leaves no feasible alignment for lengths " + std::to_string(ta) +
                " and " + std::to_string(tb));
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Two rolling rows of the cumulative matrix M.
  std::vector<double> prev(tb, kInf), cur(tb, kInf);
  for (std::size_t i = 0; i < ta; ++i) {
    std::fill(cur.begin(), cur.end(), kInf);
    std::size_t j0 = 0, j1 = tb;
    if (band >= 0) {
      const std::size_t w = static_cast<std::size_t>(band);
      j0 = i > w ? i - w : 0;
      j1 = std::min(tb, i + w + 1);
    }
    for (std::size_t j = j0; j < j1; ++j) {
      const double d = std::abs(a[i] - b[j]);
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else if (i == 0) {
        best = cur[j - 1];
      } else if (j == 0) {
        best = prev[0];
      } else {
        best = std::min({prev[j], prev[j - 1], cur[j - 1]});
      }
      cur[j] = d + best;
    }
    std::swap(prev, cur);
  }
  const double result = prev[tb - 1];
  require(std::isfinite(result), "dtw_distance: no feasible alignment within band");
  return result;
}

Matrix dtw_matrix(const Matrix& series, int band) {
  const std::size_t n = series.cols();
  require(series.rows() >= 1, "dtw_matrix: empty series");
  std::vector<std::vector<double>> columns(n);
  for (std::size_t c = 0; c < n; ++c) columns[c] = series.column(c);

  // Enumerate unordered pairs once; each task writes a distinct cell, the
  // mirror pass runs after all pairs are done.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

  Matrix dist(n, n);
  parallel_for(pairs.size(), [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    dist.at(i, j) = dtw_distance(columns[i], columns[j], band);
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist.at(j, i) = dist.at(i, j);
  return dist;
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center.
Matrix seed_centers(const Matrix& features, int k, Rng& rng) {
  const std::size_t n = features.rows(), d = features.cols();
  Matrix centers(static_cast<std::size_t>(k), d);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.index(n);
  std::copy_n(features.row(first), d, centers.row(0));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i],
                            sq_dist(features.row(i), centers.row(c - 1), d));
      total += nearest[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = rng.uniform(0.0, total);
      for (; pick + 1 < n; ++pick) {
        r -= nearest[pick];
        if (r <= 0.0) break;
      }
    } else {
      pick = rng.index(n);  // all points coincide with current centers
    }
    std::copy_n(features.row(pick), d, centers.row(static_cast<std::size_t>(c)));
  }
  return centers;
}

}  // namespace

ClusterAssignment kmeans_cluster(const Matrix& features, int k, std::uint64_t seed,
                                 int max_iter, double tol) {
  const std::size_t n = features.rows(), d = features.cols();
  require(k >= 1, "kmeans: K must be positive");
  require(static_cast<std::size_t>(k) <= n,
          "kmeans: K = " + std::to_string(k) + " exceeds point count " +
              std::to_string(n));
  for (double v : features.data())
    require(std::isfinite(v), "kmeans: non-finite feature value");

  Rng rng(seed);
  Matrix centers = seed_centers(features, k, rng);
  std::vector<int> labels(n, -1);
  std::vector<std::size_t> counts(static_cast<std::size_t>(k));

  auto assign = [&]() {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int besti = 0;
      for (int c = 0; c < k; ++c) {
        const double dd = sq_dist(features.row(i), centers.row(static_cast<std::size_t>(c)), d);
        if (dd < best) {  // strict: ties keep the lowest cluster index
          best = dd;
          besti = c;
        }
      }
      if (labels[i] != besti) {
        labels[i] = besti;
        changed = true;
      }
    }
    return changed;
  };

  // Move the point farthest from its center into each empty cluster, making
  // it a singleton center. Only points from clusters of size > 1 move.
  auto repair = [&]() {
    std::fill(counts.begin(), counts.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(labels[i])];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      std::size_t far = 0;
      double fard = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(labels[i])] <= 1) continue;
        const double dd = sq_dist(features.row(i),
                                  centers.row(static_cast<std::size_t>(labels[i])), d);
        if (dd > fard) {
          fard = dd;
          far = i;
        }
      }
      --counts[static_cast<std::size_t>(labels[far])];
      labels[far] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      std::copy_n(features.row(far), d, centers.row(static_cast<std::size_t>(c)));
    }
  };

  assign();
  repair();
  for (int iter = 0; iter < max_iter; ++iter) {
    // Mean update over the repaired assignment (all counts >= 1 here).
    Matrix next(static_cast<std::size_t>(k), d);
    for (std::size_t i = 0; i < n; ++i) {
      double* row = next.row(static_cast<std::size_t>(labels[i]));
      const double* f = features.row(i);
      for (std::size_t j = 0; j < d; ++j) row[j] += f[j];
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      double* row = next.row(static_cast<std::size_t>(c));
      const double cnt = static_cast<double>(counts[static_cast<std::size_t>(c)]);
      for (std::size_t j = 0; j < d; ++j) row[j] /= cnt;
      shift = std::max(shift, std::sqrt(sq_dist(centers.row(static_cast<std::size_t>(c)),
                                                row, d)));
    }
    centers = std::move(next);
    const bool changed = assign();
    repair();
    if (!changed || shift < tol) break;
  }

  ClusterAssignment out;
  out.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    out.inertia += sq_dist(features.row(i),
                           centers.row(static_cast<std::size_t>(labels[i])), d);
  out.labels = std::move(labels);
  out.centers = std::move(centers);
  out.k = k;
  out.seed = seed;
  return out;
}

ClusterAssignment cluster_nodes(const Matrix& series, int k, std::uint64_t seed,
                                int max_iter, double tol, int band) {
  Matrix dtw = dtw_matrix(series, band);
  return kmeans_cluster(dtw, k, seed, max_iter, tol);
}

std::vector<ClusterSubgraph> build_cluster_subgraphs(const Matrix& adjacency,
                                                     const ClusterAssignment& assignment) {
  const std::size_t n = adjacency.rows();
  require(adjacency.cols() == n, "build_cluster_subgraphs: adjacency not square");
  require(assignment.labels.size() == n,
          "build_cluster_subgraphs: label count does not match adjacency");
  std::vector<ClusterSubgraph> out(static_cast<std::size_t>(assignment.k));
  for (std::size_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(assignment.labels[i])].member_nodes.push_back(
        static_cast<int>(i));
  for (auto& sub : out) {
    const std::size_t m = sub.member_nodes.size();
    sub.adjacency = Matrix(m, m);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b)
        sub.adjacency.at(a, b) = adjacency.at(static_cast<std::size_t>(sub.member_nodes[a]),
                                              static_cast<std::size_t>(sub.member_nodes[b]));
  }
  return out;
}

Matrix cosine_similarity_matrix(const Matrix& series) {
  const std::size_t t = series.rows(), n = series.cols();
  std::vector<double> norms(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < t; ++r) s += series.at(r, c) * series.at(r, c);
    norms[c] = std::sqrt(s);
  }
  Matrix sim(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    sim.at(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t r = 0; r < t; ++r) dot += series.at(r, i) * series.at(r, j);
      const double denom = norms[i] * norms[j];
      const double v = denom > 0.0 ? dot / denom : 0.0;
      sim.at(i, j) = v;
      sim.at(j, i) = v;
    }
  }
  return sim;
}

}  // namespace dkgcm
