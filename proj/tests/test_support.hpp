#pragma once

// Shared test oracles, deliberately independent of the library's
// implementation paths: exhaustive DTW path enumeration, a Jacobi
// eigensolver, brute-force bipartition clustering, and the adjusted Rand
// index.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dkgcm/matrix.hpp"

namespace testsupport {

/// Minimum alignment cost over every monotone path from (0,0) to the
/// corner, enumerated explicitly with steps right/down/diagonal.
inline double dtw_bruteforce(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t ra = a.size(), rb = b.size();
  double best = std::numeric_limits<double>::infinity();
  // Depth-first walk over complete paths; cost accumulates along the way.
  struct Frame {
    std::size_t i, j;
    double cost;
  };
  std::vector<Frame> stack;
  stack.push_back({0, 0, std::abs(a[0] - b[0])});
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    if (f.i == ra - 1 && f.j == rb - 1) {
      best = std::min(best, f.cost);
      continue;
    }
    if (f.i + 1 < ra)
      stack.push_back({f.i + 1, f.j, f.cost + std::abs(a[f.i + 1] - b[f.j])});
    if (f.j + 1 < rb)
      stack.push_back({f.i, f.j + 1, f.cost + std::abs(a[f.i] - b[f.j + 1])});
    if (f.i + 1 < ra && f.j + 1 < rb)
      stack.push_back({f.i + 1, f.j + 1, f.cost + std::abs(a[f.i + 1] - b[f.j + 1])});
  }
  return best;
}

/// Jacobi rotations for symmetric matrices; returns eigenvalues ascending
/// and fills `vectors` with orthonormal columns when requested.
inline std::vector<double> jacobi_eigen(dkgcm::Matrix m,
                                        dkgcm::Matrix* vectors = nullptr) {
  const std::size_t n = m.rows();
  dkgcm::Matrix v = dkgcm::Matrix::identity(n);
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += m.at(i, j) * m.at(i, j);
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(m.at(p, q)) < 1e-18) continue;
        const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * m.at(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m.at(k, p), mkq = m.at(k, q);
          m.at(k, p) = c * mkp - s * mkq;
          m.at(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m.at(p, k), mqk = m.at(q, k);
          m.at(p, k) = c * mpk - s * mqk;
          m.at(q, k) = s * mpk + c * mqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return m.at(a, a) < m.at(b, b); });
  std::vector<double> eig(n);
  dkgcm::Matrix sorted_v(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    eig[i] = m.at(idx[i], idx[i]);
    for (std::size_t k = 0; k < n; ++k) sorted_v.at(k, i) = v.at(k, idx[i]);
  }
  if (vectors) *vectors = sorted_v;
  return eig;
}

/// Best inertia over all 2^(n-1) bipartitions of the rows (both sides
/// non-empty), with the minimizing labels.
inline double best_bipartition(const dkgcm::Matrix& features, std::vector<int>* labels) {
  const std::size_t n = features.rows(), d = features.cols();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << n); ++mask) {
    std::vector<double> mean0(d, 0.0), mean1(d, 0.0);
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool side = (mask >> i) & 1;
      auto& mean = side ? mean1 : mean0;
      (side ? n1 : n0)++;
      for (std::size_t j = 0; j < d; ++j) mean[j] += features.at(i, j);
    }
    for (std::size_t j = 0; j < d; ++j) {
      mean0[j] /= static_cast<double>(n0);
      mean1[j] /= static_cast<double>(n1);
    }
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& mean = ((mask >> i) & 1) ? mean1 : mean0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = features.at(i, j) - mean[j];
        inertia += diff * diff;
      }
    }
    if (inertia < best) {
      best = inertia;
      if (labels) {
        labels->assign(n, 0);
        for (std::size_t i = 0; i < n; ++i) (*labels)[i] = (mask >> i) & 1;
      }
    }
  }
  return best;
}

/// Adjusted Rand index between two labelings.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  const int ka = *std::max_element(a.begin(), a.end()) + 1;
  const int kb = *std::max_element(b.begin(), b.end()) + 1;
  std::vector<std::vector<long>> table(static_cast<std::size_t>(ka),
                                       std::vector<long>(static_cast<std::size_t>(kb), 0));
  for (std::size_t i = 0; i < n; ++i)
    ++table[static_cast<std::size_t>(a[i])][static_cast<std::size_t>(b[i])];
  auto choose2 = [](long m) { return static_cast<double>(m) * (m - 1) / 2.0; };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (int i = 0; i < ka; ++i) {
    long row = 0;
    for (int j = 0; j < kb; ++j) {
      sum_ij += choose2(table[i][j]);
      row += table[i][j];
    }
    sum_a += choose2(row);
  }
  for (int j = 0; j < kb; ++j) {
    long col = 0;
    for (int i = 0; i < ka; ++i) col += table[i][j];
    sum_b += choose2(col);
  }
  const double total = choose2(static_cast<long>(n));
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

}  // namespace testsupport
