#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dkgcm/matrix.hpp"

namespace dkgcm {

/// K-means result over node feature vectors. Every label in [0,K) occurs at
/// least once; inertia is the summed squared distance to assigned centers.
struct ClusterAssignment {
  std::vector<int> labels;
  Matrix centers;  // K x d
  double inertia = 0.0;
  int k = 0;
  std::uint64_t seed = 0;
};

/// Restriction of the physical adjacency to one cluster's nodes.
struct ClusterSubgraph {
  std::vector<int> member_nodes;  // strictly increasing global indices
  Matrix adjacency;               // m x m
};

/// DTW distance between two sequences with cost |a_i - b_j| and the
/// standard three-way cumulative recurrence. `band` >= 0 enables a
/// Sakoe-Chiba constraint |i - j| <= band; -1 means unconstrained.
double dtw_distance(std::span<const double> a, std::span<const double> b,
                    int band = -1);

/// Pairwise DTW over the columns of a T x N series matrix. The upper
/// triangle is computed in parallel over node pairs, then mirrored.
Matrix dtw_matrix(const Matrix& series, int band = -1);

ClusterAssignment kmeans_cluster(const Matrix& features, int k, std::uint64_t seed,
                                 int max_iter = 100, double tol = 1e-4);

/// Cluster nodes by temporal similarity: each node's feature vector is its
/// row of the DTW distance matrix, fed to k-means.
ClusterAssignment cluster_nodes(const Matrix& series, int k, std::uint64_t seed,
                                int max_iter = 100, double tol = 1e-4,
                                int band = -1);

std::vector<ClusterSubgraph> build_cluster_subgraphs(const Matrix& adjacency,
                                                     const ClusterAssignment& assignment);

/// Column-cosine similarity; zero-norm columns give 0 off-diagonal, 1 on it.
Matrix cosine_similarity_matrix(const Matrix& series);

}  // namespace dkgcm
