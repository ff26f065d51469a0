#pragma once

#include <array>
#include <string>
#include <vector>

#include "dkgcm/matrix.hpp"

namespace dkgcm {

/// Raw flow matrix: one row per interval, one column per sensor node.
struct TrafficSeries {
  Matrix values;  // T x N
  std::vector<std::string> node_ids;
  long interval_seconds = 300;
  std::string start_timestamp;

  std::size_t steps() const { return values.rows(); }
  std::size_t nodes() const { return values.cols(); }
};

/// Symmetric non-negative weights over the same node order as the series.
struct AdjacencyMatrix {
  Matrix weights;  // N x N, zero diagonal
  std::vector<std::string> node_ids;
};

/// Per-node z-score statistics fitted on the training partition only.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // zero-variance nodes fall back to 1
};

/// Supervised windows cut from one partition with stride 1.
struct SampleSet {
  std::vector<Matrix> inputs;   // each H x N
  std::vector<Matrix> targets;  // each F x N
  std::vector<std::size_t> origin_indices;
  std::size_t seq_len = 0;
  std::size_t horizon = 0;

  std::size_t size() const { return inputs.size(); }
};

enum class SeriesFormat { Csv, RawF32 };
enum class MissingPolicy { Reject, ForwardFill };

SeriesFormat parse_series_format(const std::string& name);

/// Load a series from `timestamp,node,...` CSV or from the raw float32
/// binary + JSON sidecar format (sidecar at path + ".json").
TrafficSeries load_series(const std::string& path, SeriesFormat format,
                          MissingPolicy missing = MissingPolicy::Reject);

void save_series_csv(const std::string& path, const TrafficSeries& series);
void save_series_raw_f32(const std::string& path, const TrafficSeries& series);

/// Load `from,to,weight` edges and apply the symmetric closure. Node names
/// must come from `node_ids`; self-loops are dropped (the diagonal stays
/// zero until self-loop augmentation happens in the graph operators).
AdjacencyMatrix load_adjacency(const std::string& path,
                               const std::vector<std::string>& node_ids);
void save_adjacency_csv(const std::string& path, const AdjacencyMatrix& adj);

NormStats zscore_fit(const TrafficSeries& train);
Matrix zscore_apply(const Matrix& values, const NormStats& stats);
Matrix zscore_invert(const Matrix& normalized, const NormStats& stats);

struct SplitSeries {
  TrafficSeries train, val, test;
};

/// Contiguous chronological split with floor-sized train/val and the
/// remainder in test.
SplitSeries split_chronological(const TrafficSeries& series, double train_ratio = 0.8,
                                double val_ratio = 0.1, double test_ratio = 0.1);

SampleSet make_windows(const Matrix& partition, std::size_t seq_len,
                       std::size_t horizon);

}  // namespace dkgcm
