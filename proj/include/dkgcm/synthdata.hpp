#pragma once

#include <cstdint>
#include <vector>

#include "dkgcm/dataio.hpp"

namespace dkgcm {

/// Synthetic traffic network with two latent node families: phase-shifted
/// sinusoids on even nodes, sawtooth ramps on odd nodes, additive Gaussian
/// noise at one tenth of each signal's amplitude scale. The adjacency is a
/// ring plus a few chords, so neighbouring nodes mix the two families.
struct SyntheticData {
  TrafficSeries series;
  AdjacencyMatrix adjacency;
  std::vector<int> true_labels;  // 0 = sinusoid family, 1 = sawtooth family
};

SyntheticData generate_synthetic(std::size_t n_nodes, std::size_t steps,
                                 std::uint64_t seed, double noise_ratio = 0.1,
                                 std::size_t period = 48);

}  // namespace dkgcm
