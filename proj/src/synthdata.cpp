#include "dkgcm/synthdata.hpp"

#include <cmath>

namespace dkgcm {

SyntheticData generate_synthetic(std::size_t n_nodes, std::size_t steps,
                                 std::uint64_t seed, double noise_ratio,
                                 std::size_t period) {
  require(n_nodes >= 2 && steps >= period, "generate_synthetic: degenerate sizes");
  SyntheticData out;
  out.series.values = Matrix(steps, n_nodes);
  out.series.interval_seconds = 300;
  out.series.start_timestamp = "0";
  Rng rng(seed);

  for (std::size_t n = 0; n < n_nodes; ++n) {
    out.series.node_ids.push_back("n" + std::to_string(n));
    const bool sine_family = n % 2 == 0;
    out.true_labels.push_back(sine_family ? 0 : 1);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double amp = sine_family ? 100.0 : 80.0;
    const double base = sine_family ? 300.0 : 220.0;
    // Noise std scales off the signal std (amp/sqrt(2) for the sine,
    // amp/sqrt(3) for the sawtooth): noise_ratio = 0.1 gives a 10:1
    // signal-to-noise ratio in standard deviations.
    const double signal_std = amp / (sine_family ? std::sqrt(2.0) : std::sqrt(3.0));
    for (std::size_t t = 0; t < steps; ++t) {
      const double u = static_cast<double>(t) / static_cast<double>(period);
      double signal;
      if (sine_family) {
        signal = std::sin(2.0 * M_PI * u + phase);
      } else {
        // Sawtooth in [-1, 1) with a per-node phase offset.
        const double frac = u + phase / (2.0 * M_PI);
        signal = 2.0 * (frac - std::floor(frac)) - 1.0;
      }
      const double value = base + amp * signal + signal_std * noise_ratio * rng.normal();
      out.series.values.at(t, n) = std::max(0.0, value);
    }
  }

  out.adjacency.node_ids = out.series.node_ids;
  out.adjacency.weights = Matrix(n_nodes, n_nodes);
  auto edge = [&](std::size_t i, std::size_t j) {
    out.adjacency.weights.at(i, j) = 1.0;
    out.adjacency.weights.at(j, i) = 1.0;
  };
  for (std::size_t n = 0; n < n_nodes; ++n) edge(n, (n + 1) % n_nodes);
  for (std::size_t n = 0; n + 5 < n_nodes; n += 5) edge(n, n + 5);
  return out;
}

}  // namespace dkgcm
