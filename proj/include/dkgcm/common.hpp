#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace dkgcm {

/// Error type for all recoverable failures (bad input files, shape
/// mismatches, invalid configuration). The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

/// Deterministic RNG used throughout. All stochastic behaviour (k-means
/// seeding, parameter init, batch shuffling, dropout masks) draws from one
/// of these, seeded explicitly, so runs are reproducible bit-for-bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(gen_);
  }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(gen_); }
  std::uint64_t next_u64() { return gen_(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_);
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

/// Mix a base seed with a stream id so parallel sub-tasks (per-cluster
/// training, per-seed ablation runs) get independent deterministic streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

/// Worker count for parallel sections. DKGCM_THREADS caps it; 0 or unset
/// means hardware concurrency.
int thread_count();

/// Run f(i) for i in [0, n) on up to thread_count() workers. Falls back to
/// a plain loop when n is small or only one worker is available.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

}  // namespace dkgcm
