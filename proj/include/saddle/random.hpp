#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace saddle {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed of stream `index` under `master`. Streams for distinct indices are
/// decorrelated, so trial i can be reproduced without running trials < i.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Seeded random source. Deterministic for a given seed on a given build.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  static RandomStream derive(std::uint64_t master, std::uint64_t index) {
    return RandomStream(derive_seed(master, index));
  }

  double normal();
  double uniform(double lo, double hi);
  Eigen::VectorXd normal_vector(Eigen::Index n);
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace saddle
