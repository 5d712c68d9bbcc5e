#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

#include "dualsddp/sparse.hpp"

namespace dualsddp {

/// Deterministic random source. Sampling is implemented directly on the
/// mt19937_64 stream (standard distributions are implementation-defined and
/// would break cross-platform reproducibility).
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : gen_(seed) {}

  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Index sampled with probability weights[i] / sum(weights).
  int sample_weights(const Vec& weights) {
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw std::invalid_argument("sample_weights: negative weight");
      total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("sample_weights: all weights are zero");
    const double u = uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace dualsddp
