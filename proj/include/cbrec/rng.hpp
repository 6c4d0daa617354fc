#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace cbrec {

// splitmix64 round; derives independent stream seeds from one master seed.
uint64_t mix_seed(uint64_t seed, uint64_t tag);

// Deterministic RNG on top of std::mt19937_64. The distributions are
// implemented here instead of <random>'s because std::*_distribution
// algorithms are implementation-defined; equal seeds must give identical
// draws on every platform for replay runs to be reproducible bit-for-bit.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Unbiased integer in [0, n). n must be > 0.
  uint64_t below(uint64_t n);

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (spare value cached).
  double normal();

  // Poisson with mean 1, Knuth's product method.
  int poisson1();

  // In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n); requires k <= n. Partial Fisher-Yates,
  // so the returned order is itself uniform.
  std::vector<size_t> sample_without_replacement(size_t n, size_t k);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cbrec
