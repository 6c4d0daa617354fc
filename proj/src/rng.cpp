#include "cbrec/rng.hpp"

#include <cassert>
#include <cmath>

#include "cbrec/errors.hpp"

namespace cbrec {

uint64_t mix_seed(uint64_t seed, uint64_t tag) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t Rng::below(uint64_t n) {
  if (n == 0) fail(Errc::bad_config, "Rng::below(0)");
  // Rejection sampling: accept draws >= 2^64 mod n so every residue is
  // equally likely.
  const uint64_t threshold = (~n + 1) % n;  // == 2^64 mod n
  uint64_t x;
  do {
    x = next_u64();
  } while (x < threshold);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] so log() is finite.
  const double u1 =
      (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

int Rng::poisson1() {
  static const double kL = std::exp(-1.0);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= uniform();
  } while (p > kL);
  return k - 1;
}

std::vector<size_t> Rng::sample_without_replacement(size_t n, size_t k) {
  assert(k <= n);
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  for (size_t i = 0; i < k; ++i) {
    size_t j = i + static_cast<size_t>(below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace cbrec
