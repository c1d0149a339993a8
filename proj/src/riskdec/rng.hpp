#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace riskdec {

// Deterministic random helpers. std::mt19937_64 is fully specified by the
// standard, but the standard *distributions* are not, so every draw here is
// built directly from raw engine output. Integer-only paths (index sampling,
// shuffles) are therefore bit-identical across platforms; floating-point
// paths depend only on IEEE-754 arithmetic and libm.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform integer in [0, bound) by rejection, unbiased.
  std::uint64_t below(std::uint64_t bound);

  // Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; the paired value is cached.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // First k elements of a random permutation of {0,...,n-1}.
  std::vector<std::int64_t> sample_without_replacement(std::int64_t n, std::int64_t k);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Mixes a base seed with a textual stream tag so that independent sampling
// stages never share an engine state.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

}  // namespace riskdec
