#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace greybox {

// 64-bit FNV-1a. Used for seed derivation and config hashes, so the
// result must not depend on platform or standard library.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

// Per-stage seed: splitmix64(root + fnv1a64(label)).
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

// Portable random stream. std::mt19937_64 has a fully specified output
// sequence; the distributions are implemented here because the standard
// ones are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller (cached second variate).
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace greybox
