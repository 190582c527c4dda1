#pragma once

#include <cstdint>
#include <random>

namespace qjl {

// Seeding scheme
// --------------
// Every random object in the library is driven by a 64-bit seed. Child seeds
// are derived from a master seed and a stream id with the SplitMix64
// finalizer, so one config seed reproduces every sketch, trial and synthetic
// stream:
//
//   derive_seed(master, stream) = mix64(mix64(master) + (stream + 1) * 0x9E3779B97F4A7C15)
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. Standard normals come from the Marsaglia polar method on 53-bit
// uniforms (std::normal_distribution is implementation-defined, so it is not
// used).

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept;

/// Seed for the sketch of one attention head; (layer, head) pairs never share a seed.
std::uint64_t head_seed(std::uint64_t master, std::uint64_t layer, std::uint64_t head) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal draw (Marsaglia polar method; the second variate is cached).
  double normal();

  /// Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace qjl
