#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace synthkt {

// 64-bit FNV-1a. Stable across platforms and runs, unlike std::hash.
std::uint64_t stable_hash(std::string_view text) noexcept;

// Derives an independent stream seed from (seed, stream) with a splitmix64
// finalizer, so per-item streams do not depend on scheduling order.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

// Seeded random source. Non-uniform variates are produced by explicit
// algorithms (polar Gaussian, Marsaglia-Tsang gamma) rather than the
// implementation-defined std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1).
  double uniform_open();
  // Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  double normal();
  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  // Gamma(shape, 1) variate; shape > 0.
  double gamma(double shape);
  // ln of a Gamma(shape, 1) variate, computed without underflow for small
  // shapes.
  double log_gamma_variate(double shape);

 private:
  double gamma_shape_ge1(double shape);

  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace synthkt
