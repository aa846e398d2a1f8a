#pragma once

#include <cstdint>
#include <random>

namespace cpsim {

// splitmix64 finalizer; used to derive independent substream seeds.
std::uint64_t mix_seed(std::uint64_t value);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// Seeded generator with portable transforms. The engine is the standard
// mt19937_64 (its output sequence is fixed by the standard), but the
// uniform/normal mappings are written out here because the <random>
// distributions are implementation-defined and would break byte-identical
// outputs across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer on [0, n); n must be positive.
  std::uint64_t index(std::uint64_t n);
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double exponential(double rate);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cpsim
