#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <string>

namespace exf {

// Neumaier-compensated accumulator. Used for loss reductions so that sums
// are reproducible to ~1e-16 regardless of magnitude ordering.
class Accumulator {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double total() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent seed streams derived from one experiment seed. Each consumer
// (data generation, splitting, model init, batching, ...) gets its own tag
// so adding a consumer never perturbs the draws of another.
enum class SeedStream : std::uint64_t {
  dataset = 1,
  split = 2,
  source_init = 3,
  source_batches = 4,
  target_init = 5,
  target_batches = 6,
  augment = 7,
  gradcheck = 8,
};

inline std::uint64_t sub_seed(std::uint64_t seed, SeedStream stream) {
  return splitmix64(seed ^ (static_cast<std::uint64_t>(stream) * 0xA24BAED4963EE407ull));
}

inline std::mt19937_64 make_rng(std::uint64_t seed, SeedStream stream) {
  return std::mt19937_64(sub_seed(seed, stream));
}

// EXF_THREADS caps internal parallelism; unset or invalid means 1.
inline std::size_t thread_cap() {
  const char* env = std::getenv("EXF_THREADS");
  if (!env) return 1;
  char* end = nullptr;
  long v = std::strtol(env, &end, 10);
  if (end == env || v < 1) return 1;
  return static_cast<std::size_t>(v);
}

}  // namespace exf
