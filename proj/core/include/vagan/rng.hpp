#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace vagan {

// Deterministic random source. All draws are stateless transforms of the
// engine output, so saving/restoring the engine state reproduces the draw
// sequence exactly (needed for bit-exact training resume).
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  // Independent stream derived from (seed, stream_id); used for per-sample
  // generation so results do not depend on generation order.
  static Rng stream(uint64_t seed, uint64_t stream_id);

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1).
  double uniform();
  // Uniform in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi);
  // Standard normal via Box-Muller (no cached second draw).
  double normal();

  // Fisher-Yates shuffle driven by this engine.
  template <typename Vec>
  void shuffle(Vec& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(uniform_int(0, int64_t(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::string save_state() const;
  void load_state(const std::string& s);

 private:
  std::mt19937_64 eng_;
};

// SplitMix64 finalizer; used to derive stream seeds.
uint64_t mix64(uint64_t x);

}  // namespace vagan
