#include "vagan/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace vagan {

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::stream(uint64_t seed, uint64_t stream_id) {
  return Rng(mix64(mix64(seed) ^ mix64(stream_id + 0x51ed2701ULL)));
}

double Rng::uniform() {
  return double(next_u64() >> 11) * 0x1.0p-53;
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  // Rejection sampling keeps the distribution exact and the draw count
  // reproducible for a fixed engine state.
  uint64_t range = uint64_t(hi - lo) + 1;
  if (range == 0) return int64_t(next_u64());  // full 64-bit range
  uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return lo + int64_t(v % range);
}

double Rng::normal() {
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::save_state() const {
  std::ostringstream os;
  os << eng_;
  return os.str();
}

void Rng::load_state(const std::string& s) {
  std::istringstream is(s);
  is >> eng_;
}

}  // namespace vagan
