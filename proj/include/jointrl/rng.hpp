#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <sstream>
#include <string>

namespace jointrl {

// Deterministic seed derivation (splitmix64). Used to fan a master seed out
// into independent streams without correlated low bits.
inline uint64_t mix_seed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) { return mix_seed(a ^ mix_seed(b)); }
inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) { return mix_seed(mix_seed(a, b), c); }

// mt19937_64 with hand-rolled distributions. The standard distributions are
// implementation-defined, which would break byte-identical reruns across
// toolchains; these are fixed algorithms.
class RandomStream {
 public:
  RandomStream() : engine_(0x853c49e6748fea9bull) {}
  explicit RandomStream(uint64_t seed) : engine_(mix_seed(seed)) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  int64_t randint(int64_t n) { return static_cast<int64_t>(uniform() * static_cast<double>(n)); }

  // Standard normal via Box-Muller. One value per call; the twin is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-300) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925287 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Engine state round-trip, for resumable search logs. The Box-Muller spare
  // is serialized as its bit pattern so the round trip is exact.
  std::string save_state() const {
    std::ostringstream os;
    os << engine_;
    if (have_spare_) {
      uint64_t bits;
      std::memcpy(&bits, &spare_, sizeof bits);
      os << " S " << bits;
    }
    return os.str();
  }

  void load_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    std::string tag;
    have_spare_ = false;
    uint64_t bits = 0;
    if (is >> tag && tag == "S" && is >> bits) {
      std::memcpy(&spare_, &bits, sizeof bits);
      have_spare_ = true;
    }
  }

  RandomStream split(uint64_t tag) { return RandomStream(mix_seed(next_u64(), tag)); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace jointrl
