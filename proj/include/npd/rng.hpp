#pragma once

#include <cmath>
#include <cstdint>

namespace npd::rng {

// splitmix64 finalizer (Steele/Lea/Flood; Vigna's fixed-increment variant).
inline uint64_t mix64(uint64_t z) {
  z += UINT64_C(0x9E3779B97F4A7C15);
  z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
  z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
  return z ^ (z >> 31);
}

inline uint64_t mix_key(uint64_t seed, uint64_t a, uint64_t b) {
  uint64_t h = mix64(seed ^ UINT64_C(0xA0761D6478BD642F));
  h = mix64(h ^ mix64(a));
  h = mix64(h ^ mix64(b));
  return h;
}

// Counter-based stream: draw i is a pure function of (key, i), so streams
// keyed per work item are independent of execution order and thread count.
class Stream {
public:
  Stream() : key_(0) {}
  explicit Stream(uint64_t key) : key_(key) {}
  Stream(uint64_t seed, uint64_t a, uint64_t b) : key_(mix_key(seed, a, b)) {}

  uint64_t key() const { return key_; }

  uint64_t next_u64() { return mix64(key_ + counter_++ * UINT64_C(0x9E3779B97F4A7C15)); }

  // uniform in [0, 1), 53 bits
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n); multiply-high mapping (bias < n / 2^64)
  uint32_t below(uint32_t n) {
    return static_cast<uint32_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // standard normal, Box-Muller; consumes exactly two draws
  double normal() {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

private:
  uint64_t key_;
  uint64_t counter_ = 0;
};

// Stream purpose tags, kept distinct so derived streams never collide.
enum : uint64_t {
  kTagTeacherInit = 0x7e11,
  kTagStudentInit = 0x57ed,
  kTagPretrainShuffle = 0x5481,
  kTagTrainShuffle = 0x5482,
  kTagCorpus = 0xc0de,
};

}  // namespace npd::rng
