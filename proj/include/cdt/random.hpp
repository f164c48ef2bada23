#pragma once

#include <cstdint>
#include <vector>

namespace cdt {

// splitmix64 step (Steele, Lea, Flood 2014). Used both as a seed mixer and
// to initialize the xoshiro state.
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Child stream seed = mix of the parent seed and a structured tag path,
// e.g. derive_seed(seed, {kTagForest, tree_index}). Bit-exact regardless of
// how work is scheduled across threads.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = seed;
  (void)splitmix64(s);
  for (std::uint64_t t : tags) {
    s ^= t + 0x9e3779b97f4a7c15ULL;
    (void)splitmix64(s);
  }
  return s;
}

// Stream tags, one per independent consumer of randomness.
enum : std::uint64_t {
  kTagSplitData = 1,
  kTagForestTree = 2,
  kTagCrossFit = 3,
  kTagGbtRound = 4,
  kTagNoisePermute = 5,
  kTagBootstrap = 6,
  kTagCvFolds = 7,
  kTagSimX = 8,
  kTagSimZ = 9,
  kTagSimTauNoise = 10,
  kTagSimOutcomeNoise = 11,
  kTagThresholdSample = 12,
  kTagMonteCarlo = 13,
  kTagReplicate = 14,
  kTagArm = 15,
  kTagTeacher = 16,
  kTagStudent = 17,
};

// xoshiro256++ (Blackman, Vigna 2019). Small, fast, and ours, so streams do
// not depend on the standard library's unspecified engines.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Fixed-point multiply keeps it branch-free and
  // deterministic; the bias at 64 bits is far below anything observable here.
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal by inversion; see normal_quantile in stats.hpp.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t state_[4];
};

}  // namespace cdt
