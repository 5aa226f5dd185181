#pragma once

#include <cstdint>

namespace lpcure {

// Counter-based uniform generator built on the SplitMix64 output function.
// Every draw is a pure function of (seed, counter), so per-subject substreams
// are reproducible and independent of evaluation order.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed, std::uint64_t counter = 0)
        : seed_(seed), counter_(counter) {}

    // Substream for one simulated subject: `draws_per_unit` consecutive
    // counters starting at index*draws_per_unit.
    static SplitMix64 substream(std::uint64_t seed, std::uint64_t index,
                                std::uint64_t draws_per_unit) {
        return SplitMix64(seed, index * draws_per_unit);
    }

    std::uint64_t next_u64() { return mix(seed_ + (++counter_) * kGamma); }

    // Uniform on [0, 1) with 53-bit resolution.
    double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Stateless mixing of two words, used to derive replication seeds.
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
        return mix(seed + kGamma * (index + 1));
    }

  private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
    std::uint64_t seed_;
    std::uint64_t counter_;
};

}  // namespace lpcure
