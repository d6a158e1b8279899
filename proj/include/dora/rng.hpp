#pragma once

#include <cstdint>
#include <vector>

namespace dora {

// splitmix64; used both as a stream-seeding mixer and as the PRF that models
// the VRF-style assignment (verifiability is out of scope in a closed
// simulation, uniformity is what matters).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL);
    return splitmix64(s);
}

// Deterministic generator with platform-independent bounded draws.
// std::uniform_int_distribution is implementation-defined, so bounded values
// are derived here directly.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x5eed5eed5eedULL) {}

    // Derives an independent stream from (seed, tags...) without touching the
    // parent state.
    static Rng stream(std::uint64_t seed, std::uint64_t tag0, std::uint64_t tag1 = 0,
                      std::uint64_t tag2 = 0) {
        std::uint64_t s = seed;
        s = mix64(s, tag0);
        s = mix64(s, tag1);
        s = mix64(s, tag2);
        return Rng(s);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, n) by rejection from the top 2^64 multiple.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Uniform inclusive range draw.
    std::int64_t between(std::int64_t lo, std::int64_t hi) {
        if (hi <= lo) return lo;
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(below(span));
    }

    double unit_double() {
        return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    bool chance(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return unit_double() < p;
    }

    // First k elements of a uniform permutation of {0..n-1}.
    std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n, std::uint32_t k);

  private:
    std::uint64_t state_;
};

}  // namespace dora
