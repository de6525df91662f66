#pragma once

#include <cstdint>

namespace fhevec {

// SplitMix64. Small, fast, and stable across platforms, which keeps every
// seeded artifact (corpora, oracle trials, training runs) byte-reproducible.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, bound). Modulo bias is negligible for bound << 2^64.
    uint64_t below(uint64_t bound) { return bound ? next() % bound : 0; }

    int64_t range(int64_t lo, int64_t hi) {  // inclusive
        return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool chance(double p) { return unit() < p; }

    // Independent stream for worker k of a seeded task.
    Rng fork(uint64_t k) { return Rng(next() ^ (0x9e3779b97f4a7c15ull * (k + 1))); }

private:
    uint64_t state_;
};

}  // namespace fhevec
