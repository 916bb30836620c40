#pragma once

#include <cstdint>

namespace qfe {

// SplitMix64 (Steele, Lea & Flood / Vigna, public domain). Chosen over the
// standard-library engines because its output stream is fully specified by
// this header, so seeded fixtures stay byte-stable across platforms and
// standard-library versions. Stream version: splitmix64-v1.
//
// Stream semantics: next_u64() advances the state by the golden-ratio
// increment and returns one mixed word; next_double() consumes exactly one
// word and maps the top 53 bits to [0, 1); uniform(a, b) consumes one word;
// index_below(n) consumes one word (modulo reduction).
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform index in [0, n). n must be > 0.
    std::uint64_t index_below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t state_;
};

}  // namespace qfe
