#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace coconut {

// Random streams.
//
// Every run draws from its own std::mt19937_64 whose seed is a pure function
// of (master_seed, experiment id, replicate index). Uniform reals and bounded
// integers are derived from the raw 64-bit output with fixed arithmetic, so
// trajectories do not depend on the standard library's distribution classes.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::uint64_t stream_seed(std::uint64_t master_seed, std::string_view experiment,
                                 std::uint64_t replicate) {
    std::uint64_t h = splitmix64(master_seed);
    h = splitmix64(h ^ fnv1a64(experiment));
    return splitmix64(h ^ splitmix64(replicate + 0x632BE59BD9B4E019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng stream(std::uint64_t master_seed, std::string_view experiment,
                      std::uint64_t replicate) {
        return Rng(stream_seed(master_seed, experiment, replicate));
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform on {0, ..., n-1} by multiply-shift.
    std::size_t index(std::size_t n) {
        const unsigned __int128 product =
            static_cast<unsigned __int128>(engine_()) * static_cast<unsigned __int128>(n);
        return static_cast<std::size_t>(product >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

} // namespace coconut
