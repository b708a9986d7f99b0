#pragma once

#include <cstdint>
#include <random>

namespace toda {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seedable 64-bit stream (mt19937_64). Uniform helpers are implemented here rather than
/// through std distributions so draws are identical across standard libraries.
///
/// Child streams: child(a, b) seeds a new generator from splitmix64 over (seed, a, b), so the
/// stream for repetition j of step i does not depend on how many draws other repetitions made.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next() { return eng_(); }

    bool bit() { return (eng_() >> 63) != 0; }

    /// Uniform integer in [lo, hi].
    std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi) {
        std::uint64_t span = hi - lo;
        if (span == ~0ULL) return eng_();
        std::uint64_t range = span + 1;
        std::uint64_t limit = ~0ULL - (~0ULL % range);
        std::uint64_t x;
        do x = eng_(); while (x >= limit);
        return lo + x % range;
    }

    /// Uniform double in [0, 1).
    double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    [[nodiscard]] SeededRng child(std::uint64_t a, std::uint64_t b = 0) const {
        std::uint64_t s = splitmix64(seed_ ^ splitmix64(a + 0x632be59bd9b4e019ULL));
        s = splitmix64(s ^ splitmix64(b + 0x8cb92ba72f3d8dd7ULL));
        return SeededRng(s);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
};

}  // namespace toda
