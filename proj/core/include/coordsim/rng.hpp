#pragma once

#include <cmath>
#include <cstdint>

namespace coordsim {

/**
 * Counter-based deterministic random stream.
 *
 * Every output is a pure function of (key, counter), so streams can be
 * split by key derivation without touching the parent state and replayed
 * bit-identically from the same seed.  The output function is the
 * splitmix64 finalizer over a Weyl sequence, which passes standard
 * statistical batteries.
 */
class CounterRng {
public:
    CounterRng() : key_(0), counter_(0) {}
    explicit CounterRng(std::uint64_t key) : key_(key), counter_(0) {}

    /// Derives an independent child stream, e.g. one per replicate.
    CounterRng derive(std::uint64_t label) const {
        return CounterRng(mix(key_ ^ mix(label + 0x632be59bd9b4e019ULL)));
    }

    std::uint64_t next_u64() {
        return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in (0, 1], safe as an argument to log().
    double next_double_pos() { return 1.0 - next_double(); }

    bool next_bernoulli(double p) { return next_double() < p; }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // Lemire's multiply-shift rejection method, unbiased.
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t t = (0 - n) % n;
            while (lo < t) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    double next_exponential(double rate) {
        return -std::log(next_double_pos()) / rate;
    }

    std::uint64_t counter() const { return counter_; }
    std::uint64_t key() const { return key_; }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_;
    std::uint64_t counter_;
};

} // namespace coordsim
