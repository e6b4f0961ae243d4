#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace servesim {

// xoshiro256++ seeded through splitmix64. Everything downstream (arrivals,
// instance shuffles) flows from one of these so runs are reproducible from
// a single seed, and child streams keep the shuffle randomness from
// perturbing the arrival sequence.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_)
            word = splitmix64(x);
    }

    std::uint64_t next() {
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

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Exponential with the given rate; log1p keeps precision for small u.
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    // Unbiased-enough bounded draw via the multiply-shift reduction.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    std::uint64_t state_[4];
};

// Deterministic child-stream seed: one splitmix64 round over seed xor salt.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed ^ salt;
    return Rng::splitmix64(x);
}

// Salts for the independent streams a simulation run uses.
inline constexpr std::uint64_t kSaltArrivals = 0xA076'1D64'78BD'642FULL;
inline constexpr std::uint64_t kSaltPrefillShuffle = 0xE703'7ED1'A0B4'28DBULL;
inline constexpr std::uint64_t kSaltDecodeShuffle = 0x8EBC'6AF0'9C88'C6E3ULL;
inline constexpr std::uint64_t kSaltCollocShuffle = 0x5899'65CC'7537'4312ULL;

} // namespace servesim
