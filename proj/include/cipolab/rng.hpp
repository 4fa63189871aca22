#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace cipolab {

// Named purposes for deterministic substream derivation. Every random draw
// in a run comes from a stream keyed by (seed, purpose, step, slot), so any
// component can be replayed in isolation without consuming another's stream.
enum class StreamPurpose : std::uint64_t {
    bank = 1,
    prompt_sample = 2,
    base_rollout = 3,
    correction_rollout = 4,
    replay_shuffle = 5,
    evaluation = 6,
};

// splitmix64 finalizer; good avalanche, cheap.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_key(std::uint64_t seed, StreamPurpose purpose,
                                   std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t k = mix64(seed);
    k = mix64(k ^ static_cast<std::uint64_t>(purpose));
    k = mix64(k ^ a);
    k = mix64(k ^ b);
    return k;
}

// Deterministic random stream. Sampling primitives are hand-rolled (no
// std::uniform_*_distribution) so sequences are identical across standard
// library implementations.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : gen_(key) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n); n > 0. Rejection-free multiply-shift would
    // bias differently per width, so use rejection sampling on the modulus.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next_u64();
        while (x >= limit) {
            x = next_u64();
        }
        return x % n;
    }

    // Fisher-Yates, fixed order.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

inline RngStream substream(std::uint64_t seed, StreamPurpose purpose,
                           std::uint64_t a = 0, std::uint64_t b = 0) {
    return RngStream(derive_key(seed, purpose, a, b));
}

}  // namespace cipolab
