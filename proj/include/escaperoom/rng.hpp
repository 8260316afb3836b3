#pragma once

#include <cstdint>
#include <utility>

namespace escaperoom {

// Deterministic randomness, version "splitmix64/v1".
//
// Every random decision in the toolkit flows through SplitMix64 streams
// derived from a user-supplied 64-bit seed, so identical seeds reproduce
// identical worlds, walks and rollouts on any platform. Stream derivation:
//
//   stream(seed, tag)        = SplitMix64(mix64(seed ^ tag * GOLDEN))
//   episode_seed(seed, i)    = mix64(seed ^ mix64(i + 1))
//
// Fixed tags: kLayoutStream (room placement, door positions),
// kPlacementStream (keys, exit, agent pose, color permutation),
// kWalkStream (Monte-Carlo walks, one derived stream per walk),
// kPolicyStream (scripted policies).

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline constexpr std::uint64_t kLayoutStream = 1;
inline constexpr std::uint64_t kPlacementStream = 2;
inline constexpr std::uint64_t kWalkStream = 3;
inline constexpr std::uint64_t kPolicyStream = 4;

/// SplitMix64 output/finalizer function (Steele, Lea & Flood 2014).
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

    constexpr std::uint64_t next() {
        state_ += kGolden;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1), 53 bits of precision.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Multiply-shift; exact and portable.
    std::uint32_t next_below(std::uint32_t n) {
        return static_cast<std::uint32_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

private:
    std::uint64_t state_;
};

inline SplitMix64 stream(std::uint64_t seed, std::uint64_t tag) {
    return SplitMix64(mix64(seed ^ tag * kGolden));
}

inline std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t episode_index) {
    return mix64(seed ^ mix64(episode_index + 1));
}

/// Fisher-Yates shuffle driven by a SplitMix64 stream.
template <typename Container>
void shuffle(Container& items, SplitMix64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = rng.next_below(static_cast<std::uint32_t>(i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

}  // namespace escaperoom
