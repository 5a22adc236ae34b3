#pragma once

// Deterministic randomness helpers. Every sampled artifact in the repo must be
// reproducible from a single seed, so all draws go through mt19937_64 (whose
// output sequence is pinned by the standard) and the bounded draw below.
// std::uniform_int_distribution and std::shuffle are avoided: their algorithms
// are implementation-defined and would unfreeze test expectations.

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace hvqr {

using Rng = std::mt19937_64;

// Unbiased draw in [0, bound) via rejection sampling on the raw 64-bit stream.
inline std::uint64_t draw_below(Rng& rng, std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

// Fisher-Yates with draw_below; stable across platforms for a fixed seed.
template <typename T>
void seeded_shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(draw_below(rng, i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

// FNV-1a, used to derive per-image substream seeds from the run seed.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 1469598103934665603ull) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view tag) {
    return fnv1a(tag, run_seed ^ 0x9e3779b97f4a7c15ull);
}

} // namespace hvqr
