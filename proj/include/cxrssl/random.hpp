#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace cxrssl {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

/// Derives an independent stream seed from a master seed, a purpose tag and
/// integer coordinates such as (epoch, sample). Every stochastic component
/// draws from its own derived stream so results never depend on call order.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                                 std::initializer_list<std::uint64_t> coords = {}) {
    std::uint64_t h = detail::splitmix64(master ^ detail::fnv1a(purpose));
    for (std::uint64_t c : coords) {
        h = detail::splitmix64(h ^ detail::splitmix64(c + 0x632be59bd9b4e019ULL));
    }
    return h;
}

inline Rng make_rng(std::uint64_t master, std::string_view purpose, std::initializer_list<std::uint64_t> coords = {}) {
    return Rng(derive_seed(master, purpose, coords));
}

/// Uniform real in [lo, hi) built from raw engine output; unlike
/// std::uniform_real_distribution its output does not vary across standard libraries.
template <typename T = double>
T uniform(Rng& rng, T lo, T hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return static_cast<T>(lo + (hi - lo) * u);
}

/// Standard normal via Box-Muller on `uniform`.
template <typename T = double>
T normal(Rng& rng, T mean, T stddev) {
    double u1 = uniform<double>(rng, 0.0, 1.0);
    while (u1 <= 0.0) {
        u1 = uniform<double>(rng, 0.0, 1.0);
    }
    const double u2 = uniform<double>(rng, 0.0, 1.0);
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    return static_cast<T>(mean + stddev * z);
}

/// Fisher-Yates with `uniform`-based draws for cross-platform reproducibility.
template <typename It>
void shuffle(It first, It last, Rng& rng) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
        const auto j = static_cast<std::uint64_t>(rng() % i);
        std::swap(first[i - 1], first[j]);
    }
}

} // namespace cxrssl
