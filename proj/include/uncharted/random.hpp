#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace uncharted {

/// SplitMix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for stream `stream` of master seed `seed`. Streams are independent of
/// the order in which they are consumed.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream) {
    return Engine{stream_seed(seed, stream)};
}

// The standard distributions are implementation-defined, so the few draws the
// library needs are spelled out here to keep results identical across
// toolchains.

/// Uniform integer in [0, bound). bound must be positive.
std::uint64_t uniform_below(Engine& engine, std::uint64_t bound);

/// Uniform real in [0, 1) with 53 random bits.
double uniform_unit(Engine& engine);

/// Standard normal variate (Box-Muller, one value per call).
double standard_normal(Engine& engine);

/// `count` distinct values from [0, population), in draw order (partial
/// Fisher-Yates).
std::vector<std::size_t> sample_without_replacement(Engine& engine, std::size_t population,
                                                    std::size_t count);

}  // namespace uncharted
