#include "uncharted/random.hpp"

#include <cmath>
#include <numeric>
#include <numbers>

#include "uncharted/errors.hpp"

namespace uncharted {

std::uint64_t uniform_below(Engine& engine, std::uint64_t bound) {
    if (bound == 0) {
        throw InvalidArgument("uniform_below: bound must be positive");
    }
    const std::uint64_t limit = Engine::max() - (Engine::max() % bound);
    std::uint64_t draw = engine();
    while (draw >= limit) {
        draw = engine();
    }
    return draw % bound;
}

double uniform_unit(Engine& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

double standard_normal(Engine& engine) {
    double u1 = uniform_unit(engine);
    while (u1 <= 0.0) {
        u1 = uniform_unit(engine);
    }
    const double u2 = uniform_unit(engine);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> sample_without_replacement(Engine& engine, std::size_t population,
                                                    std::size_t count) {
    if (count > population) {
        throw InvalidArgument("sample_without_replacement: count exceeds population");
    }
    std::vector<std::size_t> pool(population);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_below(engine, population - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

}  // namespace uncharted
