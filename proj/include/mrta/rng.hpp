// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace mrta
{

// Distributions in <random> are implementation-defined, so sampling is done by hand on top of the engine
// to keep generated datasets identical across standard libraries.

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

[[nodiscard]] constexpr std::uint64_t fnv1a64(std::string_view text) noexcept
{
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    for (unsigned char c: text)
    {
        hash ^= c;
        hash *= 0x100000001B3ULL;
    }
    return hash;
}

/// Independent stream for a named task under a master seed.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) noexcept
{
    return splitmix64(splitmix64(master) ^ fnv1a64(stream));
}

class Rng
{
  public:
    explicit Rng(std::uint64_t seed): _engine(splitmix64(seed)) {}

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound)
    {
        auto const limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
        for (;;)
        {
            auto const value = _engine();
            if (value < limit)
                return value % bound;
        }
    }

    /// Uniform integer in [low, high].
    std::int64_t between(std::int64_t low, std::int64_t high)
    {
        return low + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(high - low) + 1));
    }

    template <typename T>
    void shuffle(std::vector<T>& items)
    {
        for (auto i = items.size(); i > 1; --i)
        {
            auto const j = below(i);
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

  private:
    std::mt19937_64 _engine;
};

} // namespace mrta
