// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>

namespace mrta
{

/// Milliseconds since the Unix epoch. Injected everywhere a timestamp is recorded so runs can be replayed.
using Clock = std::function<std::int64_t()>;

inline Clock system_clock()
{
    return [] {
        using namespace std::chrono;
        return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
    };
}

/// Deterministic clock: start, start+step, start+2*step, ...
inline Clock logical_clock(std::int64_t start = 0, std::int64_t step = 1)
{
    auto counter = std::make_shared<std::atomic<std::int64_t>>(0);
    return [counter, start, step] { return start + step * counter->fetch_add(1); };
}

} // namespace mrta
