// SPDX-License-Identifier: Apache-2.0
#include <mrta/error.hpp>
#include <mrta/llm.hpp>

namespace mrta
{

ScriptedBackend::ScriptedBackend(std::vector<std::string> script, bool cycle):
    _script(std::move(script)), _cycle(cycle)
{
    if (_script.empty())
        throw Error(ErrorCode::ConfigError, "scripted backend needs at least one entry");
}

std::string ScriptedBackend::complete(std::span<const ChatMessage> messages)
{
    std::lock_guard lock(_mutex);
    _received.emplace_back(messages.begin(), messages.end());
    if (_next >= _script.size())
    {
        if (!_cycle)
            throw Error(ErrorCode::ScriptExhausted,
                        "scripted backend exhausted after " + std::to_string(_script.size()) + " outputs");
        _next = 0;
    }
    return _script[_next++];
}

std::size_t ScriptedBackend::calls() const
{
    std::lock_guard lock(_mutex);
    return _received.size();
}

std::vector<std::vector<ChatMessage>> ScriptedBackend::received() const
{
    std::lock_guard lock(_mutex);
    return _received;
}

} // namespace mrta
