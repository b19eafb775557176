// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace mrta
{

/// One chat-completions message; role is "system", "user" or "assistant".
struct ChatMessage
{
    std::string role;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

/// Slot for a chat model. complete() returns the model's text or throws Error with a backend code.
/// Implementations must accept concurrent calls.
class LlmBackend
{
  public:
    virtual ~LlmBackend() = default;
    virtual std::string complete(std::span<const ChatMessage> messages) = 0;
};

/// Replays a fixed list of outputs in order. Exhaustion throws Error(ScriptExhausted) unless cycle is set.
class ScriptedBackend final: public LlmBackend
{
  public:
    explicit ScriptedBackend(std::vector<std::string> script, bool cycle = false);

    std::string complete(std::span<const ChatMessage> messages) override;

    [[nodiscard]] std::size_t calls() const;
    /// Message lists received so far, for inspecting prompts in tests.
    [[nodiscard]] std::vector<std::vector<ChatMessage>> received() const;

  private:
    std::vector<std::string> _script;
    bool _cycle;
    mutable std::mutex _mutex;
    std::size_t _next = 0;
    std::vector<std::vector<ChatMessage>> _received;
};

} // namespace mrta
