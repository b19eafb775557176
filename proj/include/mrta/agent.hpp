// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mrta/assembly.hpp>
#include <mrta/clock.hpp>
#include <mrta/llm.hpp>
#include <mrta/manual.hpp>
#include <mrta/vision.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace mrta
{

enum class Role
{
    System,
    Trainer,
    Trainee,
    Tool,
    Vlm,
};

[[nodiscard]] std::string_view role_name(Role role) noexcept;
[[nodiscard]] std::optional<Role> role_from_name(std::string_view name) noexcept;

/// Tool and Vlm turns carry a serialized ToolResponse as content and the originating call in tool_call.
/// A Trainer turn with tool_call set is the model output that requested the call.
struct Turn
{
    Role role = Role::System;
    std::string content;
    std::optional<ToolCall> tool_call;
    std::int64_t timestamp_ms = 0;

    bool operator==(const Turn&) const = default;
};

[[nodiscard]] nlohmann::json to_json(const Turn& turn);
[[nodiscard]] Turn turn_from_json(const nlohmann::json& j);

/// Append-only transcript grounded on one manual chunk. The first turn is always the system prompt.
class Memory
{
  public:
    Memory(ManualChunk grounding, std::string system_prompt, std::int64_t timestamp_ms = 0);

    /// Memory whose system prompt is render_system_prompt(grounding, list_tools()).
    static Memory start(ManualChunk grounding, std::int64_t timestamp_ms = 0);
    /// Rebuilds a memory from to_jsonl output. Throws Error(SchemaError).
    static Memory from_jsonl(ManualChunk grounding, std::string_view jsonl);

    void append(Turn turn);

    [[nodiscard]] const std::vector<Turn>& turns() const noexcept { return _turns; }
    [[nodiscard]] const ManualChunk& grounding() const noexcept { return _grounding; }

    /// Chat-completions view: Trainer -> assistant, Trainee/Tool/Vlm -> user, System -> system.
    [[nodiscard]] std::vector<ChatMessage> to_messages() const;
    [[nodiscard]] std::string to_jsonl() const;

  private:
    Memory() = default;

    ManualChunk _grounding;
    std::vector<Turn> _turns;
};

/// Persona, then the grounding chunk, then one "name: description" line per tool, then the call syntax.
[[nodiscard]] std::string render_system_prompt(const ManualChunk& chunk, std::span<const ToolSpec> tools);

struct Respond
{
    std::string text;
    bool operator==(const Respond&) const = default;
};

struct CallTool
{
    ToolCall call;
    bool operator==(const CallTool&) const = default;
};

enum class VlmTask
{
    ObjectDetection,
    StateCheck,
};

struct CallVlm
{
    VlmTask task = VlmTask::ObjectDetection;
    ToolCall call;
    bool operator==(const CallVlm&) const = default;
};

using AgentAction = std::variant<Respond, CallTool, CallVlm>;

[[nodiscard]] nlohmann::json to_json(const AgentAction& action);

/// Location of the first ```tool fenced block. body excludes the fences.
struct ToolBlock
{
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string body;
    bool closed = true;
};

[[nodiscard]] std::optional<ToolBlock> find_tool_block(std::string_view text);

/// Fenced JSON block -> CallTool or CallVlm; no block -> Respond with the full text.
/// Throws Error(MalformedToolBlock) for an unterminated fence, invalid JSON or an unknown tool.
[[nodiscard]] AgentAction parse_action(std::string_view llm_output);

/// The fenced block a model would emit for call.
[[nodiscard]] std::string render_tool_block(const ToolCall& call);

struct AgentOptions
{
    int max_iterations = 8;
};

enum class TurnOutcome
{
    Replied,
    MaxIterationsExceeded,
};

struct TurnResult
{
    std::string reply;
    std::vector<AgentAction> actions;
    TurnOutcome outcome = TurnOutcome::Replied;
};

/// Invoked after each turn is appended to memory.
using TurnObserver = std::function<void(const Turn&)>;

inline constexpr std::string_view apology_reply =
    "I'm sorry, I could not finish handling that request. Could you rephrase it or try again?";
inline constexpr std::string_view corrective_prompt_prefix = "Your tool block was invalid: ";

/// One trainee message through the decide-act-observe loop. Tool and vision calls are dispatched against
/// session and observed until the model replies in plain text or max_iterations completions are spent.
/// Backend failures propagate as Error after the turns appended so far.
TurnResult run_turn(Memory& memory,
                    AssemblySession& session,
                    std::string_view user_message,
                    LlmBackend& llm,
                    VisionBackend* vlm,
                    const Clock& clock,
                    const AgentOptions& options = {},
                    const TurnObserver& observer = {});

} // namespace mrta
