// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mrta/manual.hpp>
#include <mrta/vision.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mrta
{

/// The serving tools of the pilot MR application, in registry order.
enum class Tool
{
    StartAssemble,
    NextStep,
    FrontStep,
    Explode,
    Recover,
    FinishedVideo,
    ReShow,
    Enlarge,
    Shrink,
    GoToStep,
    Rotate,
    ShowPieces,
    HighlightCorrectComponents,
    GetCurrentStep,
    GetRemainingStep,
    CheckStepStatusVR,
    APICallObjectRecognitionAR,
    APICallCheckStepStatusAR,
};

inline constexpr std::size_t tool_count = 18;

enum class ArgType
{
    Integer,
    Direction,
};

struct ToolArg
{
    std::string_view name;
    ArgType type;
};

struct ToolSpec
{
    Tool tool;
    std::string_view name;
    std::string_view description;
    std::span<const ToolArg> args;
};

/// Exactly 18 entries, in registry order.
[[nodiscard]] std::span<const ToolSpec> list_tools() noexcept;
[[nodiscard]] const ToolSpec& tool_spec(Tool tool) noexcept;
[[nodiscard]] std::string_view tool_name(Tool tool) noexcept;
[[nodiscard]] std::optional<Tool> tool_from_name(std::string_view name) noexcept;
[[nodiscard]] bool is_vision_tool(Tool tool) noexcept;

/// {"tools": [{"name", "description", "args": {name: type}}]}
[[nodiscard]] nlohmann::json registry_json();

enum class Direction
{
    None,
    Up,
    Down,
    Left,
    Right,
};

[[nodiscard]] std::string_view direction_name(Direction direction) noexcept;
[[nodiscard]] std::optional<Direction> direction_from_name(std::string_view name) noexcept;

struct ToolCall
{
    Tool tool = Tool::GetCurrentStep;
    nlohmann::json args = nlohmann::json::object();

    bool operator==(const ToolCall&) const = default;
};

/// {"name": ..., "args": {...}}. Throws Error(SchemaError) for unknown names or non-object args.
[[nodiscard]] ToolCall tool_call_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const ToolCall& call);

enum class ToolError
{
    NotStarted,
    AlreadyStarted,
    AtFinalStep,
    AtFirstStep,
    StepOutOfRange,
    StepsIncomplete,
    VlmUnavailable,
    VlmFailed,
    BadArgs,
};

[[nodiscard]] std::string_view tool_error_name(ToolError error) noexcept;
[[nodiscard]] std::optional<ToolError> tool_error_from_name(std::string_view name) noexcept;

/// ok == !error. data holds structured fields (step numbers, pieces, detections, video reference).
struct ToolResponse
{
    bool ok = true;
    std::string message;
    nlohmann::json data = nlohmann::json::object();
    std::optional<ToolError> error;

    bool operator==(const ToolResponse&) const = default;
};

[[nodiscard]] nlohmann::json to_json(const ToolResponse& response);
[[nodiscard]] ToolResponse tool_response_from_json(const nlohmann::json& j);

struct TraceEntry
{
    ToolCall call;
    ToolResponse response;
    std::int64_t timestamp_ms = 0;

    bool operator==(const TraceEntry&) const = default;
};

/// Out-of-band step completion; trace_position is the trace length when it was applied.
struct StepMark
{
    int step = 0;
    bool done = false;
    std::size_t trace_position = 0;

    bool operator==(const StepMark&) const = default;
};

inline constexpr double zoom_factor = 1.25;
inline constexpr double min_zoom = 0.25;
inline constexpr double max_zoom = 4.0;

struct AssemblySession
{
    std::string session_id;
    std::shared_ptr<const InstructionManual> manual;
    std::string frame_ref;
    int current_step = 0;
    int total_steps = 0;
    bool started = false;
    bool finished = false;
    bool exploded = false;
    double zoom = 1.0;
    Direction rotation = Direction::None;
    std::set<std::string> highlights;
    // Index 0 is step 1.
    std::vector<bool> step_completed;
    std::vector<TraceEntry> tool_trace;
    std::vector<StepMark> step_marks;

    [[nodiscard]] const std::string& manual_id() const;
    [[nodiscard]] bool is_step_completed(int step) const;
};

/// Fresh session over a manual; frame_ref defaults to "frame://<session_id>/current".
[[nodiscard]] AssemblySession make_session(std::string session_id,
                                           std::shared_ptr<const InstructionManual> manual,
                                           std::string frame_ref = {});

/// Equality of everything except the trace, step marks and manual pointer identity.
[[nodiscard]] bool same_state(const AssemblySession& a, const AssemblySession& b);
/// Full equality including trace and step marks.
[[nodiscard]] bool identical(const AssemblySession& a, const AssemblySession& b);

/// Empty when every invariant holds, otherwise a description of the first violation.
[[nodiscard]] std::optional<std::string> check_invariants(const AssemblySession& session);

/// Applies one tool call in place. Failures are ok=false responses that leave everything but the trace intact.
/// Exactly one trace entry is appended per call.
ToolResponse apply_tool(AssemblySession& session, const ToolCall& call, VisionBackend* vlm, std::int64_t timestamp_ms = 0);

struct DispatchResult
{
    AssemblySession session;
    ToolResponse response;
};

/// Value form of apply_tool.
[[nodiscard]] DispatchResult dispatch(const AssemblySession& session,
                                      const ToolCall& call,
                                      VisionBackend* vlm,
                                      std::int64_t timestamp_ms = 0);

/// Control channel standing in for the physical/VR step checker. Throws Error(StepOutOfRange), or
/// Error(SessionFinished) when un-marking a step of a finished session.
void set_step_completed(AssemblySession& session, int step, bool done);

/// Rebuilds a session by re-applying a recorded trace and its interleaved step marks to a fresh session.
[[nodiscard]] AssemblySession replay(std::string session_id,
                                     std::shared_ptr<const InstructionManual> manual,
                                     std::span<const TraceEntry> trace,
                                     std::span<const StepMark> marks,
                                     VisionBackend* vlm,
                                     std::string frame_ref = {});

struct ToolUsage
{
    std::size_t count = 0;
    double fraction = 0.0;
};

[[nodiscard]] std::map<std::string, ToolUsage> tool_histogram(std::span<const Tool> calls);
[[nodiscard]] std::map<std::string, ToolUsage> trace_histogram(std::span<const AssemblySession> sessions);

/// View of the mutable state (no trace), as published to clients.
[[nodiscard]] nlohmann::json state_json(const AssemblySession& session);
/// Restores the state fields of a session from state_json output. The trace is left untouched.
void apply_state_json(AssemblySession& session, const nlohmann::json& state);

[[nodiscard]] nlohmann::json to_json(const TraceEntry& entry);
[[nodiscard]] TraceEntry trace_entry_from_json(const nlohmann::json& j);

/// One JSON object per line.
[[nodiscard]] std::string trace_to_jsonl(std::span<const TraceEntry> trace);
[[nodiscard]] std::vector<TraceEntry> trace_from_jsonl(std::string_view jsonl);

} // namespace mrta
