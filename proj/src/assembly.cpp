// SPDX-License-Identifier: Apache-2.0
#include <mrta/assembly.hpp>
#include <mrta/error.hpp>
#include <mrta/text.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mrta
{

using nlohmann::json;

namespace
{
    constexpr std::array<ToolArg, 1> go_to_step_args {{{"step", ArgType::Integer}}};
    constexpr std::array<ToolArg, 1> rotate_args {{{"direction", ArgType::Direction}}};

    // clang-format off
    const std::array<ToolSpec, tool_count> registry {{
        {Tool::StartAssemble, "StartAssemble", "Initiate the assembly process.", {}},
        {Tool::NextStep, "NextStep", "Move to the next assembly step.", {}},
        {Tool::FrontStep, "FrontStep", "Go back to the previous assembly step.", {}},
        {Tool::Explode, "Explode", "Trigger an explosion for detailed viewing.", {}},
        {Tool::Recover, "Recover", "Restore the initial state of AR objects after explosion.", {}},
        {Tool::FinishedVideo, "FinishedVideo", "End the assembly process and show a video of the assembled LEGO bricks.", {}},
        {Tool::ReShow, "ReShow", "Repeat the current assembly step.", {}},
        {Tool::Enlarge, "Enlarge", "Enlarge or zoom out the current object.", {}},
        {Tool::Shrink, "Shrink", "Shrink or zoom in the current object.", {}},
        {Tool::GoToStep, "GoToStep", "Go to the given assembly step number.", go_to_step_args},
        {Tool::Rotate, "Rotate", "Rotate the current object to a direction (\"Up\", \"Down\", \"Left\", \"Right\", \"None\").", rotate_args},
        {Tool::ShowPieces, "ShowPieces", "Show all candidate LEGO pieces to be assembled.", {}},
        {Tool::HighlightCorrectComponents, "HighlightCorrectComponents", "Highlight correct attachment points and components.", {}},
        {Tool::GetCurrentStep, "GetCurrentStep", "Get the number of the current step.", {}},
        {Tool::GetRemainingStep, "GetRemainingStep", "Get the number of the remaining steps.", {}},
        {Tool::CheckStepStatusVR, "CheckStepStatusVR", "Check whether the current step in Unity is accomplished correctly or not.", {}},
        {Tool::APICallObjectRecognitionAR, "APICallObjectRecognitionAR", "Call the VLM agent to identify LEGO pieces based on the provided video streaming data from AR glasses and highlight the recognized pieces in the AR environment.", {}},
        {Tool::APICallCheckStepStatusAR, "APICallCheckStepStatusAR", "Call the VLM agent to determine whether the current assembly step is completed correctly or not, using the provided video streaming data from AR glasses as input.", {}},
    }};
    // clang-format on

    std::string join(const std::vector<std::string>& items, std::string_view separator)
    {
        std::string out;
        for (auto const& item: items)
        {
            if (!out.empty())
                out += separator;
            out += item;
        }
        return out;
    }

    std::string format_zoom(double zoom)
    {
        std::ostringstream out;
        out << zoom;
        return out.str();
    }

    ToolResponse success(std::string message, json data = json::object())
    {
        return ToolResponse {true, std::move(message), std::move(data), std::nullopt};
    }

    ToolResponse failure(ToolError error, std::string message)
    {
        return ToolResponse {false, std::move(message), json::object(), error};
    }

    std::string progress(const AssemblySession& s)
    {
        return "step " + std::to_string(s.current_step) + " of " + std::to_string(s.total_steps);
    }

    json step_data(const AssemblySession& s)
    {
        return {{"step", s.current_step}, {"total", s.total_steps}};
    }

    const StepInstruction& current(const AssemblySession& s)
    {
        return s.manual->step(s.current_step);
    }

    std::optional<std::string> check_args(const ToolCall& call)
    {
        if (!call.args.is_object())
            return "arguments must be an object";
        auto const& spec = tool_spec(call.tool);
        for (auto const& [key, value]: call.args.items())
        {
            bool const known =
                std::any_of(spec.args.begin(), spec.args.end(), [&](const ToolArg& arg) { return arg.name == key; });
            if (!known)
                return std::string(spec.name) + " does not take argument '" + key + "'";
        }
        for (auto const& arg: spec.args)
            if (!call.args.contains(std::string(arg.name)))
                return std::string(spec.name) + " requires argument '" + std::string(arg.name) + "'";
        return std::nullopt;
    }

    std::optional<long long> integer_arg(const json& value)
    {
        if (value.is_number_integer())
            return value.get<long long>();
        if (value.is_string())
        {
            auto const s = value.get<std::string>();
            if (s.empty() || s.size() > 9 || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
                return std::nullopt;
            return std::stoll(s);
        }
        return std::nullopt;
    }

    ToolResponse require_started()
    {
        return failure(ToolError::NotStarted, "The assembly has not been started yet.");
    }

    ToolResponse run_tool(AssemblySession& s, const ToolCall& call, VisionBackend* vlm)
    {
        if (auto problem = check_args(call))
            return failure(ToolError::BadArgs, *problem);

        switch (call.tool)
        {
            case Tool::StartAssemble:
                if (s.started)
                    return failure(ToolError::AlreadyStarted, "The assembly has already been started.");
                s.started = true;
                s.current_step = 1;
                return success("Assembly started. You are on " + progress(s) + ".", step_data(s));

            case Tool::NextStep:
                if (!s.started)
                    return require_started();
                if (s.current_step >= s.total_steps)
                    return failure(ToolError::AtFinalStep, "You are already on the final step.");
                ++s.current_step;
                return success("Moved to " + progress(s) + ".", step_data(s));

            case Tool::FrontStep:
                if (!s.started)
                    return require_started();
                if (s.current_step <= 1)
                    return failure(ToolError::AtFirstStep, "You are already on the first step.");
                --s.current_step;
                return success("Went back to " + progress(s) + ".", step_data(s));

            case Tool::Explode:
                if (s.exploded)
                    return success("The view is already exploded.", {{"exploded", true}, {"already", true}});
                s.exploded = true;
                return success("Exploded view enabled for detailed viewing.", {{"exploded", true}, {"already", false}});

            case Tool::Recover:
                s.exploded = false;
                s.zoom = 1.0;
                s.rotation = Direction::None;
                return success("Restored the initial state of the AR objects.",
                               {{"exploded", false}, {"zoom", 1.0}, {"rotation", "None"}});

            case Tool::FinishedVideo: {
                if (!s.started)
                    return require_started();
                std::vector<int> missing;
                for (int step = 1; step <= s.total_steps; ++step)
                    if (!s.is_step_completed(step))
                        missing.push_back(step);
                if (!missing.empty())
                {
                    auto response = failure(ToolError::StepsIncomplete,
                                            std::to_string(missing.size()) + " step(s) are not completed yet.");
                    response.data = {{"incomplete_steps", missing}};
                    return response;
                }
                s.finished = true;
                auto const video = "video://" + s.manual_id() + "/finished";
                return success("Assembly finished. Playing the video of the assembled model.", {{"video_ref", video}});
            }

            case Tool::ReShow: {
                if (!s.started)
                    return require_started();
                auto const& step = current(s);
                return success("Step " + std::to_string(step.index) + ": " + join(step.instructions, " "),
                               {{"step", step.index}, {"instructions", step.instructions}});
            }

            case Tool::Enlarge:
                s.zoom = std::min(max_zoom, s.zoom * zoom_factor);
                return success("Zoom is now " + format_zoom(s.zoom) + "x.", {{"zoom", s.zoom}});

            case Tool::Shrink:
                s.zoom = std::max(min_zoom, s.zoom / zoom_factor);
                return success("Zoom is now " + format_zoom(s.zoom) + "x.", {{"zoom", s.zoom}});

            case Tool::GoToStep: {
                auto const target = integer_arg(call.args.at("step"));
                if (!target)
                    return failure(ToolError::BadArgs, "GoToStep 'step' must be an integer");
                if (!s.started)
                    return require_started();
                if (*target < 1 || *target > s.total_steps)
                    return failure(ToolError::StepOutOfRange,
                                   "Step " + std::to_string(*target) + " is outside 1.." + std::to_string(s.total_steps)
                                       + ".");
                s.current_step = static_cast<int>(*target);
                return success("Went to " + progress(s) + ".", step_data(s));
            }

            case Tool::Rotate: {
                auto const& value = call.args.at("direction");
                auto const direction = value.is_string() ? direction_from_name(value.get<std::string>()) : std::nullopt;
                if (!direction)
                    return failure(ToolError::BadArgs, "Rotate 'direction' must be one of Up, Down, Left, Right, None");
                if (*direction == Direction::None)
                    return success("Rotation unchanged.", {{"rotation", direction_name(s.rotation)}});
                s.rotation = *direction;
                return success("Rotated the object " + std::string(direction_name(s.rotation)) + ".",
                               {{"rotation", direction_name(s.rotation)}});
            }

            case Tool::ShowPieces: {
                if (!s.started)
                    return require_started();
                auto const& step = current(s);
                auto const message = step.piece_ids.empty()
                                         ? "No candidate pieces are listed for step " + std::to_string(step.index) + "."
                                         : "Candidate pieces for step " + std::to_string(step.index) + ": "
                                               + join(step.piece_ids, ", ") + ".";
                return success(message, {{"step", step.index}, {"pieces", step.piece_ids}});
            }

            case Tool::HighlightCorrectComponents: {
                if (!s.started)
                    return require_started();
                auto const& step = current(s);
                s.highlights = std::set<std::string>(step.piece_ids.begin(), step.piece_ids.end());
                auto const message = step.piece_ids.empty() ? "Nothing to highlight for this step."
                                                            : "Highlighted: " + join(step.piece_ids, ", ") + ".";
                return success(message, {{"step", step.index}, {"highlights", step.piece_ids}});
            }

            case Tool::GetCurrentStep:
                if (!s.started)
                    return success("The assembly has not started yet.", step_data(s));
                return success("You are on " + progress(s) + ".", step_data(s));

            case Tool::GetRemainingStep: {
                auto const remaining = s.total_steps - s.current_step;
                return success(std::to_string(remaining) + " step(s) remaining.", {{"remaining", remaining}});
            }

            case Tool::CheckStepStatusVR: {
                if (!s.started)
                    return require_started();
                bool const done = s.is_step_completed(s.current_step);
                return success("Step " + std::to_string(s.current_step)
                                   + (done ? " is accomplished correctly." : " is not accomplished yet."),
                               {{"step", s.current_step}, {"completed", done}});
            }

            case Tool::APICallObjectRecognitionAR:
            case Tool::APICallCheckStepStatusAR: {
                if (!vlm)
                    return failure(ToolError::VlmUnavailable, "No vision-language backend is available.");
                if (!s.started)
                    return require_started();
                auto const& step = current(s);
                try
                {
                    if (call.tool == Tool::APICallObjectRecognitionAR)
                    {
                        auto const detection = detect_object(step, s.frame_ref, *vlm);
                        s.highlights = {detection.object_label};
                        auto const& b = detection.box;
                        return success("Recognized " + detection.object_label + " at (" + std::to_string(b.x_left)
                                           + ", " + std::to_string(b.y_top) + ", " + std::to_string(b.x_right) + ", "
                                           + std::to_string(b.y_bottom) + ").",
                                       {{"detection", to_json(detection)}, {"frame_ref", s.frame_ref}});
                    }
                    auto const verdict = check_assembly_state(s.frame_ref, step, *vlm);
                    auto message = "Step " + std::to_string(step.index)
                                   + (verdict.matches ? " matches the reference state." : " does not match the reference state.");
                    if (!verdict.rationale.empty())
                        message += " " + verdict.rationale;
                    return success(message,
                                   {{"step", step.index},
                                    {"verdict", to_json(verdict)},
                                    {"frame_ref", s.frame_ref}});
                }
                catch (const Error& e)
                {
                    auto response = failure(ToolError::VlmFailed, e.what());
                    response.data = {{"reason", std::string(to_string(e.code()))}};
                    return response;
                }
            }
        }
        return failure(ToolError::BadArgs, "unknown tool");
    }
} // namespace

std::span<const ToolSpec> list_tools() noexcept
{
    return registry;
}

const ToolSpec& tool_spec(Tool tool) noexcept
{
    return registry[static_cast<std::size_t>(tool)];
}

std::string_view tool_name(Tool tool) noexcept
{
    return tool_spec(tool).name;
}

std::optional<Tool> tool_from_name(std::string_view name) noexcept
{
    for (auto const& spec: registry)
        if (spec.name == name)
            return spec.tool;
    return std::nullopt;
}

bool is_vision_tool(Tool tool) noexcept
{
    return tool == Tool::APICallObjectRecognitionAR || tool == Tool::APICallCheckStepStatusAR;
}

json registry_json()
{
    json tools = json::array();
    for (auto const& spec: registry)
    {
        json args = json::object();
        for (auto const& arg: spec.args)
            args[std::string(arg.name)] = arg.type == ArgType::Integer ? "integer" : "direction";
        tools.push_back({{"name", spec.name}, {"description", spec.description}, {"args", std::move(args)}});
    }
    return {{"tools", std::move(tools)}};
}

std::string_view direction_name(Direction direction) noexcept
{
    switch (direction)
    {
        case Direction::None: return "None";
        case Direction::Up: return "Up";
        case Direction::Down: return "Down";
        case Direction::Left: return "Left";
        case Direction::Right: return "Right";
    }
    return "None";
}

std::optional<Direction> direction_from_name(std::string_view name) noexcept
{
    for (auto d: {Direction::None, Direction::Up, Direction::Down, Direction::Left, Direction::Right})
    {
        auto const candidate = direction_name(d);
        if (candidate.size() == name.size() && text::starts_with_icase(name, candidate))
            return d;
    }
    return std::nullopt;
}

ToolCall tool_call_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("name") || !j.at("name").is_string())
        throw Error(ErrorCode::SchemaError, "tool call needs a string 'name'");
    auto const name = j.at("name").get<std::string>();
    auto const tool = tool_from_name(name);
    if (!tool)
        throw Error(ErrorCode::SchemaError, "unknown tool '" + name + "'");
    ToolCall call;
    call.tool = *tool;
    if (j.contains("args") && !j.at("args").is_null())
    {
        if (!j.at("args").is_object())
            throw Error(ErrorCode::SchemaError, "tool call 'args' must be an object");
        call.args = j.at("args");
    }
    return call;
}

json to_json(const ToolCall& call)
{
    return {{"name", tool_name(call.tool)}, {"args", call.args}};
}

std::string_view tool_error_name(ToolError error) noexcept
{
    switch (error)
    {
        case ToolError::NotStarted: return "NotStarted";
        case ToolError::AlreadyStarted: return "AlreadyStarted";
        case ToolError::AtFinalStep: return "AtFinalStep";
        case ToolError::AtFirstStep: return "AtFirstStep";
        case ToolError::StepOutOfRange: return "StepOutOfRange";
        case ToolError::StepsIncomplete: return "StepsIncomplete";
        case ToolError::VlmUnavailable: return "VlmUnavailable";
        case ToolError::VlmFailed: return "VlmFailed";
        case ToolError::BadArgs: return "BadArgs";
    }
    return "BadArgs";
}

std::optional<ToolError> tool_error_from_name(std::string_view name) noexcept
{
    for (auto e: {ToolError::NotStarted,
                  ToolError::AlreadyStarted,
                  ToolError::AtFinalStep,
                  ToolError::AtFirstStep,
                  ToolError::StepOutOfRange,
                  ToolError::StepsIncomplete,
                  ToolError::VlmUnavailable,
                  ToolError::VlmFailed,
                  ToolError::BadArgs})
        if (tool_error_name(e) == name)
            return e;
    return std::nullopt;
}

json to_json(const ToolResponse& response)
{
    json j = {{"ok", response.ok}, {"message", response.message}, {"data", response.data}};
    j["error"] = response.error ? json(tool_error_name(*response.error)) : json(nullptr);
    return j;
}

ToolResponse tool_response_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("ok") || !j.at("ok").is_boolean())
        throw Error(ErrorCode::SchemaError, "tool response needs boolean 'ok'");
    ToolResponse response;
    response.ok = j.at("ok").get<bool>();
    response.message = j.value("message", std::string {});
    response.data = j.value("data", json::object());
    if (j.contains("error") && j.at("error").is_string())
    {
        response.error = tool_error_from_name(j.at("error").get<std::string>());
        if (!response.error)
            throw Error(ErrorCode::SchemaError, "unknown tool error '" + j.at("error").get<std::string>() + "'");
    }
    if (response.ok == response.error.has_value())
        throw Error(ErrorCode::SchemaError, "tool response 'ok' must be false exactly when 'error' is set");
    return response;
}

const std::string& AssemblySession::manual_id() const
{
    static const std::string none;
    return manual ? manual->id : none;
}

bool AssemblySession::is_step_completed(int step) const
{
    if (step < 1 || static_cast<std::size_t>(step) > step_completed.size())
        return false;
    return step_completed[static_cast<std::size_t>(step) - 1];
}

AssemblySession make_session(std::string session_id, std::shared_ptr<const InstructionManual> manual, std::string frame_ref)
{
    if (!manual)
        throw Error(ErrorCode::InvalidArgument, "session needs a manual");
    AssemblySession session;
    session.frame_ref = frame_ref.empty() ? "frame://" + session_id + "/current" : std::move(frame_ref);
    session.session_id = std::move(session_id);
    session.total_steps = static_cast<int>(manual->steps.size());
    session.step_completed.assign(manual->steps.size(), false);
    session.manual = std::move(manual);
    return session;
}

bool same_state(const AssemblySession& a, const AssemblySession& b)
{
    return a.session_id == b.session_id && a.manual_id() == b.manual_id() && a.frame_ref == b.frame_ref
           && a.current_step == b.current_step && a.total_steps == b.total_steps && a.started == b.started
           && a.finished == b.finished && a.exploded == b.exploded && a.zoom == b.zoom && a.rotation == b.rotation
           && a.highlights == b.highlights && a.step_completed == b.step_completed;
}

bool identical(const AssemblySession& a, const AssemblySession& b)
{
    return same_state(a, b) && a.tool_trace == b.tool_trace && a.step_marks == b.step_marks;
}

std::optional<std::string> check_invariants(const AssemblySession& s)
{
    if (!s.manual)
        return "session has no manual";
    if (s.total_steps != static_cast<int>(s.manual->steps.size()))
        return "total_steps does not match the manual";
    if (s.step_completed.size() != static_cast<std::size_t>(s.total_steps))
        return "step_completed has the wrong length";
    if (s.current_step < 0 || s.current_step > s.total_steps)
        return "current_step outside 0..total_steps";
    if (!s.started && s.current_step != 0)
        return "not started but current_step != 0";
    if (s.started && s.current_step < 1)
        return "started but current_step < 1";
    if (s.finished && std::find(s.step_completed.begin(), s.step_completed.end(), false) != s.step_completed.end())
        return "finished with incomplete steps";
    if (!(s.zoom >= min_zoom && s.zoom <= max_zoom))
        return "zoom outside [0.25, 4.0]";
    return std::nullopt;
}

ToolResponse apply_tool(AssemblySession& session, const ToolCall& call, VisionBackend* vlm, std::int64_t timestamp_ms)
{
    auto response = run_tool(session, call, vlm);
    session.tool_trace.push_back(TraceEntry {call, response, timestamp_ms});
    return response;
}

DispatchResult dispatch(const AssemblySession& session, const ToolCall& call, VisionBackend* vlm, std::int64_t timestamp_ms)
{
    DispatchResult result {session, {}};
    result.response = apply_tool(result.session, call, vlm, timestamp_ms);
    return result;
}

void set_step_completed(AssemblySession& session, int step, bool done)
{
    if (step < 1 || step > session.total_steps)
        throw Error(ErrorCode::StepOutOfRange,
                    "step " + std::to_string(step) + " outside 1.." + std::to_string(session.total_steps));
    if (session.finished && !done)
        throw Error(ErrorCode::SessionFinished, "cannot un-complete a step of a finished session");
    session.step_completed[static_cast<std::size_t>(step) - 1] = done;
    session.step_marks.push_back(StepMark {step, done, session.tool_trace.size()});
}

AssemblySession replay(std::string session_id,
                       std::shared_ptr<const InstructionManual> manual,
                       std::span<const TraceEntry> trace,
                       std::span<const StepMark> marks,
                       VisionBackend* vlm,
                       std::string frame_ref)
{
    auto session = make_session(std::move(session_id), std::move(manual), std::move(frame_ref));
    std::size_t next_mark = 0;
    auto apply_marks_at = [&](std::size_t position) {
        while (next_mark < marks.size() && marks[next_mark].trace_position <= position)
        {
            set_step_completed(session, marks[next_mark].step, marks[next_mark].done);
            ++next_mark;
        }
    };
    for (std::size_t i = 0; i < trace.size(); ++i)
    {
        apply_marks_at(i);
        apply_tool(session, trace[i].call, vlm, trace[i].timestamp_ms);
    }
    apply_marks_at(std::numeric_limits<std::size_t>::max());
    return session;
}

std::map<std::string, ToolUsage> tool_histogram(std::span<const Tool> calls)
{
    std::map<std::string, ToolUsage> histogram;
    for (auto tool: calls)
        ++histogram[std::string(tool_name(tool))].count;
    for (auto& [name, usage]: histogram)
        usage.fraction = static_cast<double>(usage.count) / static_cast<double>(calls.size());
    return histogram;
}

std::map<std::string, ToolUsage> trace_histogram(std::span<const AssemblySession> sessions)
{
    std::vector<Tool> calls;
    for (auto const& session: sessions)
        for (auto const& entry: session.tool_trace)
            calls.push_back(entry.call.tool);
    return tool_histogram(calls);
}

json state_json(const AssemblySession& s)
{
    json completed = json::array();
    for (bool done: s.step_completed)
        completed.push_back(done);
    return {
        {"session_id", s.session_id},
        {"manual_id", s.manual_id()},
        {"frame_ref", s.frame_ref},
        {"current_step", s.current_step},
        {"total_steps", s.total_steps},
        {"remaining_steps", s.total_steps - s.current_step},
        {"started", s.started},
        {"finished", s.finished},
        {"exploded", s.exploded},
        {"zoom", s.zoom},
        {"rotation", direction_name(s.rotation)},
        {"highlights", s.highlights},
        {"step_completed", std::move(completed)},
    };
}

void apply_state_json(AssemblySession& s, const json& state)
{
    try
    {
        s.current_step = state.at("current_step").get<int>();
        s.started = state.at("started").get<bool>();
        s.finished = state.at("finished").get<bool>();
        s.exploded = state.at("exploded").get<bool>();
        s.zoom = state.at("zoom").get<double>();
        auto const rotation = direction_from_name(state.at("rotation").get<std::string>());
        if (!rotation)
            throw Error(ErrorCode::SchemaError, "bad rotation in state");
        s.rotation = *rotation;
        s.highlights = state.at("highlights").get<std::set<std::string>>();
        s.step_completed = state.at("step_completed").get<std::vector<bool>>();
    }
    catch (const json::exception& e)
    {
        throw Error(ErrorCode::SchemaError, std::string("malformed state: ") + e.what());
    }
}

json to_json(const TraceEntry& entry)
{
    return {{"call", to_json(entry.call)}, {"response", to_json(entry.response)}, {"timestamp", entry.timestamp_ms}};
}

TraceEntry trace_entry_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("call") || !j.contains("response"))
        throw Error(ErrorCode::SchemaError, "trace entry needs 'call' and 'response'");
    return TraceEntry {tool_call_from_json(j.at("call")),
                       tool_response_from_json(j.at("response")),
                       j.value("timestamp", std::int64_t {0})};
}

std::string trace_to_jsonl(std::span<const TraceEntry> trace)
{
    std::string out;
    for (auto const& entry: trace)
    {
        out += to_json(entry).dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<TraceEntry> trace_from_jsonl(std::string_view jsonl)
{
    std::vector<TraceEntry> trace;
    for (auto line: text::split_lines(jsonl))
    {
        if (text::trim(line).empty())
            continue;
        try
        {
            trace.push_back(trace_entry_from_json(json::parse(line)));
        }
        catch (const json::parse_error& e)
        {
            throw Error(ErrorCode::SchemaError, std::string("bad trace line: ") + e.what());
        }
    }
    return trace;
}

} // namespace mrta
