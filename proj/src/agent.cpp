// SPDX-License-Identifier: Apache-2.0
#include <mrta/agent.hpp>
#include <mrta/error.hpp>
#include <mrta/prompts.hpp>
#include <mrta/text.hpp>

#include <sstream>

namespace mrta
{

using nlohmann::json;

std::string_view role_name(Role role) noexcept
{
    switch (role)
    {
        case Role::System: return "system";
        case Role::Trainer: return "trainer";
        case Role::Trainee: return "trainee";
        case Role::Tool: return "tool";
        case Role::Vlm: return "vlm";
    }
    return "system";
}

std::optional<Role> role_from_name(std::string_view name) noexcept
{
    for (auto role: {Role::System, Role::Trainer, Role::Trainee, Role::Tool, Role::Vlm})
        if (role_name(role) == name)
            return role;
    return std::nullopt;
}

json to_json(const Turn& turn)
{
    return {
        {"role", role_name(turn.role)},
        {"content", turn.content},
        {"tool_call", turn.tool_call ? to_json(*turn.tool_call) : json(nullptr)},
        {"timestamp", turn.timestamp_ms},
    };
}

Turn turn_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("role") || !j.at("role").is_string() || !j.contains("content")
        || !j.at("content").is_string())
        throw Error(ErrorCode::SchemaError, "turn needs string 'role' and 'content'");
    auto const role = role_from_name(j.at("role").get<std::string>());
    if (!role)
        throw Error(ErrorCode::SchemaError, "unknown turn role '" + j.at("role").get<std::string>() + "'");
    Turn turn;
    turn.role = *role;
    turn.content = j.at("content").get<std::string>();
    if (j.contains("tool_call") && !j.at("tool_call").is_null())
        turn.tool_call = tool_call_from_json(j.at("tool_call"));
    turn.timestamp_ms = j.value("timestamp", std::int64_t {0});
    return turn;
}

Memory::Memory(ManualChunk grounding, std::string system_prompt, std::int64_t timestamp_ms):
    _grounding(std::move(grounding))
{
    _turns.push_back(Turn {Role::System, std::move(system_prompt), std::nullopt, timestamp_ms});
}

Memory Memory::start(ManualChunk grounding, std::int64_t timestamp_ms)
{
    auto prompt = render_system_prompt(grounding, list_tools());
    return Memory(std::move(grounding), std::move(prompt), timestamp_ms);
}

Memory Memory::from_jsonl(ManualChunk grounding, std::string_view jsonl)
{
    Memory memory;
    memory._grounding = std::move(grounding);
    for (auto line: text::split_lines(jsonl))
    {
        if (text::trim(line).empty())
            continue;
        try
        {
            memory._turns.push_back(turn_from_json(json::parse(line)));
        }
        catch (const json::parse_error& e)
        {
            throw Error(ErrorCode::SchemaError, std::string("bad memory line: ") + e.what());
        }
    }
    if (memory._turns.empty() || memory._turns.front().role != Role::System)
        throw Error(ErrorCode::SchemaError, "memory must start with a system turn");
    return memory;
}

void Memory::append(Turn turn)
{
    _turns.push_back(std::move(turn));
}

std::vector<ChatMessage> Memory::to_messages() const
{
    std::vector<ChatMessage> messages;
    messages.reserve(_turns.size());
    for (auto const& turn: _turns)
    {
        switch (turn.role)
        {
            case Role::System: messages.push_back({"system", turn.content}); break;
            case Role::Trainer: messages.push_back({"assistant", turn.content}); break;
            case Role::Trainee: messages.push_back({"user", turn.content}); break;
            case Role::Tool:
            case Role::Vlm: {
                auto const name = turn.tool_call ? std::string(tool_name(turn.tool_call->tool)) : std::string("tool");
                auto const label = turn.role == Role::Vlm ? "[vision result] " : "[tool result] ";
                messages.push_back({"user", label + name + ": " + turn.content});
                break;
            }
        }
    }
    return messages;
}

std::string Memory::to_jsonl() const
{
    std::string out;
    for (auto const& turn: _turns)
    {
        out += to_json(turn).dump();
        out.push_back('\n');
    }
    return out;
}

std::string render_system_prompt(const ManualChunk& chunk, std::span<const ToolSpec> tools)
{
    std::ostringstream out;
    out << prompts::assistant_persona << "\n\n";
    out << "# Instruction manual\n" << render_chunk_text(chunk) << '\n';
    out << "# Tools\n";
    for (auto const& spec: tools)
    {
        out << spec.name << ": " << spec.description;
        if (!spec.args.empty())
        {
            out << " (args:";
            for (auto const& arg: spec.args)
                out << ' ' << arg.name << '=' << (arg.type == ArgType::Integer ? "integer" : "direction");
            out << ')';
        }
        out << '\n';
    }
    out << '\n' << prompts::tool_call_syntax;
    return out.str();
}

json to_json(const AgentAction& action)
{
    return std::visit(
        [](const auto& a) -> json {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, Respond>)
                return {{"kind", "respond"}, {"text", a.text}};
            else if constexpr (std::is_same_v<T, CallTool>)
                return {{"kind", "call_tool"}, {"call", to_json(a.call)}};
            else
                return {{"kind", "call_vlm"},
                        {"task", a.task == VlmTask::ObjectDetection ? "object_detection" : "state_check"},
                        {"call", to_json(a.call)}};
        },
        action);
}

std::optional<ToolBlock> find_tool_block(std::string_view text)
{
    constexpr std::string_view open = "```tool";
    std::size_t search = 0;
    while (true)
    {
        auto const start = text.find(open, search);
        if (start == std::string_view::npos)
            return std::nullopt;
        auto line_end = text.find('\n', start);
        auto const tag_rest = text.substr(start + open.size(),
                                          (line_end == std::string_view::npos ? text.size() : line_end) - start - open.size());
        // "```tools" or "```toolkit" are not tool fences.
        if (!text::trim(tag_rest).empty())
        {
            search = start + open.size();
            continue;
        }
        ToolBlock block;
        block.begin = start;
        if (line_end == std::string_view::npos)
        {
            block.end = text.size();
            block.closed = false;
            return block;
        }
        auto const body_start = line_end + 1;
        auto const close = text.find("```", body_start);
        if (close == std::string_view::npos)
        {
            block.body = std::string(text::trim(text.substr(body_start)));
            block.end = text.size();
            block.closed = false;
            return block;
        }
        block.body = std::string(text::trim(text.substr(body_start, close - body_start)));
        block.end = close + 3;
        return block;
    }
}

AgentAction parse_action(std::string_view llm_output)
{
    auto const block = find_tool_block(llm_output);
    if (!block)
        return Respond {std::string(llm_output)};
    if (!block->closed)
        throw Error(ErrorCode::MalformedToolBlock, "unterminated ```tool fence");
    json body;
    try
    {
        body = json::parse(block->body);
    }
    catch (const json::parse_error&)
    {
        throw Error(ErrorCode::MalformedToolBlock, "tool block is not valid JSON");
    }
    ToolCall call;
    try
    {
        call = tool_call_from_json(body);
    }
    catch (const Error& e)
    {
        throw Error(ErrorCode::MalformedToolBlock, e.detail());
    }
    if (call.tool == Tool::APICallObjectRecognitionAR)
        return CallVlm {VlmTask::ObjectDetection, std::move(call)};
    if (call.tool == Tool::APICallCheckStepStatusAR)
        return CallVlm {VlmTask::StateCheck, std::move(call)};
    return CallTool {std::move(call)};
}

std::string render_tool_block(const ToolCall& call)
{
    return "```tool\n" + to_json(call).dump() + "\n```";
}

TurnResult run_turn(Memory& memory,
                    AssemblySession& session,
                    std::string_view user_message,
                    LlmBackend& llm,
                    VisionBackend* vlm,
                    const Clock& clock,
                    const AgentOptions& options,
                    const TurnObserver& observer)
{
    auto record = [&](Role role,
                      std::string content,
                      std::optional<ToolCall> call = std::nullopt,
                      std::optional<std::int64_t> timestamp = std::nullopt) {
        memory.append(Turn {role, std::move(content), std::move(call), timestamp ? *timestamp : clock()});
        if (observer)
            observer(memory.turns().back());
    };

    TurnResult result;
    record(Role::Trainee, std::string(user_message));

    bool corrected = false;
    for (int iteration = 0; iteration < options.max_iterations; ++iteration)
    {
        auto const output = llm.complete(memory.to_messages());

        AgentAction action;
        try
        {
            action = parse_action(output);
        }
        catch (const Error& e)
        {
            if (e.code() != ErrorCode::MalformedToolBlock)
                throw;
            if (!corrected)
            {
                corrected = true;
                record(Role::Trainer, output);
                record(Role::System,
                       std::string(corrective_prompt_prefix) + e.detail()
                           + ". Reply again with one valid ```tool block or with plain text.");
                continue;
            }
            action = Respond {output};
        }

        if (auto const* respond = std::get_if<Respond>(&action))
        {
            record(Role::Trainer, respond->text);
            result.reply = respond->text;
            return result;
        }

        auto const& call = std::holds_alternative<CallTool>(action) ? std::get<CallTool>(action).call
                                                                     : std::get<CallVlm>(action).call;
        auto const observation_role = std::holds_alternative<CallVlm>(action) ? Role::Vlm : Role::Tool;
        record(Role::Trainer, output, call);
        auto const timestamp = clock();
        auto const response = apply_tool(session, call, vlm, timestamp);
        record(observation_role, to_json(response).dump(), call, timestamp);
        result.actions.push_back(std::move(action));
    }

    result.outcome = TurnOutcome::MaxIterationsExceeded;
    result.reply = std::string(apology_reply);
    record(Role::Trainer, result.reply);
    return result;
}

} // namespace mrta
