// SPDX-License-Identifier: Apache-2.0
#include <mrta/agent.hpp>
#include <mrta/error.hpp>
#include <mrta/forge.hpp>
#include <mrta/prompts.hpp>
#include <mrta/text.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace mrta
{

using nlohmann::json;

std::string_view speaker_name(Speaker speaker) noexcept
{
    return speaker == Speaker::Trainer ? "Trainer" : "Trainee";
}

std::string render_utterance(const ConversationTurn& turn)
{
    if (!turn.tool_call)
        return turn.text;
    if (turn.text.empty())
        return render_tool_block(*turn.tool_call);
    return turn.text + "\n" + render_tool_block(*turn.tool_call);
}

namespace
{
    std::optional<Speaker> speaker_from_name(std::string_view name)
    {
        if (name == "Trainer")
            return Speaker::Trainer;
        if (name == "Trainee")
            return Speaker::Trainee;
        return std::nullopt;
    }

    json turn_json(const ConversationTurn& turn)
    {
        return {
            {"speaker", speaker_name(turn.speaker)},
            {"text", turn.text},
            {"section", turn.section},
            {"tool_call", turn.tool_call ? to_json(*turn.tool_call) : json(nullptr)},
            {"tool_response", turn.tool_response ? to_json(*turn.tool_response) : json(nullptr)},
        };
    }
} // namespace

json to_json(const ConversationRecord& record)
{
    json turns = json::array();
    for (auto const& turn: record.turns)
        turns.push_back(turn_json(turn));
    return {
        {"conv_id", record.conv_id},
        {"manual_id", record.manual_id},
        {"chunk_index", record.chunk_index},
        {"section_titles", record.section_titles},
        {"turns", std::move(turns)},
    };
}

ConversationRecord conversation_from_json(const json& j)
{
    try
    {
        ConversationRecord record;
        record.conv_id = j.at("conv_id").get<std::string>();
        record.manual_id = j.at("manual_id").get<std::string>();
        record.chunk_index = j.at("chunk_index").get<std::size_t>();
        record.section_titles = j.at("section_titles").get<std::vector<std::string>>();
        for (auto const& t: j.at("turns"))
        {
            ConversationTurn turn;
            auto const speaker = speaker_from_name(t.at("speaker").get<std::string>());
            if (!speaker)
                throw Error(ErrorCode::SchemaError, "unknown speaker '" + t.at("speaker").get<std::string>() + "'");
            turn.speaker = *speaker;
            turn.text = t.at("text").get<std::string>();
            turn.section = t.value("section", -1);
            if (t.contains("tool_call") && !t.at("tool_call").is_null())
                turn.tool_call = tool_call_from_json(t.at("tool_call"));
            if (t.contains("tool_response") && !t.at("tool_response").is_null())
                turn.tool_response = tool_response_from_json(t.at("tool_response"));
            record.turns.push_back(std::move(turn));
        }
        return record;
    }
    catch (const json::exception& e)
    {
        throw Error(ErrorCode::SchemaError, std::string("bad conversation record: ") + e.what());
    }
}

json to_json(const ContextResponsePair& pair)
{
    return {
        {"conv_id", pair.conv_id},
        {"turn_index", pair.turn_index},
        {"context", pair.context},
        {"response", pair.response},
    };
}

json to_json(const VqaPair& pair)
{
    return {
        {"query", pair.query},
        {"image_ref", pair.image_ref},
        {"answer", pair.answer},
        {"manual_id", pair.manual_id},
        {"step_index", pair.step_index},
    };
}

std::size_t sample_tool_count(Rng& rng)
{
    return 1 + static_cast<std::size_t>(rng.below(max_tools_per_conversation));
}

namespace
{
    constexpr std::array<Direction, 4> turning_directions {Direction::Up, Direction::Down, Direction::Left, Direction::Right};

    ToolCall simple_call(Tool tool, json args = json::object())
    {
        return ToolCall {tool, std::move(args)};
    }

    void go_to(AssemblySession& session, int step)
    {
        static_cast<void>(apply_tool(session, simple_call(Tool::GoToStep, {{"step", step}}), nullptr));
    }
} // namespace

std::vector<SimulatedTool> simulate_tool_responses(std::uint64_t seed,
                                                   const InstructionManual& manual,
                                                   const ManualChunk& chunk,
                                                   VisionBackend* vlm)
{
    if (chunk.steps.empty())
        throw Error(ErrorCode::InvalidArgument, "chunk has no steps");

    Rng rng(seed);
    auto const k = sample_tool_count(rng);

    std::vector<Tool> pool;
    for (auto const& spec: list_tools())
        pool.push_back(spec.tool);
    for (std::size_t i = 0; i < k; ++i)
    {
        auto const j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }

    auto const shared = std::make_shared<const InstructionManual>(manual);
    auto const first = chunk.steps.front().index;
    auto const last = chunk.steps.back().index;
    auto const total = static_cast<int>(manual.step_count());

    std::vector<SimulatedTool> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
    {
        auto const tool = pool[i];
        auto session = make_session("simulation", shared);
        if (tool != Tool::StartAssemble)
        {
            static_cast<void>(apply_tool(session, simple_call(Tool::StartAssemble), nullptr));
            go_to(session, first);
        }

        ToolCall call = simple_call(tool);
        switch (tool)
        {
            case Tool::NextStep:
                if (first == total && total > 1)
                    go_to(session, total - 1);
                break;
            case Tool::FrontStep:
                if (first == 1 && total > 1)
                    go_to(session, std::min(last == 1 ? 2 : last, total));
                break;
            case Tool::Recover: static_cast<void>(apply_tool(session, simple_call(Tool::Explode), nullptr)); break;
            case Tool::FinishedVideo:
                for (int step = 1; step <= total; ++step)
                    set_step_completed(session, step, true);
                break;
            case Tool::GoToStep: call.args = {{"step", rng.between(first, last)}}; break;
            case Tool::Rotate:
                call.args = {{"direction", direction_name(turning_directions[rng.below(turning_directions.size())])}};
                break;
            default: break;
        }

        auto response = apply_tool(session, call, vlm);
        out.push_back(SimulatedTool {std::move(call), std::move(response)});
    }
    return out;
}

std::string render_conversation_system_prompt(std::span<const ToolSpec> tools)
{
    std::ostringstream out;
    out << prompts::conversation_task_brief << "\n\n" << prompts::conversation_task_full << "\n\n";
    out << "The XR application provides the following tools:\n";
    for (auto const& spec: tools)
        out << "- " << spec.name << ": " << spec.description << '\n';
    out << '\n' << prompts::transcript_format;
    return out.str();
}

std::string render_conversation_query(const ManualChunk& chunk, std::span<const SimulatedTool> tools)
{
    std::ostringstream out;
    out << render_chunk_text(chunk) << '\n' << prompts::tool_response_lead << '\n';
    for (auto const& sim: tools)
        out << "- " << tool_name(sim.call.tool) << ' ' << sim.call.args.dump() << " -> " << to_json(sim.response).dump()
            << '\n';
    return out.str();
}

namespace
{
    struct Tagged
    {
        Speaker speaker;
        std::string_view rest;
    };

    // Accepts "Trainer:", "**Trainer:**", "**Trainer**:", "- Trainee:" and similar decorations.
    std::optional<Tagged> speaker_tag(std::string_view line)
    {
        auto const skip = [](std::string_view s, std::string_view chars) {
            auto const pos = s.find_first_not_of(chars);
            return pos == std::string_view::npos ? std::string_view {} : s.substr(pos);
        };
        auto s = skip(line, "*-_> \t");
        std::optional<Speaker> speaker;
        if (text::starts_with_icase(s, "trainer"))
            speaker = Speaker::Trainer;
        else if (text::starts_with_icase(s, "trainee"))
            speaker = Speaker::Trainee;
        if (!speaker)
            return std::nullopt;
        s = skip(s.substr(7), "*_ \t");
        if (s.empty() || s.front() != ':')
            return std::nullopt;
        s = skip(s.substr(1), "*_ \t");
        return Tagged {*speaker, s};
    }

    struct PendingTurn
    {
        Speaker speaker;
        std::string raw;
        int section;
    };
} // namespace

ConversationRecord parse_transcript(std::string_view transcript,
                                    std::string conv_id,
                                    const ManualChunk& chunk,
                                    std::span<const SimulatedTool> tools)
{
    ConversationRecord record;
    record.conv_id = std::move(conv_id);
    record.manual_id = chunk.manual_id;
    record.chunk_index = chunk.chunk_index;

    std::vector<bool> used(tools.size(), false);
    std::optional<PendingTurn> pending;
    bool in_fence = false;

    auto const close_turn = [&] {
        if (!pending)
            return;
        ConversationTurn turn;
        turn.speaker = pending->speaker;
        turn.section = pending->section;
        std::string remaining = pending->raw;
        if (auto block = find_tool_block(remaining))
        {
            auto const line = std::to_string(record.turns.size() + 1);
            if (!block->closed)
                throw Error(ErrorCode::TranscriptParseError, "turn " + line + ": unterminated tool block");
            try
            {
                turn.tool_call = tool_call_from_json(json::parse(block->body));
            }
            catch (const std::exception& e)
            {
                throw Error(ErrorCode::TranscriptParseError, "turn " + line + ": invalid tool block (" + e.what() + ")");
            }
            remaining = remaining.substr(0, block->begin) + " " + remaining.substr(block->end);
            if (find_tool_block(remaining))
                throw Error(ErrorCode::TranscriptParseError, "turn " + line + ": more than one tool block");
            for (std::size_t i = 0; i < tools.size(); ++i)
            {
                if (!used[i] && tools[i].call.tool == turn.tool_call->tool)
                {
                    used[i] = true;
                    turn.tool_response = tools[i].response;
                    break;
                }
            }
        }
        turn.text = text::collapse_whitespace(remaining);
        record.turns.push_back(std::move(turn));
        pending.reset();
    };

    for (auto const line: text::split_lines(transcript))
    {
        auto const trimmed = text::trim(line);
        if (in_fence)
        {
            if (pending)
                pending->raw += "\n" + std::string(trimmed);
            if (trimmed.starts_with("```"))
                in_fence = false;
            continue;
        }
        if (trimmed.starts_with("#"))
        {
            close_turn();
            auto const title = text::trim(trimmed.substr(trimmed.find_first_not_of('#')));
            auto const clean = text::collapse_whitespace(title);
            if (!clean.empty())
                record.section_titles.push_back(clean);
            continue;
        }
        if (auto tag = speaker_tag(trimmed))
        {
            close_turn();
            pending = PendingTurn {tag->speaker, std::string(tag->rest),
                                   static_cast<int>(record.section_titles.size()) - 1};
        }
        else if (pending && !trimmed.empty())
            pending->raw += "\n" + std::string(trimmed);
        else
            continue;

        auto const fence = trimmed.find("```tool");
        if (fence != std::string_view::npos && trimmed.find("```", fence + 3) == std::string_view::npos)
            in_fence = true;
    }
    close_turn();

    if (record.turns.empty())
        throw Error(ErrorCode::TranscriptParseError, "no speaker-tagged turns found");
    return record;
}

ConversationRecord generate_conversation(const ManualChunk& chunk,
                                         std::span<const SimulatedTool> tools,
                                         LlmBackend& llm,
                                         std::string conv_id)
{
    std::vector<ChatMessage> messages {
        {"system", render_conversation_system_prompt(list_tools())},
        {"user", render_conversation_query(chunk, tools)},
    };
    auto const output = llm.complete(messages);
    return parse_transcript(output, std::move(conv_id), chunk, tools);
}

std::string_view violation_name(Violation violation) noexcept
{
    switch (violation)
    {
        case Violation::EmptyConversation: return "EmptyConversation";
        case Violation::FirstSpeakerNotTrainer: return "FirstSpeakerNotTrainer";
        case Violation::NonAlternatingSpeakers: return "NonAlternatingSpeakers";
        case Violation::MissingSectionTitles: return "MissingSectionTitles";
        case Violation::SectionWithoutEngagement: return "SectionWithoutEngagement";
        case Violation::MissingClosingProtocol: return "MissingClosingProtocol";
    }
    return "Unknown";
}

std::vector<Violation> validate_conversation(const ConversationRecord& record)
{
    auto const& turns = record.turns;
    if (turns.empty())
        return {Violation::EmptyConversation};

    std::vector<Violation> out;
    if (turns.front().speaker != Speaker::Trainer)
        out.push_back(Violation::FirstSpeakerNotTrainer);
    for (std::size_t i = 1; i < turns.size(); ++i)
    {
        if (turns[i].speaker == turns[i - 1].speaker)
        {
            out.push_back(Violation::NonAlternatingSpeakers);
            break;
        }
    }

    if (record.section_titles.empty())
        out.push_back(Violation::MissingSectionTitles);

    auto const n = turns.size();
    auto const closing_start = n >= 4 ? n - 4 : 0;
    for (std::size_t section = 0; section < record.section_titles.size(); ++section)
    {
        bool engaged = false;
        bool any = false;
        bool only_closing = true;
        for (std::size_t i = 0; i < n; ++i)
        {
            if (turns[i].section != static_cast<int>(section))
                continue;
            any = true;
            only_closing = only_closing && i >= closing_start;
            engaged = engaged || turns[i].tool_call
                      || (turns[i].speaker == Speaker::Trainee && turns[i].text.find('?') != std::string::npos);
        }
        // A section that only holds the closing exchange needs no question of its own.
        if (!engaged && !(any && only_closing))
        {
            out.push_back(Violation::SectionWithoutEngagement);
            break;
        }
    }

    bool const closing = n >= 4 && turns[n - 4].speaker == Speaker::Trainer
                         && text::contains_icase(turns[n - 4].text, "accomplish")
                         && turns[n - 3].speaker == Speaker::Trainee && turns[n - 2].speaker == Speaker::Trainer
                         && text::contains_icase(turns[n - 2].text, "experience")
                         && turns[n - 1].speaker == Speaker::Trainee;
    if (!closing)
        out.push_back(Violation::MissingClosingProtocol);
    return out;
}

VqaBuild build_vqa_dataset(const std::vector<InstructionManual>& manuals, VisionBackend& vlm)
{
    VqaBuild out;
    for (auto const& manual: manuals)
    {
        for (auto const& step: manual.steps)
        {
            if (!step.image_ref)
                continue;
            try
            {
                auto const detection = detect_object(step, *step.image_ref, vlm);
                out.pairs.push_back(VqaPair {build_detection_query(step), *step.image_ref, detection.canonical(),
                                             manual.id, step.index});
            }
            catch (const Error&)
            {
                ++out.dropped;
            }
        }
    }
    return out;
}

std::vector<ContextResponsePair> extract_pairs(std::span<const ConversationRecord> records)
{
    std::vector<ContextResponsePair> out;
    for (auto const& record: records)
    {
        std::string context;
        for (std::size_t i = 0; i < record.turns.size(); ++i)
        {
            auto const& turn = record.turns[i];
            auto const utterance = render_utterance(turn);
            if (turn.speaker == Speaker::Trainer && i > 0 && !utterance.empty())
                out.push_back(ContextResponsePair {record.conv_id, i, context, utterance});
            if (!context.empty())
                context.push_back('\n');
            context += std::string(speaker_name(turn.speaker)) + ": " + utterance;
        }
    }
    return out;
}

DatasetSplit split_dataset(std::span<const ContextResponsePair> pairs, double test_fraction, std::uint64_t seed)
{
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw Error(ErrorCode::InvalidArgument, "test_fraction must lie strictly between 0 and 1");

    std::vector<std::string> conversations;
    std::unordered_map<std::string, std::size_t> sizes;
    for (auto const& pair: pairs)
        if (sizes[pair.conv_id]++ == 0)
            conversations.push_back(pair.conv_id);

    Rng rng(seed);
    rng.shuffle(conversations);

    auto const target = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(pairs.size())));
    std::set<std::string> test_ids;
    std::size_t test_size = 0;
    for (auto const& id: conversations)
    {
        if (test_size >= target)
            break;
        test_ids.insert(id);
        test_size += sizes[id];
    }

    DatasetSplit split;
    for (auto const& pair: pairs)
        (test_ids.contains(pair.conv_id) ? split.test : split.train).push_back(pair);
    return split;
}

namespace
{
    void count_tokens(std::map<std::string, std::size_t>& counts, const TokenSequence& tokens)
    {
        for (auto const& token: tokens)
            ++counts[token];
    }

    TokenCounts top(const std::map<std::string, std::size_t>& counts, std::size_t k)
    {
        TokenCounts out(counts.begin(), counts.end());
        std::stable_sort(out.begin(), out.end(), [](auto const& a, auto const& b) { return a.second > b.second; });
        if (out.size() > k)
            out.resize(k);
        return out;
    }

    double mean(std::size_t sum, std::size_t n)
    {
        return n == 0 ? 0.0 : static_cast<double>(sum) / static_cast<double>(n);
    }
} // namespace

DatasetStats dataset_stats(std::span<const ConversationRecord> records,
                           std::span<const ContextResponsePair> pairs,
                           std::span<const VqaPair> vqa,
                           const std::vector<InstructionManual>& manuals,
                           const Tokenizer& tokenizer,
                           std::size_t top_k)
{
    DatasetStats stats;
    stats.conversations = records.size();

    std::map<std::string, std::size_t> conversation_counts;
    std::size_t trainer_tokens = 0;
    std::size_t trainee_tokens = 0;
    std::vector<Tool> calls;
    for (auto const& record: records)
    {
        for (auto const& turn: record.turns)
        {
            auto const tokens = tokenizer(turn.text);
            count_tokens(conversation_counts, tokens);
            stats.total_tokens += tokens.size();
            ++stats.utterances;
            if (turn.speaker == Speaker::Trainer)
            {
                ++stats.trainer_utterances;
                trainer_tokens += tokens.size();
            }
            else
            {
                ++stats.trainee_utterances;
                trainee_tokens += tokens.size();
            }
            if (turn.tool_call)
                calls.push_back(turn.tool_call->tool);
        }
    }
    stats.unique_tokens = conversation_counts.size();
    stats.avg_utterances_per_conversation = mean(stats.utterances, stats.conversations);
    stats.avg_tokens_trainer = mean(trainer_tokens, stats.trainer_utterances);
    stats.avg_tokens_trainee = mean(trainee_tokens, stats.trainee_utterances);

    stats.pairs = pairs.size();
    std::size_t context_tokens = 0;
    std::size_t response_tokens = 0;
    for (auto const& pair: pairs)
    {
        context_tokens += tokenizer(pair.context).size();
        response_tokens += tokenizer(pair.response).size();
    }
    stats.avg_context_tokens = mean(context_tokens, pairs.size());
    stats.avg_response_tokens = mean(response_tokens, pairs.size());

    std::map<std::string, std::size_t> instruction_counts;
    std::map<std::string, std::size_t> entity_counts;
    for (auto const& manual: manuals)
    {
        for (auto const& step: manual.steps)
            for (auto const& sentence: step.instructions)
                count_tokens(instruction_counts, tokenizer(sentence));
        for (auto const& entity: manual.theme_entities)
            count_tokens(entity_counts, tokenizer(entity.surface));
    }
    std::map<std::string, std::size_t> vqa_counts;
    for (auto const& pair: vqa)
    {
        count_tokens(vqa_counts, tokenizer(pair.query));
        count_tokens(vqa_counts, tokenizer(pair.answer));
    }
    stats.vqa_pairs = vqa.size();

    stats.top_tokens["instructions"] = top(instruction_counts, top_k);
    stats.top_tokens["entities"] = top(entity_counts, top_k);
    stats.top_tokens["conversations"] = top(conversation_counts, top_k);
    stats.top_tokens["vqa"] = top(vqa_counts, top_k);
    stats.tool_calls = tool_histogram(calls);
    return stats;
}

json to_json(const DatasetStats& stats)
{
    json top = json::object();
    for (auto const& [slice, counts]: stats.top_tokens)
    {
        json entries = json::array();
        for (auto const& [token, count]: counts)
            entries.push_back({{"token", token}, {"count", count}});
        top[slice] = std::move(entries);
    }
    json tools = json::object();
    for (auto const& [name, usage]: stats.tool_calls)
        tools[name] = {{"count", usage.count}, {"fraction", usage.fraction}};
    return {
        {"conversations", stats.conversations},
        {"utterances", stats.utterances},
        {"trainer_utterances", stats.trainer_utterances},
        {"trainee_utterances", stats.trainee_utterances},
        {"total_tokens", stats.total_tokens},
        {"unique_tokens", stats.unique_tokens},
        {"avg_utterances_per_conversation", stats.avg_utterances_per_conversation},
        {"avg_tokens_trainer", stats.avg_tokens_trainer},
        {"avg_tokens_trainee", stats.avg_tokens_trainee},
        {"pairs", stats.pairs},
        {"avg_context_tokens", stats.avg_context_tokens},
        {"avg_response_tokens", stats.avg_response_tokens},
        {"vqa_pairs", stats.vqa_pairs},
        {"top_tokens", std::move(top)},
        {"tool_calls", std::move(tools)},
    };
}

namespace
{
    constexpr std::array<UserRequirement, 7> user_requirements {{
        {"3D Model Interaction",
         "Create 3D models of the LEGO pieces and the Monster Truck assembly. Trainees can interact with these 3D "
         "models using hand gestures and voice commands, making it easier to understand the assembly process."},
        {"Step-by-Step Guidance",
         "Display step-by-step instructions directly in the trainees' field of view. This can include both visual "
         "instructions and written or spoken guidance."},
        {"Real-Time Feedback",
         "Provide real-time feedback to trainees as they assemble the LEGO set. Use AR to highlight the correct "
         "attachment points and components, and indicate when they've completed a step correctly."},
        {"Object Recognition",
         "Implement object recognition so that HoloLens 2 can identify LEGO pieces and highlight them when trainees "
         "look at them. This can help trainees quickly find the right pieces."},
        {"Progress Tracking",
         "Keep track of trainees' progress and provide them with an overview of the steps they have completed and "
         "those remaining. This can help them stay organized and motivated."},
        {"Troubleshooting Assistance",
         "Include a troubleshooting mode that guides trainees through common problems and solutions they might "
         "encounter during the assembly."},
        {"Data Logging",
         "Collect data on trainees' performance and interaction with the AR training system to analyze their "
         "progress and make improvements to the training process."},
    }};

    std::optional<std::string> bullet_text(std::string_view line)
    {
        auto s = text::trim(line);
        if (s.empty())
            return std::nullopt;
        if (s.starts_with("- ") || s.starts_with("* ") || s.starts_with("+ "))
            s = s.substr(2);
        else if (s.starts_with("\xE2\x80\xA2"))
            s = s.substr(3);
        else
        {
            std::size_t digits = 0;
            while (digits < s.size() && s[digits] >= '0' && s[digits] <= '9')
                ++digits;
            if (digits == 0 || digits + 1 >= s.size() || (s[digits] != '.' && s[digits] != ')') || s[digits + 1] != ' ')
                return std::nullopt;
            s = s.substr(digits + 2);
        }
        auto const item = text::collapse_whitespace(s);
        if (item.empty())
            return std::nullopt;
        return item;
    }
} // namespace

std::span<const UserRequirement> canonical_user_requirements() noexcept
{
    return user_requirements;
}

std::string render_requirements_prompt(std::span<const InstructionManual> manual_sample)
{
    std::ostringstream out;
    out << prompts::requirements_task << '\n';
    for (auto const& manual: manual_sample)
    {
        for (auto const& chunk: chunk_manual(manual, std::max<std::size_t>(manual.step_count(), 1)))
            out << '\n' << render_chunk_text(chunk);
    }
    return out.str();
}

std::vector<std::string> generate_user_requirements(std::span<const InstructionManual> manual_sample, LlmBackend& llm)
{
    std::vector<ChatMessage> messages {{"user", render_requirements_prompt(manual_sample)}};
    auto const output = llm.complete(messages);
    std::vector<std::string> out;
    for (auto const line: text::split_lines(output))
        if (auto item = bullet_text(line))
            out.push_back(std::move(*item));
    if (out.empty())
        throw Error(ErrorCode::EmptyOutput, "the model returned no requirement bullets");
    return out;
}

json to_json(const ForgeConfig& config)
{
    return {
        {"seed", config.seed},
        {"chunk_size", config.chunk_size},
        {"test_fraction", config.test_fraction},
        {"top_k", config.top_k},
        {"user_requirements", config.user_requirements},
    };
}

std::string conversation_id(const ManualChunk& chunk)
{
    return chunk.manual_id + "-c" + std::to_string(chunk.chunk_index);
}

namespace
{
    std::string hex64(std::uint64_t value)
    {
        char buffer[17];
        std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(value));
        return buffer;
    }
} // namespace

ForgeOutput run_forge(const std::vector<InstructionManual>& manuals,
                      const ForgeConfig& config,
                      LlmBackend& llm,
                      VisionBackend* vlm)
{
    if (manuals.empty())
        throw Error(ErrorCode::InvalidArgument, "no manuals to generate from");

    ForgeOutput out;
    out.config = config;

    for (auto const& manual: manuals)
    {
        for (auto const& chunk: chunk_manual(manual, config.chunk_size))
        {
            auto const id = conversation_id(chunk);
            auto const tools = simulate_tool_responses(derive_seed(config.seed, id), manual, chunk, vlm);
            ConversationRecord record;
            try
            {
                record = generate_conversation(chunk, tools, llm, id);
            }
            catch (const Error& e)
            {
                if (e.code() != ErrorCode::TranscriptParseError)
                    throw;
                out.unparseable.emplace_back(id, e.detail());
                continue;
            }
            auto violations = validate_conversation(record);
            if (violations.empty())
                out.conversations.push_back(std::move(record));
            else
                out.rejected.push_back(RejectedConversation {std::move(record), std::move(violations)});
        }
    }

    out.pairs = extract_pairs(out.conversations);
    out.split = split_dataset(out.pairs, config.test_fraction, derive_seed(config.seed, "split"));
    if (vlm)
        out.vqa = build_vqa_dataset(manuals, *vlm);
    if (config.user_requirements)
        out.user_requirements = generate_user_requirements(manuals, llm);
    out.stats = dataset_stats(out.conversations, out.pairs, out.vqa.pairs, manuals, tokenize, config.top_k);

    auto const config_json = to_json(config);
    json rejected = json::array();
    for (auto const& r: out.rejected)
    {
        json names = json::array();
        for (auto v: r.violations)
            names.push_back(violation_name(v));
        rejected.push_back({{"conv_id", r.record.conv_id}, {"violations", std::move(names)}});
    }
    json unparseable = json::array();
    for (auto const& [id, reason]: out.unparseable)
        unparseable.push_back({{"conv_id", id}, {"reason", reason}});

    out.manifest = {
        {"counts",
         {{"conversations", out.conversations.size()},
          {"utterances", out.stats.utterances},
          {"pairs", out.pairs.size()},
          {"vqa", out.vqa.pairs.size()}}},
        {"split", {{"train", out.split.train.size()}, {"test", out.split.test.size()}}},
        {"config", config_json},
        {"config_hash", hex64(fnv1a64(config_json.dump()))},
        {"seed", config.seed},
        {"context_includes_manual", false},
        {"rejected", std::move(rejected)},
        {"unparseable", std::move(unparseable)},
        {"vqa_dropped", out.vqa.dropped},
        {"vision_backend", vlm != nullptr},
        {"stats", to_json(out.stats)},
    };
    return out;
}

void write_forge_output(const ForgeOutput& output, const std::filesystem::path& out_dir)
{
    namespace fs = std::filesystem;

    std::vector<std::pair<std::string, std::string>> files;
    {
        std::string lines;
        for (auto const& record: output.conversations)
            lines += to_json(record).dump() + "\n";
        files.emplace_back("conversations.jsonl", std::move(lines));
    }
    {
        std::set<std::pair<std::string, std::size_t>> test;
        for (auto const& pair: output.split.test)
            test.emplace(pair.conv_id, pair.turn_index);
        std::string lines;
        for (auto const& pair: output.pairs)
        {
            auto j = to_json(pair);
            j["split"] = test.contains({pair.conv_id, pair.turn_index}) ? "test" : "train";
            lines += j.dump() + "\n";
        }
        files.emplace_back("pairs.jsonl", std::move(lines));
    }
    {
        std::string lines;
        for (auto const& pair: output.vqa.pairs)
            lines += to_json(pair).dump() + "\n";
        files.emplace_back("vqa.jsonl", std::move(lines));
    }
    if (output.user_requirements)
        files.emplace_back("requirements.json", json(*output.user_requirements).dump(2) + "\n");
    files.emplace_back("manifest.json", output.manifest.dump(2) + "\n");

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

    std::vector<fs::path> staged;
    auto const cleanup = [&] {
        for (auto const& path: staged)
        {
            std::error_code ignored;
            fs::remove(path, ignored);
        }
    };
    for (auto const& [name, content]: files)
    {
        auto const path = out_dir / (name + ".partial");
        staged.push_back(path);
        std::ofstream stream(path, std::ios::binary | std::ios::trunc);
        stream << content;
        stream.close();
        if (!stream)
        {
            cleanup();
            throw Error(ErrorCode::IoError, "cannot write " + path.string());
        }
    }
    for (std::size_t i = 0; i < files.size(); ++i)
    {
        fs::rename(staged[i], out_dir / files[i].first, ec);
        if (ec)
        {
            cleanup();
            throw Error(ErrorCode::IoError, "cannot move " + staged[i].string() + " into place: " + ec.message());
        }
    }
}

} // namespace mrta
