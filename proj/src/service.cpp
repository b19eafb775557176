// SPDX-License-Identifier: Apache-2.0
#include <mrta/error.hpp>
#include <mrta/service.hpp>
#include <mrta/text.hpp>

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>
#include <variant>

namespace mrta
{

using nlohmann::json;

std::string_view event_type_name(EventType type) noexcept
{
    switch (type)
    {
        case EventType::State: return "state";
        case EventType::TrainerMessage: return "trainer_message";
        case EventType::TraineeMessage: return "trainee_message";
        case EventType::ToolCall: return "tool_call";
        case EventType::ToolResponse: return "tool_response";
        case EventType::VlmResult: return "vlm_result";
        case EventType::Error: return "error";
    }
    return "error";
}

std::optional<EventType> event_type_from_name(std::string_view name) noexcept
{
    for (auto type: {EventType::State, EventType::TrainerMessage, EventType::TraineeMessage, EventType::ToolCall,
                     EventType::ToolResponse, EventType::VlmResult, EventType::Error})
        if (event_type_name(type) == name)
            return type;
    return std::nullopt;
}

json to_json(const Event& event)
{
    return {
        {"seq", event.seq},
        {"type", event_type_name(event.type)},
        {"timestamp", event.timestamp_ms},
        {"payload", event.payload},
    };
}

Event event_from_json(const json& j)
{
    try
    {
        Event event;
        event.seq = j.at("seq").get<std::uint64_t>();
        auto const type = event_type_from_name(j.at("type").get<std::string>());
        if (!type)
            throw Error(ErrorCode::SchemaError, "unknown event type '" + j.at("type").get<std::string>() + "'");
        event.type = *type;
        event.timestamp_ms = j.value("timestamp", std::int64_t {0});
        event.payload = j.value("payload", json::object());
        return event;
    }
    catch (const json::exception& e)
    {
        throw Error(ErrorCode::SchemaError, std::string("malformed event: ") + e.what());
    }
}

BackendFactory config_backend_factory(json config, std::filesystem::path base_dir)
{
    return [config = std::move(config), base_dir = std::move(base_dir)](const json& override_config) {
        if (override_config.is_null())
            return make_backends(config, base_dir);
        if (!override_config.is_object())
            throw Error(ErrorCode::BackendConfigError, "'backend' must be an object");
        auto merged = config;
        for (auto const& [key, value]: override_config.items())
            merged[key] = value;
        return make_backends(merged, base_dir);
    };
}

std::string greeting_text(const ManualChunk& chunk)
{
    std::ostringstream out;
    out << "Hello, I am your virtual assembly assistant. Today we will build " << chunk.title;
    if (!chunk.steps.empty())
        out << ", steps " << chunk.steps.front().index << " to " << chunk.steps.back().index;
    out << ". Please confirm when you are ready to start the assembly.";
    return out.str();
}

namespace
{
    struct MessageCommand
    {
        std::string text;
    };

    struct StepCommand
    {
        int step = 0;
        bool done = false;
        std::shared_ptr<std::promise<json>> result;
    };

    using Command = std::variant<MessageCommand, StepCommand>;
} // namespace

struct SessionService::Session
{
    std::string id;
    std::shared_ptr<const InstructionManual> manual;
    ManualChunk chunk;
    std::int64_t created_at = 0;
    json backend_override;
    Backends backends;
    Clock clock;
    AgentOptions agent;

    // Held while the worker mutates state or memory; readers of either take it too.
    mutable std::mutex work_mutex;
    AssemblySession state;
    std::optional<Memory> memory;

    mutable std::mutex mutex;
    mutable std::condition_variable changed;
    std::vector<Event> events;
    json last_state;
    std::deque<Command> queue;
    bool busy = false;
    bool stopping = false;
    std::optional<std::ofstream> log;
    std::thread worker;

    void emit(EventType type, json payload, std::int64_t timestamp)
    {
        std::lock_guard lock(mutex);
        Event event {events.size() + 1, type, timestamp, std::move(payload)};
        if (type == EventType::State)
            last_state = event.payload;
        if (log)
        {
            *log << to_json(event).dump() << '\n';
            log->flush();
        }
        events.push_back(std::move(event));
        changed.notify_all();
    }

    json state_payload(std::string_view cause) const
    {
        return {
            {"session_id", id},
            {"manual_id", manual->id},
            {"chunk_index", chunk.chunk_index},
            {"created_at", created_at},
            {"cause", cause},
            {"state", state_json(state)},
        };
    }

    void run_message(const std::string& text)
    {
        std::lock_guard work(work_mutex);
        if (state.finished)
        {
            emit(EventType::Error,
                 {{"code", "SessionFinished"}, {"message", "the assembly is already finished"}, {"text", text}},
                 clock());
            return;
        }

        std::optional<Turn> stashed;
        bool corrected = false;
        auto observer = [&](const Turn& turn) {
            switch (turn.role)
            {
                case Role::Trainee: emit(EventType::TraineeMessage, {{"text", turn.content}}, turn.timestamp_ms); break;
                case Role::Trainer:
                    if (turn.tool_call)
                    {
                        emit(EventType::ToolCall,
                             {{"name", tool_name(turn.tool_call->tool)}, {"args", turn.tool_call->args}, {"raw", turn.content}},
                             turn.timestamp_ms);
                    }
                    else if (!corrected && find_tool_block(turn.content))
                        stashed = turn;
                    else
                        emit(EventType::TrainerMessage, {{"text", turn.content}}, turn.timestamp_ms);
                    break;
                case Role::System:
                    corrected = true;
                    emit(EventType::Error,
                         {{"code", "MalformedToolBlock"},
                          {"raw", stashed ? stashed->content : std::string {}},
                          {"raw_timestamp", stashed ? stashed->timestamp_ms : turn.timestamp_ms},
                          {"message", turn.content}},
                         turn.timestamp_ms);
                    stashed.reset();
                    break;
                case Role::Tool:
                case Role::Vlm: {
                    json response;
                    try
                    {
                        response = json::parse(turn.content);
                    }
                    catch (const json::parse_error&)
                    {
                        response = {{"ok", false}, {"message", turn.content}};
                    }
                    auto const name = turn.tool_call ? std::string(tool_name(turn.tool_call->tool)) : std::string {};
                    auto const args = turn.tool_call ? turn.tool_call->args : json::object();
                    emit(turn.role == Role::Vlm ? EventType::VlmResult : EventType::ToolResponse,
                         {{"name", name}, {"args", args}, {"response", std::move(response)}},
                         turn.timestamp_ms);
                    break;
                }
            }
        };

        try
        {
            auto const result = run_turn(*memory, state, text, *backends.llm, backends.vlm.get(), clock, agent, observer);
            if (result.outcome == TurnOutcome::MaxIterationsExceeded)
                emit(EventType::Error,
                     {{"code", "MaxIterationsExceeded"},
                      {"message", "the agent used " + std::to_string(agent.max_iterations) + " completions without replying"}},
                     clock());
        }
        catch (const Error& e)
        {
            emit(EventType::Error, {{"code", to_string(e.code())}, {"message", e.detail()}}, clock());
        }
        catch (const std::exception& e)
        {
            emit(EventType::Error, {{"code", "InternalError"}, {"message", e.what()}}, clock());
        }
        emit(EventType::State, state_payload("turn"), clock());
    }

    json run_step(int step, bool done)
    {
        std::lock_guard work(work_mutex);
        set_step_completed(state, step, done);
        auto payload = state_payload("step");
        payload["step"] = step;
        payload["done"] = done;
        emit(EventType::State, payload, clock());
        return payload;
    }

    void work()
    {
        while (true)
        {
            Command command;
            {
                std::unique_lock lock(mutex);
                changed.wait(lock, [&] { return stopping || !queue.empty(); });
                if (queue.empty())
                    return;
                command = std::move(queue.front());
                queue.pop_front();
                busy = true;
            }
            if (auto* message = std::get_if<MessageCommand>(&command))
                run_message(message->text);
            else
            {
                auto& step = std::get<StepCommand>(command);
                try
                {
                    step.result->set_value(run_step(step.step, step.done));
                }
                catch (...)
                {
                    step.result->set_exception(std::current_exception());
                }
            }
            {
                std::lock_guard lock(mutex);
                busy = false;
                changed.notify_all();
            }
        }
    }

    void start_worker()
    {
        worker = std::thread([this] { work(); });
    }

    void stop()
    {
        {
            std::lock_guard lock(mutex);
            stopping = true;
            changed.notify_all();
        }
        if (worker.joinable())
            worker.join();
    }
};

SessionService::SessionService(std::vector<InstructionManual> manuals, BackendFactory factory, ServiceOptions options):
    _manuals(std::move(manuals)), _factory(std::move(factory)), _options(std::move(options))
{
    if (!_factory)
        throw Error(ErrorCode::ConfigError, "session service needs a backend factory");
    if (!_options.clock)
        _options.clock = system_clock();
    for (auto const& manual: _manuals)
        _by_id.emplace(manual.id, std::make_shared<const InstructionManual>(manual));
    if (_options.log_dir)
    {
        std::error_code ec;
        std::filesystem::create_directories(*_options.log_dir, ec);
        if (ec)
            throw Error(ErrorCode::IoError, "cannot create log directory " + _options.log_dir->string());
    }
}

SessionService::~SessionService()
{
    shutdown();
}

void SessionService::shutdown()
{
    std::vector<std::shared_ptr<Session>> sessions;
    {
        std::lock_guard lock(_mutex);
        _stopping = true;
        for (auto const& [id, session]: _sessions)
            sessions.push_back(session);
    }
    for (auto const& session: sessions)
        session->stop();
}

bool SessionService::stopping() const
{
    std::lock_guard lock(_mutex);
    return _stopping;
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& session_id) const
{
    std::lock_guard lock(_mutex);
    auto const it = _sessions.find(session_id);
    if (it == _sessions.end())
        throw Error(ErrorCode::UnknownSession, "no session '" + session_id + "'");
    return it->second;
}

std::shared_ptr<SessionService::Session> SessionService::open_session(std::string session_id,
                                                                      const InstructionManual& manual,
                                                                      std::size_t chunk_index,
                                                                      const json& backend_override,
                                                                      std::int64_t created_at)
{
    auto const chunks = chunk_manual(manual, _options.chunk_size);
    if (chunk_index >= chunks.size())
        throw Error(ErrorCode::StepOutOfRange,
                    "manual '" + manual.id + "' has " + std::to_string(chunks.size()) + " chunk(s); index "
                        + std::to_string(chunk_index) + " is out of range");

    auto session = std::make_shared<Session>();
    session->id = std::move(session_id);
    session->manual = _by_id.at(manual.id);
    session->chunk = chunks[chunk_index];
    session->created_at = created_at;
    session->backend_override = backend_override;
    session->backends = _factory(backend_override);
    session->clock = _options.clock;
    session->agent = _options.agent;
    session->state = make_session(session->id, session->manual);
    return session;
}

json SessionService::create_session(const std::string& manual_id, std::size_t chunk_index, const json& backend_override)
{
    auto const it = _by_id.find(manual_id);
    if (it == _by_id.end())
        throw Error(ErrorCode::UnknownManual, "no manual '" + manual_id + "'");

    std::string id;
    {
        std::lock_guard lock(_mutex);
        if (_stopping)
            throw Error(ErrorCode::ConfigError, "service is shutting down");
        id = "sess-" + std::to_string(_next_id++);
    }

    auto const created_at = _options.clock();
    auto session = open_session(id, *it->second, chunk_index, backend_override, created_at);
    session->memory = Memory::start(session->chunk, created_at);

    if (_options.log_dir)
    {
        json const meta = {
            {"session_id", id},
            {"manual_id", manual_id},
            {"chunk_index", chunk_index},
            {"created_at", created_at},
            {"backend", backend_override},
        };
        std::ofstream(*_options.log_dir / (id + ".session.json")) << meta.dump(2) << '\n';
        session->log.emplace(*_options.log_dir / (id + ".events.jsonl"), std::ios::app);
    }

    auto const greeting = greeting_text(session->chunk);
    auto const greeted_at = _options.clock();
    session->memory->append(Turn {Role::Trainer, greeting, std::nullopt, greeted_at});
    session->emit(EventType::TrainerMessage, {{"text", greeting}, {"greeting", true}}, greeted_at);
    session->emit(EventType::State, session->state_payload("created"), _options.clock());

    session->start_worker();
    {
        std::lock_guard lock(_mutex);
        _sessions.emplace(id, session);
    }
    return session_view(id);
}

json SessionService::session_view(const std::string& session_id) const
{
    auto const session = find(session_id);
    std::lock_guard lock(session->mutex);
    return {
        {"session_id", session->id},
        {"manual_id", session->manual->id},
        {"chunk_index", session->chunk.chunk_index},
        {"created_at", session->created_at},
        {"state", session->last_state.value("state", json::object())},
        {"last_seq", session->events.size()},
        {"busy", session->busy},
        {"pending", session->queue.size()},
    };
}

void SessionService::post_message(const std::string& session_id, std::string text)
{
    auto const session = find(session_id);
    std::lock_guard lock(session->mutex);
    if (session->stopping)
        throw Error(ErrorCode::ConfigError, "service is shutting down");
    if (session->last_state.value("state", json::object()).value("finished", false))
        throw Error(ErrorCode::SessionFinished, "session '" + session_id + "' is finished");
    session->queue.emplace_back(MessageCommand {std::move(text)});
    session->changed.notify_all();
}

json SessionService::control_step(const std::string& session_id, int step, bool done)
{
    auto const session = find(session_id);
    auto promise = std::make_shared<std::promise<json>>();
    auto result = promise->get_future();
    {
        std::lock_guard lock(session->mutex);
        if (session->stopping)
            throw Error(ErrorCode::ConfigError, "service is shutting down");
        session->queue.emplace_back(StepCommand {step, done, promise});
        session->changed.notify_all();
    }
    return result.get();
}

std::vector<Event> SessionService::events_after(const std::string& session_id, std::uint64_t from_seq) const
{
    auto const session = find(session_id);
    std::lock_guard lock(session->mutex);
    if (from_seq >= session->events.size())
        return {};
    return {session->events.begin() + static_cast<std::ptrdiff_t>(from_seq), session->events.end()};
}

std::vector<Event> SessionService::wait_events(const std::string& session_id,
                                               std::uint64_t from_seq,
                                               std::chrono::milliseconds timeout) const
{
    auto const session = find(session_id);
    std::unique_lock lock(session->mutex);
    session->changed.wait_for(lock, timeout, [&] { return session->stopping || session->events.size() > from_seq; });
    if (from_seq >= session->events.size())
        return {};
    return {session->events.begin() + static_cast<std::ptrdiff_t>(from_seq), session->events.end()};
}

void SessionService::wait_idle(const std::string& session_id) const
{
    auto const session = find(session_id);
    std::unique_lock lock(session->mutex);
    session->changed.wait(lock, [&] { return session->stopping || (session->queue.empty() && !session->busy); });
}

AssemblySession SessionService::assembly(const std::string& session_id) const
{
    auto const session = find(session_id);
    std::lock_guard work(session->work_mutex);
    return session->state;
}

std::string SessionService::memory_jsonl(const std::string& session_id) const
{
    auto const session = find(session_id);
    std::lock_guard work(session->work_mutex);
    return session->memory->to_jsonl();
}

std::vector<std::string> SessionService::session_ids() const
{
    std::lock_guard lock(_mutex);
    std::vector<std::string> ids;
    for (auto const& [id, session]: _sessions)
        ids.push_back(id);
    return ids;
}

json SessionService::manuals_json() const
{
    json out = json::array();
    for (auto const& manual: _manuals)
    {
        json steps = json::array();
        for (auto const& step: manual.steps)
            steps.push_back(to_json(step));
        out.push_back({
            {"id", manual.id},
            {"title", manual.title},
            {"summary", manual.summary},
            {"step_count", manual.step_count()},
            {"chunk_count", chunk_manual(manual, _options.chunk_size).size()},
            {"steps", std::move(steps)},
        });
    }
    return {{"manuals", std::move(out)}};
}

namespace
{
    std::vector<Event> read_event_log(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in)
            throw Error(ErrorCode::IoError, "cannot open " + path.string());
        std::vector<Event> events;
        std::string line;
        while (std::getline(in, line))
        {
            if (text::trim(line).empty())
                continue;
            try
            {
                events.push_back(event_from_json(json::parse(line)));
            }
            catch (const json::parse_error& e)
            {
                throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
            }
            if (events.back().seq != events.size())
                throw Error(ErrorCode::SchemaError, path.string() + ": event sequence has a gap");
        }
        return events;
    }

    std::optional<ToolCall> call_from_payload(const json& payload)
    {
        if (!payload.contains("name") || payload.at("name").get<std::string>().empty())
            return std::nullopt;
        return tool_call_from_json({{"name", payload.at("name")}, {"args", payload.value("args", json::object())}});
    }
} // namespace

std::size_t SessionService::restore()
{
    if (!_options.log_dir)
        return 0;

    std::vector<std::filesystem::path> metas;
    for (auto const& entry: std::filesystem::directory_iterator(*_options.log_dir))
    {
        auto const name = entry.path().filename().string();
        if (name.ends_with(".session.json"))
            metas.push_back(entry.path());
    }
    std::sort(metas.begin(), metas.end());

    std::size_t restored = 0;
    for (auto const& meta_path: metas)
    {
        json meta;
        {
            std::ifstream in(meta_path);
            meta = json::parse(in);
        }
        auto const id = meta.at("session_id").get<std::string>();
        {
            std::lock_guard lock(_mutex);
            if (_sessions.contains(id))
                continue;
        }
        auto const manual_it = _by_id.find(meta.at("manual_id").get<std::string>());
        if (manual_it == _by_id.end())
            throw Error(ErrorCode::UnknownManual, meta_path.string() + " refers to an unknown manual");

        auto const created_at = meta.at("created_at").get<std::int64_t>();
        auto session = open_session(id, *manual_it->second, meta.at("chunk_index").get<std::size_t>(),
                                    meta.value("backend", json(nullptr)), created_at);
        session->memory = Memory::start(session->chunk, created_at);

        auto const log_path = *_options.log_dir / (id + ".events.jsonl");
        auto events = read_event_log(log_path);
        auto& memory = *session->memory;
        auto& state = session->state;
        for (auto const& event: events)
        {
            auto const& p = event.payload;
            switch (event.type)
            {
                case EventType::TraineeMessage:
                    memory.append(Turn {Role::Trainee, p.at("text").get<std::string>(), std::nullopt, event.timestamp_ms});
                    break;
                case EventType::TrainerMessage:
                    memory.append(Turn {Role::Trainer, p.at("text").get<std::string>(), std::nullopt, event.timestamp_ms});
                    break;
                case EventType::ToolCall:
                    memory.append(Turn {Role::Trainer, p.at("raw").get<std::string>(), call_from_payload(p), event.timestamp_ms});
                    break;
                case EventType::ToolResponse:
                case EventType::VlmResult: {
                    auto const call = call_from_payload(p);
                    auto const response = tool_response_from_json(p.at("response"));
                    memory.append(Turn {event.type == EventType::VlmResult ? Role::Vlm : Role::Tool,
                                        to_json(response).dump(), call, event.timestamp_ms});
                    if (call)
                        state.tool_trace.push_back(TraceEntry {*call, response, event.timestamp_ms});
                    break;
                }
                case EventType::Error:
                    if (p.value("code", std::string {}) == "MalformedToolBlock")
                    {
                        memory.append(Turn {Role::Trainer, p.at("raw").get<std::string>(), std::nullopt,
                                            p.at("raw_timestamp").get<std::int64_t>()});
                        memory.append(Turn {Role::System, p.at("message").get<std::string>(), std::nullopt, event.timestamp_ms});
                    }
                    break;
                case EventType::State:
                    apply_state_json(state, p.at("state"));
                    if (p.value("cause", std::string {}) == "step")
                        state.step_marks.push_back(StepMark {p.at("step").get<int>(), p.at("done").get<bool>(), state.tool_trace.size()});
                    break;
            }
        }
        {
            std::lock_guard lock(session->mutex);
            session->events = std::move(events);
            for (auto it = session->events.rbegin(); it != session->events.rend(); ++it)
            {
                if (it->type == EventType::State)
                {
                    session->last_state = it->payload;
                    break;
                }
            }
            session->log.emplace(log_path, std::ios::app);
        }

        auto const suffix = id.substr(id.find('-') + 1);
        session->start_worker();
        {
            std::lock_guard lock(_mutex);
            if (std::all_of(suffix.begin(), suffix.end(), [](char c) { return c >= '0' && c <= '9'; }) && !suffix.empty())
                _next_id = std::max<std::uint64_t>(_next_id, std::stoull(suffix) + 1);
            _sessions.emplace(id, session);
        }
        ++restored;
    }
    return restored;
}

} // namespace mrta
