// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <mrta/error.hpp>
#include <mrta/service.hpp>

#include <thread>

#include <doctest.h>

using namespace mrta;
using nlohmann::json;

namespace
{
BackendFactory chat_factory()
{
    auto const config = load_backend_config(testing::data_dir() / "backends" / "chat.json");
    return config_backend_factory(config, config["base_dir"].get<std::string>());
}

ServiceOptions logical_options(std::optional<std::filesystem::path> log_dir = std::nullopt)
{
    ServiceOptions options;
    options.clock = logical_clock(1'700'000'000'000, 10);
    options.log_dir = std::move(log_dir);
    return options;
}

ErrorCode error_of(const std::function<void()>& action)
{
    try
    {
        action();
    }
    catch (const Error& e)
    {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::IoError;
}

std::vector<std::string> types_of(const std::vector<Event>& events)
{
    std::vector<std::string> out;
    for (auto const& e: events)
        out.emplace_back(event_type_name(e.type));
    return out;
}

/// Greeting, StartAssemble, GetCurrentStep, NextStep twice, all steps marked, FinishedVideo.
std::string run_full_flow(SessionService& service)
{
    auto const id = service.create_session("mini-racer")["session_id"].get<std::string>();
    for (auto const* text: {"I am ready", "Where am I?", "Next please", "Next please"})
        service.post_message(id, text);
    service.wait_idle(id);
    for (int step = 1; step <= 3; ++step)
        (void)service.control_step(id, step, true);
    service.post_message(id, "I have finished");
    service.wait_idle(id);
    std::string log;
    for (auto const& event: service.events_after(id, 0))
        log += to_json(event).dump() + "\n";
    return log + service.memory_jsonl(id);
}
} // namespace

TEST_CASE("event json round trip")
{
    Event const event {3, EventType::ToolCall, 42, {{"name", "NextStep"}}};
    CHECK(event_from_json(to_json(event)) == event);
    CHECK(to_json(event)["type"] == "tool_call");
    CHECK(error_of([] { (void)event_from_json(json {{"seq", 1}, {"type", "noise"}}); }) == ErrorCode::SchemaError);
    CHECK(error_of([] { (void)event_from_json(json {{"type", "state"}}); }) == ErrorCode::SchemaError);
    for (auto type: {EventType::State, EventType::TrainerMessage, EventType::TraineeMessage, EventType::ToolCall,
                     EventType::ToolResponse, EventType::VlmResult, EventType::Error})
        CHECK(event_type_from_name(event_type_name(type)) == type);
}

TEST_CASE("creating a session greets the trainee")
{
    SessionService service(testing::fixture_manuals(), chat_factory(), logical_options());
    auto const view = service.create_session("mini-racer");
    CHECK(view["manual_id"] == "mini-racer");
    CHECK(view["chunk_index"] == 0);
    CHECK(view["last_seq"] == 2);
    CHECK(view["state"]["current_step"] == 0);
    auto const events = service.events_after(view["session_id"], 0);
    REQUIRE(events.size() == 2);
    CHECK(events[0].seq == 1);
    CHECK(events[0].type == EventType::TrainerMessage);
    CHECK(events[0].payload["greeting"] == true);
    CHECK(events[0].payload["text"].get<std::string>().find("confirm") != std::string::npos);
    CHECK(events[1].type == EventType::State);
    CHECK(events[1].payload["cause"] == "created");
    CHECK(service.events_after(view["session_id"], 1).size() == 1);
    CHECK(service.events_after(view["session_id"], 99).empty());

    CHECK(error_of([&] { (void)service.create_session("space-shuttle"); }) == ErrorCode::UnknownManual);
    CHECK(error_of([&] { (void)service.create_session("mini-racer", 5); }) == ErrorCode::StepOutOfRange);
    CHECK(error_of([&] { (void)service.session_view("sess-404"); }) == ErrorCode::UnknownSession);
    CHECK(error_of([&] { service.post_message("sess-404", "hi"); }) == ErrorCode::UnknownSession);
    CHECK(error_of([&] { (void)service.events_after("sess-404", 0); }) == ErrorCode::UnknownSession);
    CHECK(error_of([&] { (void)service.create_session("mini-racer", 0, json::array()); }) == ErrorCode::BackendConfigError);
    CHECK(service.session_ids().size() == 1);
}

TEST_CASE("messages drive the agent and stream events")
{
    SessionService service(testing::fixture_manuals(), chat_factory(), logical_options());
    auto const id = service.create_session("mini-racer")["session_id"].get<std::string>();
    service.post_message(id, "I am ready");
    auto const first = service.wait_events(id, 2, std::chrono::seconds(5));
    REQUIRE_FALSE(first.empty());
    CHECK(first.front().seq == 3);
    service.wait_idle(id);
    auto const events = service.events_after(id, 2);
    CHECK(types_of(events)
          == std::vector<std::string> {"trainee_message", "tool_call", "tool_response", "trainer_message", "state"});
    CHECK(events[1].payload["name"] == "StartAssemble");
    CHECK(events[2].payload["response"]["ok"] == true);
    CHECK(events[4].payload["state"]["started"] == true);
    CHECK(events[4].payload["state"]["current_step"] == 1);
    auto const view = service.session_view(id);
    CHECK(view["busy"] == false);
    CHECK(view["pending"] == 0);
    CHECK(view["last_seq"] == 7);
    CHECK(service.wait_events(id, 7, std::chrono::milliseconds(50)).empty());
}

TEST_CASE("step control and finishing")
{
    SessionService service(testing::fixture_manuals(), chat_factory(), logical_options());
    auto const id = service.create_session("mini-racer")["session_id"].get<std::string>();
    auto const marked = service.control_step(id, 2, true);
    CHECK(marked["cause"] == "step");
    CHECK(marked["step"] == 2);
    CHECK(marked["state"]["step_completed"] == json::array({false, true, false}));
    CHECK(error_of([&] { (void)service.control_step(id, 0, true); }) == ErrorCode::StepOutOfRange);
    CHECK(error_of([&] { (void)service.control_step(id, 4, true); }) == ErrorCode::StepOutOfRange);
    CHECK(service.control_step(id, 2, false)["state"]["step_completed"] == json::array({false, false, false}));
    CHECK(service.assembly(id).step_marks.size() == 2);
}

TEST_CASE("a finished session refuses further messages")
{
    SessionService service(testing::fixture_manuals(), chat_factory(), logical_options());
    (void)run_full_flow(service);
    auto const id = service.session_ids().front();
    auto const state = service.assembly(id);
    CHECK(state.finished);
    CHECK(state.current_step == 3);
    CHECK(state.tool_trace.size() == 5);
    CHECK(state.tool_trace.back().call.tool == Tool::FinishedVideo);
    CHECK(service.session_view(id)["state"]["finished"] == true);
    CHECK(error_of([&] { service.post_message(id, "again"); }) == ErrorCode::SessionFinished);
    CHECK(error_of([&] { (void)service.control_step(id, 1, false); }) == ErrorCode::SessionFinished);
}

TEST_CASE("the full flow is byte-identical across runs")
{
    SessionService a(testing::fixture_manuals(), chat_factory(), logical_options());
    SessionService b(testing::fixture_manuals(), chat_factory(), logical_options());
    auto const first = run_full_flow(a);
    auto const second = run_full_flow(b);
    CHECK(first == second);
    CHECK(first.find("Congratulations") != std::string::npos);
}

TEST_CASE("backend failures become error events")
{
    ServiceOptions options = logical_options();
    SessionService service(
        testing::fixture_manuals(),
        [](const json&) {
            Backends b;
            b.llm = std::make_unique<ScriptedBackend>(std::vector<std::string> {"only once"});
            return b;
        },
        options);
    auto const id = service.create_session("tow-truck")["session_id"].get<std::string>();
    service.post_message(id, "hello");
    service.post_message(id, "hello again");
    service.wait_idle(id);
    auto const events = service.events_after(id, 2);
    CHECK(types_of(events)
          == std::vector<std::string> {"trainee_message", "trainer_message", "state", "trainee_message", "error", "state"});
    CHECK(events[4].payload["code"] == "ScriptExhausted");
}

TEST_CASE("malformed tool blocks are reported and corrected")
{
    SessionService service(
        testing::fixture_manuals(),
        [](const json&) {
            Backends b;
            b.llm = std::make_unique<ScriptedBackend>(std::vector<std::string> {
                "```tool\nnot json\n```", "```tool\n{\"name\": \"StartAssemble\"}\n```", "Started."});
            return b;
        },
        logical_options());
    auto const id = service.create_session("mini-racer")["session_id"].get<std::string>();
    service.post_message(id, "go");
    service.wait_idle(id);
    auto const events = service.events_after(id, 2);
    CHECK(types_of(events)
          == std::vector<std::string> {"trainee_message", "error", "tool_call", "tool_response", "trainer_message", "state"});
    CHECK(events[1].payload["code"] == "MalformedToolBlock");
    CHECK(events[1].payload["raw"] == "```tool\nnot json\n```");
}

TEST_CASE("sessions are persisted and restored")
{
    testing::TempDir dir;
    std::string id;
    std::string memory;
    json state;
    std::vector<TraceEntry> trace;
    std::vector<StepMark> marks;
    std::vector<Event> events;
    {
        SessionService service(testing::fixture_manuals(), chat_factory(), logical_options(dir.path()));
        id = service.create_session("mini-racer")["session_id"].get<std::string>();
        service.post_message(id, "I am ready");
        service.post_message(id, "Next please");
        service.wait_idle(id);
        (void)service.control_step(id, 1, true);
        memory = service.memory_jsonl(id);
        auto const live = service.assembly(id);
        state = state_json(live);
        trace = live.tool_trace;
        marks = live.step_marks;
        events = service.events_after(id, 0);
    }
    CHECK(std::filesystem::exists(dir / (id + ".session.json")));
    CHECK(std::filesystem::exists(dir / (id + ".events.jsonl")));
    auto const meta = json::parse(testing::read_file(dir / (id + ".session.json")));
    CHECK(meta["manual_id"] == "mini-racer");

    SessionService restored(testing::fixture_manuals(), chat_factory(), logical_options(dir.path()));
    CHECK(restored.restore() == 1);
    CHECK(restored.restore() == 0);
    CHECK(restored.memory_jsonl(id) == memory);
    auto const back = restored.assembly(id);
    CHECK(state_json(back) == state);
    CHECK(back.tool_trace == trace);
    CHECK(back.step_marks == marks);
    CHECK(restored.events_after(id, 0) == events);

    auto const next = restored.create_session("tow-truck")["session_id"].get<std::string>();
    CHECK(next != id);
    (void)restored.control_step(id, 2, true);
    CHECK(restored.events_after(id, 0).size() == events.size() + 1);

    testing::TempDir broken;
    testing::write_file(broken / "sess-1.session.json",
                        R"({"session_id": "sess-1", "manual_id": "mini-racer", "chunk_index": 0, "created_at": 0})");
    testing::write_file(broken / "sess-1.events.jsonl", "{\"seq\": 2, \"type\": \"state\", \"payload\": {}}\n");
    SessionService bad(testing::fixture_manuals(), chat_factory(), logical_options(broken.path()));
    CHECK(error_of([&] { (void)bad.restore(); }) == ErrorCode::SchemaError);
}

TEST_CASE("sessions run concurrently and independently")
{
    SessionService service(testing::fixture_manuals(), chat_factory(), logical_options());
    std::vector<std::string> ids;
    for (int i = 0; i < 6; ++i)
        ids.push_back(service.create_session(i % 2 ? "monster-truck" : "mini-racer")["session_id"].get<std::string>());
    std::vector<std::thread> threads;
    for (auto const& id: ids)
        threads.emplace_back([&service, id] {
            for (auto const* text: {"I am ready", "Where am I?", "Next please"})
                service.post_message(id, text);
        });
    for (auto& t: threads)
        t.join();
    for (auto const& id: ids)
    {
        service.wait_idle(id);
        auto const state = service.assembly(id);
        CHECK(state.tool_trace.size() == 3);
        CHECK(state.current_step == 2);
        CHECK(service.events_after(id, 0).size() == 2 + 3 * 5);
    }
}

TEST_CASE("shutdown wakes waiters and rejects work")
{
    SessionService service(testing::fixture_manuals(), chat_factory(), logical_options());
    auto const id = service.create_session("mini-racer")["session_id"].get<std::string>();
    std::vector<Event> got {Event {}};
    std::thread waiter([&] { got = service.wait_events(id, 2, std::chrono::seconds(30)); });
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    auto const started = std::chrono::steady_clock::now();
    service.shutdown();
    waiter.join();
    CHECK(got.empty());
    CHECK(std::chrono::steady_clock::now() - started < std::chrono::seconds(5));
    CHECK(service.stopping());
    CHECK(error_of([&] { service.post_message(id, "hi"); }) == ErrorCode::ConfigError);
    CHECK(error_of([&] { (void)service.create_session("mini-racer"); }) == ErrorCode::ConfigError);
    service.shutdown();
}

TEST_CASE("manual listing")
{
    SessionService service(testing::fixture_manuals(), chat_factory(), logical_options());
    auto const listing = service.manuals_json()["manuals"];
    REQUIRE(listing.size() == 3);
    CHECK(listing[0]["id"] == "mini-racer");
    CHECK(listing[0]["step_count"] == 3);
    CHECK(listing[0]["chunk_count"] == 1);
    CHECK(listing[0]["steps"].size() == 3);
    CHECK(greeting_text(chunk_manual(service.manuals()[0], 10)[0]).find("steps 1 to 3") != std::string::npos);
    CHECK(error_of([] { SessionService none({}, BackendFactory {}, {}); }) == ErrorCode::ConfigError);
}
