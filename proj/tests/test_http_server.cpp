// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <mrta/assembly.hpp>
#include <mrta/error.hpp>
#include <mrta/http_server.hpp>

#include <atomic>
#include <mutex>

#include <doctest.h>
#include <httplib.h>

using namespace mrta;
using nlohmann::json;

namespace
{
struct Harness
{
    explicit Harness(HttpServerOptions options = {}):
        service(testing::fixture_manuals(), factory(), service_options()), server(service, std::move(options))
    {
        REQUIRE(server.bind("127.0.0.1", 0));
        server.start();
        client.emplace("127.0.0.1", server.port());
        client->set_read_timeout(10, 0);
    }
    ~Harness()
    {
        server.stop();
        service.shutdown();
    }

    static BackendFactory factory()
    {
        auto const config = load_backend_config(testing::data_dir() / "backends" / "chat.json");
        return config_backend_factory(config, config["base_dir"].get<std::string>());
    }
    static ServiceOptions service_options()
    {
        ServiceOptions options;
        options.clock = logical_clock(1'000, 1);
        return options;
    }

    httplib::Result post(const std::string& path, const json& body)
    {
        return client->Post(path, body.dump(), "application/json");
    }
    std::string create(const std::string& manual = "mini-racer")
    {
        auto const res = post("/sessions", {{"manual_id", manual}});
        REQUIRE(res);
        REQUIRE(res->status == 201);
        return json::parse(res->body)["session_id"].get<std::string>();
    }

    SessionService service;
    HttpServer server;
    std::optional<httplib::Client> client;
};

void check_error(const httplib::Result& res, int status, const std::string& code)
{
    REQUIRE(res);
    CHECK(res->status == status);
    auto const body = json::parse(res->body);
    CHECK(body["error"] == code);
    CHECK(body["message"].is_string());
}

/// Parses complete SSE frames into (id, event, data).
std::vector<std::tuple<std::uint64_t, std::string, json>> parse_sse(const std::string& stream)
{
    std::vector<std::tuple<std::uint64_t, std::string, json>> frames;
    std::size_t pos = 0;
    while (true)
    {
        auto const end = stream.find("\n\n", pos);
        if (end == std::string::npos)
            break;
        auto const frame = stream.substr(pos, end - pos);
        pos = end + 2;
        if (frame.starts_with(":"))
            continue;
        std::uint64_t id = 0;
        std::string type;
        json data;
        std::size_t line_start = 0;
        while (line_start <= frame.size())
        {
            auto line_end = frame.find('\n', line_start);
            if (line_end == std::string::npos)
                line_end = frame.size();
            auto const line = frame.substr(line_start, line_end - line_start);
            if (line.starts_with("id: "))
                id = std::stoull(line.substr(4));
            else if (line.starts_with("event: "))
                type = line.substr(7);
            else if (line.starts_with("data: "))
                data = json::parse(line.substr(6));
            line_start = line_end + 1;
        }
        frames.emplace_back(id, type, data);
    }
    return frames;
}
} // namespace

TEST_CASE("status mapping")
{
    CHECK(http_status_for(ErrorCode::UnknownSession) == 404);
    CHECK(http_status_for(ErrorCode::UnknownManual) == 404);
    CHECK(http_status_for(ErrorCode::SessionFinished) == 409);
    CHECK(http_status_for(ErrorCode::StepOutOfRange) == 400);
    CHECK(http_status_for(ErrorCode::InvalidArgument) == 400);
    CHECK(http_status_for(ErrorCode::IoError) == 500);
}

TEST_CASE("session routes")
{
    Harness h;
    auto const created = h.post("/sessions", {{"manual_id", "mini-racer"}, {"chunk_index", 0}});
    REQUIRE(created);
    CHECK(created->status == 201);
    auto const view = json::parse(created->body);
    auto const id = view["session_id"].get<std::string>();
    CHECK(view["last_seq"] == 2);

    auto const got = h.client->Get("/sessions/" + id);
    REQUIRE(got);
    CHECK(got->status == 200);
    CHECK(json::parse(got->body)["manual_id"] == "mini-racer");

    auto const posted = h.post("/sessions/" + id + "/messages", {{"text", "I am ready"}});
    REQUIRE(posted);
    CHECK(posted->status == 202);
    CHECK(json::parse(posted->body) == json {{"accepted", true}, {"session_id", id}});
    h.service.wait_idle(id);

    auto const step = h.post("/sessions/" + id + "/steps/1", {{"done", true}});
    REQUIRE(step);
    CHECK(step->status == 200);
    CHECK(json::parse(step->body)["state"]["step_completed"][0] == true);

    auto const tools = h.client->Get("/tools");
    REQUIRE(tools);
    CHECK(json::parse(tools->body) == registry_json());
    auto const manuals = h.client->Get("/manuals");
    REQUIRE(manuals);
    CHECK(json::parse(manuals->body) == h.service.manuals_json());
}

TEST_CASE("error responses")
{
    Harness h;
    auto const id = h.create();
    check_error(h.post("/sessions", {{"manual_id", "space-shuttle"}}), 404, "UnknownManual");
    check_error(h.post("/sessions", {{"manual", "mini-racer"}}), 400, "InvalidArgument");
    check_error(h.post("/sessions", {{"manual_id", "mini-racer"}, {"chunk_index", -1}}), 400, "InvalidArgument");
    check_error(h.post("/sessions", {{"manual_id", "mini-racer"}, {"chunk_index", 3}}), 400, "StepOutOfRange");
    check_error(h.client->Post("/sessions", "{oops", "application/json"), 400, "SchemaError");
    check_error(h.client->Get("/sessions/sess-999"), 404, "UnknownSession");
    check_error(h.client->Get("/sessions/sess-999/events?follow=0"), 404, "UnknownSession");
    check_error(h.post("/sessions/sess-999/messages", {{"text", "hi"}}), 404, "UnknownSession");
    check_error(h.post("/sessions/" + id + "/messages", {{"text", "   "}}), 400, "InvalidArgument");
    check_error(h.post("/sessions/" + id + "/messages", {{"body", "hi"}}), 400, "InvalidArgument");
    check_error(h.post("/sessions/" + id + "/steps/9", {{"done", true}}), 400, "StepOutOfRange");
    check_error(h.post("/sessions/" + id + "/steps/two", {{"done", true}}), 400, "StepOutOfRange");
    check_error(h.post("/sessions/" + id + "/steps/1", {{"done", "yes"}}), 400, "InvalidArgument");
    check_error(h.client->Get("/sessions/" + id + "/events?follow=0&from_seq=-3"), 400, "InvalidArgument");
}

TEST_CASE("finished sessions answer 409")
{
    Harness h;
    auto const id = h.create();
    for (auto const* text: {"ready", "where", "next", "next"})
        REQUIRE(h.post("/sessions/" + id + "/messages", {{"text", text}})->status == 202);
    h.service.wait_idle(id);
    for (int step = 1; step <= 3; ++step)
        REQUIRE(h.post("/sessions/" + id + "/steps/" + std::to_string(step), {{"done", true}})->status == 200);
    REQUIRE(h.post("/sessions/" + id + "/messages", {{"text", "done"}})->status == 202);
    h.service.wait_idle(id);
    CHECK(json::parse(h.client->Get("/sessions/" + id)->body)["state"]["finished"] == true);
    check_error(h.post("/sessions/" + id + "/messages", {{"text", "more"}}), 409, "SessionFinished");
    check_error(h.post("/sessions/" + id + "/steps/1", {{"done", false}}), 409, "SessionFinished");
}

TEST_CASE("event backlog honours from_seq and Last-Event-ID")
{
    Harness h;
    auto const id = h.create();
    h.post("/sessions/" + id + "/messages", {{"text", "I am ready"}});
    h.service.wait_idle(id);

    auto const all = h.client->Get("/sessions/" + id + "/events?follow=0");
    REQUIRE(all);
    CHECK(all->status == 200);
    CHECK(all->get_header_value("Content-Type").starts_with("text/event-stream"));
    auto const frames = parse_sse(all->body);
    REQUIRE(frames.size() == 7);
    for (std::size_t i = 0; i < frames.size(); ++i)
    {
        auto const& [seq, type, data] = frames[i];
        CHECK(seq == i + 1);
        CHECK(data["seq"] == seq);
        CHECK(data["type"] == type);
    }
    CHECK(std::get<1>(frames[0]) == "trainer_message");

    auto const tail = h.client->Get("/sessions/" + id + "/events?follow=0&from_seq=5");
    CHECK(parse_sse(tail->body).size() == 2);
    auto const resumed = h.client->Get("/sessions/" + id + "/events?follow=0", {{"Last-Event-ID", "6"}});
    auto const resumed_frames = parse_sse(resumed->body);
    REQUIRE(resumed_frames.size() == 1);
    CHECK(std::get<0>(resumed_frames[0]) == 7);
}

TEST_CASE("live stream delivers new events and heartbeats")
{
    HttpServerOptions options;
    options.heartbeat = std::chrono::milliseconds(100);
    Harness h(options);
    auto const id = h.create();

    std::mutex mutex;
    std::string received;
    std::atomic<bool> cancel {false};
    std::thread reader([&] {
        httplib::Client stream("127.0.0.1", h.server.port());
        stream.set_read_timeout(10, 0);
        (void)stream.Get("/sessions/" + id + "/events?from_seq=1", [&](const char* data, std::size_t size) {
            std::lock_guard lock(mutex);
            received.append(data, size);
            return !cancel.load();
        });
    });
    auto const contains = [&](const std::string& needle) {
        std::lock_guard lock(mutex);
        return received.find(needle) != std::string::npos;
    };

    CHECK(testing::eventually([&] { return contains("id: 2\n"); }));
    CHECK(testing::eventually([&] { return contains(": heartbeat"); }));
    h.post("/sessions/" + id + "/messages", {{"text", "I am ready"}});
    CHECK(testing::eventually([&] { return contains("id: 7\n"); }));
    cancel = true;
    h.server.stop();
    reader.join();

    std::lock_guard lock(mutex);
    auto const frames = parse_sse(received);
    REQUIRE(frames.size() >= 6);
    CHECK(std::get<0>(frames.front()) == 2);
    for (std::size_t i = 1; i < frames.size(); ++i)
        CHECK(std::get<0>(frames[i]) == std::get<0>(frames[i - 1]) + 1);
    CHECK(received.find("id: 1\n") == std::string::npos);
}

TEST_CASE("stop ends open streams")
{
    Harness h;
    auto const id = h.create();
    std::atomic<bool> finished {false};
    std::thread reader([&] {
        httplib::Client stream("127.0.0.1", h.server.port());
        stream.set_read_timeout(30, 0);
        (void)stream.Get("/sessions/" + id + "/events", [](const char*, std::size_t) { return true; });
        finished = true;
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    auto const started = std::chrono::steady_clock::now();
    h.server.stop();
    reader.join();
    CHECK(finished);
    CHECK(std::chrono::steady_clock::now() - started < std::chrono::seconds(5));
}

TEST_CASE("static files and busy ports")
{
    testing::TempDir web;
    testing::write_file(web / "index.html", "<html>client</html>");
    HttpServerOptions options;
    options.web_root = web.path();
    Harness h(options);
    auto const page = h.client->Get("/index.html");
    REQUIRE(page);
    CHECK(page->status == 200);
    CHECK(page->body == "<html>client</html>");

    HttpServer other(h.service);
    CHECK_FALSE(other.bind("127.0.0.1", h.server.port()));
}
