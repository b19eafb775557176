// SPDX-License-Identifier: Apache-2.0
#include <mrta/error.hpp>
#include <mrta/http_server.hpp>
#include <mrta/text.hpp>

#include <limits>

#include <httplib.h>

namespace mrta
{

using nlohmann::json;

int http_status_for(ErrorCode code) noexcept
{
    switch (code)
    {
        case ErrorCode::UnknownSession:
        case ErrorCode::UnknownManual: return 404;
        case ErrorCode::SessionFinished: return 409;
        case ErrorCode::StepOutOfRange:
        case ErrorCode::InvalidArgument:
        case ErrorCode::SchemaError:
        case ErrorCode::ConfigError:
        case ErrorCode::BackendConfigError: return 400;
        default: return 500;
    }
}

struct HttpServer::Impl
{
    httplib::Server server;
};

namespace
{
    void send_json(httplib::Response& res, int status, const json& body)
    {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message)
    {
        send_json(res, status, {{"error", code}, {"message", message}});
    }

    json parse_body(const httplib::Request& req)
    {
        if (req.body.empty())
            return json::object();
        try
        {
            return json::parse(req.body);
        }
        catch (const json::parse_error& e)
        {
            throw Error(ErrorCode::SchemaError, std::string("request body is not JSON: ") + e.what());
        }
    }

    std::optional<long long> parse_integer(const std::string& text)
    {
        if (text.empty() || text.size() > 18)
            return std::nullopt;
        std::size_t start = text.front() == '-' ? 1 : 0;
        if (start == text.size())
            return std::nullopt;
        for (auto i = start; i < text.size(); ++i)
            if (text[i] < '0' || text[i] > '9')
                return std::nullopt;
        return std::stoll(text);
    }

    std::string sse_frame(const Event& event)
    {
        return "id: " + std::to_string(event.seq) + "\nevent: " + std::string(event_type_name(event.type))
               + "\ndata: " + to_json(event).dump() + "\n\n";
    }

    template <typename Handler>
    auto guarded(Handler handler)
    {
        return [handler](const httplib::Request& req, httplib::Response& res) {
            try
            {
                handler(req, res);
            }
            catch (const Error& e)
            {
                send_error(res, http_status_for(e.code()), to_string(e.code()), e.detail());
            }
            catch (const json::exception& e)
            {
                send_error(res, 400, "SchemaError", e.what());
            }
            catch (const std::exception& e)
            {
                send_error(res, 500, "InternalError", e.what());
            }
        };
    }
} // namespace

HttpServer::HttpServer(SessionService& service, HttpServerOptions options):
    _impl(std::make_unique<Impl>()), _service(service), _options(std::move(options))
{
    auto& server = _impl->server;
    server.new_task_queue = [] { return new httplib::ThreadPool(32); };
    server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto const body = parse_body(req);
        if (!body.is_object() || !body.contains("manual_id") || !body.at("manual_id").is_string())
            throw Error(ErrorCode::InvalidArgument, "body needs a string 'manual_id'");
        std::size_t chunk_index = 0;
        if (body.contains("chunk_index"))
        {
            if (!body.at("chunk_index").is_number_unsigned())
                throw Error(ErrorCode::InvalidArgument, "'chunk_index' must be a non-negative integer");
            chunk_index = body.at("chunk_index").get<std::size_t>();
        }
        auto const view = _service.create_session(body.at("manual_id").get<std::string>(), chunk_index,
                                                  body.value("backend", json(nullptr)));
        send_json(res, 201, view);
    }));

    server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, _service.session_view(req.matches[1]));
    }));

    server.Post(R"(/sessions/([^/]+)/messages)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto const body = parse_body(req);
        if (!body.is_object() || !body.contains("text") || !body.at("text").is_string())
            throw Error(ErrorCode::InvalidArgument, "body needs a string 'text'");
        auto const text = body.at("text").get<std::string>();
        if (text::trim(text).empty())
            throw Error(ErrorCode::InvalidArgument, "'text' must not be blank");
        std::string const id = req.matches[1];
        _service.post_message(id, text);
        send_json(res, 202, {{"accepted", true}, {"session_id", id}});
    }));

    server.Post(R"(/sessions/([^/]+)/steps/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto const step = parse_integer(req.matches[2]);
        if (!step || *step < std::numeric_limits<int>::min() || *step > std::numeric_limits<int>::max())
            throw Error(ErrorCode::StepOutOfRange, "step must be an integer");
        auto const body = parse_body(req);
        if (!body.is_object() || !body.contains("done") || !body.at("done").is_boolean())
            throw Error(ErrorCode::InvalidArgument, "body needs a boolean 'done'");
        send_json(res, 200, _service.control_step(req.matches[1], static_cast<int>(*step), body.at("done").get<bool>()));
    }));

    server.Get(R"(/sessions/([^/]+)/events)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        std::string const id = req.matches[1];
        std::uint64_t from_seq = 0;
        std::string from_text;
        if (req.has_param("from_seq"))
            from_text = req.get_param_value("from_seq");
        else if (req.has_header("Last-Event-ID"))
            from_text = req.get_header_value("Last-Event-ID");
        if (!from_text.empty())
        {
            auto const parsed = parse_integer(from_text);
            if (!parsed || *parsed < 0)
                throw Error(ErrorCode::InvalidArgument, "from_seq must be a non-negative integer");
            from_seq = static_cast<std::uint64_t>(*parsed);
        }
        bool const follow = !req.has_param("follow") || req.get_param_value("follow") != "0";

        // Fails with UnknownSession before any stream headers are sent.
        auto backlog = _service.events_after(id, from_seq);

        res.set_header("Cache-Control", "no-cache");
        if (!follow)
        {
            std::string body;
            for (auto const& event: backlog)
                body += sse_frame(event);
            res.set_content(body, "text/event-stream");
            return;
        }

        auto cursor = std::make_shared<std::uint64_t>(from_seq);
        res.set_chunked_content_provider(
            "text/event-stream", [this, id, cursor](std::size_t, httplib::DataSink& sink) {
                using namespace std::chrono;
                auto const slice = milliseconds(200);
                milliseconds waited {0};
                std::vector<Event> events;
                while (events.empty())
                {
                    if (_stopping || _service.stopping())
                    {
                        sink.done();
                        return true;
                    }
                    events = _service.wait_events(id, *cursor, std::min(slice, _options.heartbeat));
                    if (!events.empty())
                        break;
                    waited += std::min(slice, _options.heartbeat);
                    if (waited >= _options.heartbeat)
                    {
                        static constexpr std::string_view heartbeat = ": heartbeat\n\n";
                        return sink.write(heartbeat.data(), heartbeat.size());
                    }
                }
                for (auto const& event: events)
                {
                    auto const frame = sse_frame(event);
                    if (!sink.write(frame.data(), frame.size()))
                        return false;
                    *cursor = event.seq;
                }
                return true;
            });
    }));

    server.Get("/manuals", guarded([this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, _service.manuals_json());
    }));

    server.Get("/tools", guarded([](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, registry_json());
    }));

    if (_options.web_root)
        server.set_mount_point("/", _options.web_root->string());
}

HttpServer::~HttpServer()
{
    stop();
}

bool HttpServer::bind(const std::string& host, int port)
{
    auto& server = _impl->server;
    if (port == 0)
    {
        _port = server.bind_to_any_port(host);
        return _port > 0;
    }
    if (!server.bind_to_port(host, port))
        return false;
    _port = port;
    return true;
}

void HttpServer::run()
{
    _impl->server.listen_after_bind();
}

void HttpServer::start()
{
    _thread = std::thread([this] { run(); });
    _impl->server.wait_until_ready();
}

void HttpServer::stop()
{
    _stopping = true;
    _impl->server.stop();
    if (_thread.joinable() && _thread.get_id() != std::this_thread::get_id())
        _thread.join();
}

} // namespace mrta
