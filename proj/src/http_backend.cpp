// SPDX-License-Identifier: Apache-2.0
#include <mrta/backends.hpp>
#include <mrta/error.hpp>

#include <cstdlib>
#include <fstream>

#include <httplib.h>

namespace mrta
{

using nlohmann::json;

ParsedUrl parse_base_url(const std::string& url)
{
    ParsedUrl out;
    auto const scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorCode::ConfigError, "base_url '" + url + "' has no scheme");
    out.scheme = url.substr(0, scheme_end);
    if (out.scheme != "http" && out.scheme != "https")
        throw Error(ErrorCode::ConfigError, "base_url scheme must be http or https, got '" + out.scheme + "'");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (out.scheme == "https")
        throw Error(ErrorCode::ConfigError, "https base_url requires a build with TLS support");
#endif

    auto rest = url.substr(scheme_end + 3);
    auto const slash = rest.find('/');
    auto authority = rest.substr(0, slash);
    out.prefix = slash == std::string::npos ? std::string {} : rest.substr(slash);
    while (!out.prefix.empty() && out.prefix.back() == '/')
        out.prefix.pop_back();

    out.port = out.scheme == "https" ? 443 : 80;
    auto const colon = authority.rfind(':');
    if (colon != std::string::npos && authority.find(']') == std::string::npos)
    {
        auto const port_text = authority.substr(colon + 1);
        authority = authority.substr(0, colon);
        try
        {
            std::size_t used = 0;
            out.port = std::stoi(port_text, &used);
            if (used != port_text.size() || out.port <= 0 || out.port > 65535)
                throw std::invalid_argument("port");
        }
        catch (const std::exception&)
        {
            throw Error(ErrorCode::ConfigError, "base_url '" + url + "' has an invalid port");
        }
    }
    if (authority.empty())
        throw Error(ErrorCode::ConfigError, "base_url '" + url + "' has no host");
    out.host = authority;
    return out;
}

HttpChatClient::HttpChatClient(HttpBackendConfig config): _config(std::move(config)), _url(parse_base_url(_config.base_url))
{
    if (_config.model.empty())
        throw Error(ErrorCode::ConfigError, "http backend needs a model name");
    if (!_config.api_key_env.empty())
    {
        auto const* value = std::getenv(_config.api_key_env.c_str());
        if (!value || !*value)
            throw Error(ErrorCode::ConfigError, "environment variable " + _config.api_key_env + " is not set");
        _api_key = value;
    }
}

std::string HttpChatClient::post(const json& messages) const
{
    auto const origin = _url.scheme + "://" + _url.host + ":" + std::to_string(_url.port);
    httplib::Client client(origin);
    client.set_connection_timeout(_config.timeout_s, 0);
    client.set_read_timeout(_config.timeout_s, 0);
    client.set_write_timeout(_config.timeout_s, 0);

    httplib::Headers headers;
    if (!_api_key.empty())
        headers.emplace("Authorization", "Bearer " + _api_key);

    json const body = {{"model", _config.model}, {"messages", messages}};
    auto const path = _url.prefix + "/chat/completions";
    auto const result = client.Post(path, headers, body.dump(), "application/json");
    if (!result)
        throw Error(ErrorCode::HttpError, "POST " + origin + path + " failed: " + httplib::to_string(result.error()));
    if (result->status != 200)
        throw Error(ErrorCode::NonOkStatus,
                    "POST " + origin + path + " returned " + std::to_string(result->status) + ": " + result->body);

    try
    {
        auto const reply = json::parse(result->body);
        auto const& content = reply.at("choices").at(0).at("message").at("content");
        if (!content.is_string())
            throw Error(ErrorCode::SchemaError, "message content is not a string");
        return content.get<std::string>();
    }
    catch (const json::exception& e)
    {
        throw Error(ErrorCode::SchemaError, std::string("unexpected chat completion reply: ") + e.what());
    }
}

HttpLlmBackend::HttpLlmBackend(HttpBackendConfig config): _client(std::move(config)) {}

std::string HttpLlmBackend::complete(std::span<const ChatMessage> messages)
{
    json list = json::array();
    for (auto const& message: messages)
        list.push_back({{"role", message.role}, {"content", message.content}});
    return _client.post(list);
}

HttpVisionBackend::HttpVisionBackend(HttpBackendConfig config): _client(std::move(config)) {}

std::string HttpVisionBackend::infer(const std::string& query, const std::string& image_ref)
{
    json const content = json::array({
        {{"type", "text"}, {"text", query}},
        {{"type", "image_url"}, {"image_url", {{"url", image_ref}}}},
    });
    return _client.post(json::array({{{"role", "user"}, {"content", content}}}));
}

HttpBackendConfig http_config_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("base_url") || !j.at("base_url").is_string())
        throw Error(ErrorCode::BackendConfigError, "http backend needs a string 'base_url'");
    if (!j.contains("model") || !j.at("model").is_string())
        throw Error(ErrorCode::BackendConfigError, "http backend needs a string 'model'");
    HttpBackendConfig config;
    config.base_url = j.at("base_url").get<std::string>();
    config.model = j.at("model").get<std::string>();
    if (j.contains("api_key_env"))
    {
        if (!j.at("api_key_env").is_string())
            throw Error(ErrorCode::BackendConfigError, "'api_key_env' must be a string");
        config.api_key_env = j.at("api_key_env").get<std::string>();
    }
    if (j.contains("timeout_s"))
    {
        if (!j.at("timeout_s").is_number_integer() || j.at("timeout_s").get<int>() <= 0)
            throw Error(ErrorCode::BackendConfigError, "'timeout_s' must be a positive integer");
        config.timeout_s = j.at("timeout_s").get<int>();
    }
    return config;
}

namespace
{
    std::string backend_kind(const json& config, std::string_view slot)
    {
        if (!config.is_object() || !config.contains("kind") || !config.at("kind").is_string())
            throw Error(ErrorCode::BackendConfigError, std::string(slot) + " backend needs a string 'kind'");
        return config.at("kind").get<std::string>();
    }

    json read_json_file(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in)
            throw Error(ErrorCode::IoError, "cannot open " + path.string());
        try
        {
            return json::parse(in);
        }
        catch (const json::parse_error& e)
        {
            throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
        }
    }

    std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& path)
    {
        std::filesystem::path p(path);
        return p.is_absolute() ? p : base_dir / p;
    }

    std::vector<std::string> script_entries(const json& node, const std::string& where)
    {
        auto const& list = node.is_object() && node.contains("outputs") ? node.at("outputs") : node;
        if (!list.is_array())
            throw Error(ErrorCode::BackendConfigError, where + ": script must be an array of strings");
        std::vector<std::string> out;
        for (auto const& entry: list)
        {
            if (!entry.is_string())
                throw Error(ErrorCode::BackendConfigError, where + ": script entries must be strings");
            out.push_back(entry.get<std::string>());
        }
        return out;
    }
} // namespace

std::unique_ptr<LlmBackend> make_llm_backend(const json& config, const std::filesystem::path& base_dir)
{
    auto const kind = backend_kind(config, "llm");
    if (kind == "scripted")
    {
        std::vector<std::string> script;
        if (config.contains("script"))
            script = script_entries(config.at("script"), "llm");
        else if (config.contains("script_file") && config.at("script_file").is_string())
        {
            auto const path = resolve(base_dir, config.at("script_file").get<std::string>());
            script = script_entries(read_json_file(path), path.string());
        }
        else
            throw Error(ErrorCode::BackendConfigError, "scripted llm needs 'script' or 'script_file'");
        if (script.empty())
            throw Error(ErrorCode::BackendConfigError, "scripted llm script is empty");
        return std::make_unique<ScriptedBackend>(std::move(script), config.value("cycle", false));
    }
    if (kind == "http")
        return std::make_unique<HttpLlmBackend>(http_config_from_json(config));
    throw Error(ErrorCode::BackendConfigError, "unknown llm backend kind '" + kind + "'");
}

std::unique_ptr<VisionBackend> make_vision_backend(const json& config, const std::filesystem::path& base_dir)
{
    if (config.is_null())
        return nullptr;
    auto const kind = backend_kind(config, "vlm");
    if (kind == "mock")
    {
        if (config.contains("rules"))
            return std::make_unique<MockVisionBackend>(MockVisionBackend::from_json(config.at("rules")));
        if (config.contains("fixture") && config.at("fixture").is_string())
            return std::make_unique<MockVisionBackend>(
                MockVisionBackend::from_file(resolve(base_dir, config.at("fixture").get<std::string>())));
        throw Error(ErrorCode::BackendConfigError, "mock vlm needs 'rules' or 'fixture'");
    }
    if (kind == "http")
        return std::make_unique<HttpVisionBackend>(http_config_from_json(config));
    throw Error(ErrorCode::BackendConfigError, "unknown vlm backend kind '" + kind + "'");
}

Backends make_backends(const json& config, const std::filesystem::path& base_dir)
{
    if (!config.is_object() || !config.contains("llm"))
        throw Error(ErrorCode::BackendConfigError, "backend config needs an 'llm' entry");
    Backends out;
    out.llm = make_llm_backend(config.at("llm"), base_dir);
    out.vlm = make_vision_backend(config.value("vlm", json(nullptr)), base_dir);
    return out;
}

json load_backend_config(const std::filesystem::path& path)
{
    auto config = read_json_file(path);
    if (!config.is_object())
        throw Error(ErrorCode::BackendConfigError, path.string() + ": backend config must be an object");
    config["base_dir"] = std::filesystem::absolute(path).parent_path().string();
    return config;
}

} // namespace mrta
