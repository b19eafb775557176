// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mrta/llm.hpp>
#include <mrta/vision.hpp>

#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

namespace mrta
{

/// OpenAI-compatible chat-completions endpoint. base_url is "http[s]://host[:port][/prefix]"; requests go to
/// "<prefix>/chat/completions".
struct HttpBackendConfig
{
    std::string base_url;
    std::string model;
    // Name of the environment variable holding the bearer token; empty for unauthenticated servers.
    std::string api_key_env;
    int timeout_s = 60;
};

struct ParsedUrl
{
    std::string scheme;
    std::string host;
    int port = 0;
    std::string prefix;
};

/// Throws Error(ConfigError) for anything but http/https URLs with a host.
[[nodiscard]] ParsedUrl parse_base_url(const std::string& url);

class HttpChatClient
{
  public:
    /// Throws Error(ConfigError) when the URL is unusable or the named key variable is unset.
    explicit HttpChatClient(HttpBackendConfig config);

    /// Posts {"model", "messages"} and returns choices[0].message.content.
    /// Throws Error(HttpError) on transport failure, Error(NonOkStatus) on a non-200 reply and
    /// Error(SchemaError) when the reply has no message content.
    std::string post(const nlohmann::json& messages) const;

    [[nodiscard]] const HttpBackendConfig& config() const noexcept { return _config; }

  private:
    HttpBackendConfig _config;
    ParsedUrl _url;
    std::string _api_key;
};

class HttpLlmBackend final: public LlmBackend
{
  public:
    explicit HttpLlmBackend(HttpBackendConfig config);
    std::string complete(std::span<const ChatMessage> messages) override;

  private:
    HttpChatClient _client;
};

/// Sends the query as text plus the frame reference as an image_url content part.
class HttpVisionBackend final: public VisionBackend
{
  public:
    explicit HttpVisionBackend(HttpBackendConfig config);
    std::string infer(const std::string& query, const std::string& image_ref) override;

  private:
    HttpChatClient _client;
};

[[nodiscard]] HttpBackendConfig http_config_from_json(const nlohmann::json& j);

/// {"kind": "scripted", "script": [...] | "script_file": path, "cycle": bool} or {"kind": "http", ...}.
/// Relative paths resolve against base_dir. Throws Error(BackendConfigError) or Error(ConfigError).
[[nodiscard]] std::unique_ptr<LlmBackend> make_llm_backend(const nlohmann::json& config,
                                                           const std::filesystem::path& base_dir);

/// {"kind": "mock", "rules": [...] | "fixture": path} or {"kind": "http", ...}; null yields no backend.
[[nodiscard]] std::unique_ptr<VisionBackend> make_vision_backend(const nlohmann::json& config,
                                                                 const std::filesystem::path& base_dir);

struct Backends
{
    std::unique_ptr<LlmBackend> llm;
    std::unique_ptr<VisionBackend> vlm;
};

/// {"llm": {...}, "vlm": {...} | null}
[[nodiscard]] Backends make_backends(const nlohmann::json& config, const std::filesystem::path& base_dir);

/// Reads a backend config file and records the file's directory under "base_dir", against which relative
/// paths inside it resolve.
[[nodiscard]] nlohmann::json load_backend_config(const std::filesystem::path& path);

} // namespace mrta
