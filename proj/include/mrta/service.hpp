// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mrta/agent.hpp>
#include <mrta/assembly.hpp>
#include <mrta/backends.hpp>
#include <mrta/clock.hpp>
#include <mrta/manual.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mrta
{

enum class EventType
{
    State,
    TrainerMessage,
    TraineeMessage,
    ToolCall,
    ToolResponse,
    VlmResult,
    Error,
};

[[nodiscard]] std::string_view event_type_name(EventType type) noexcept;
[[nodiscard]] std::optional<EventType> event_type_from_name(std::string_view name) noexcept;

struct Event
{
    std::uint64_t seq = 0;
    EventType type = EventType::State;
    std::int64_t timestamp_ms = 0;
    nlohmann::json payload = nlohmann::json::object();

    bool operator==(const Event&) const = default;
};

[[nodiscard]] nlohmann::json to_json(const Event& event);
[[nodiscard]] Event event_from_json(const nlohmann::json& j);

/// Builds the backends for one session. override_config is the optional "backend" member of a create request
/// (null when absent). Throws Error(BackendConfigError) or Error(ConfigError).
using BackendFactory = std::function<Backends(const nlohmann::json& override_config)>;

/// Factory that always builds from one {"llm", "vlm"} config, accepting per-session overrides of the same shape.
[[nodiscard]] BackendFactory config_backend_factory(nlohmann::json config, std::filesystem::path base_dir);

struct ServiceOptions
{
    AgentOptions agent;
    Clock clock = system_clock();
    // Per-session JSONL event logs; sessions are not persisted when unset.
    std::optional<std::filesystem::path> log_dir;
    std::size_t chunk_size = 10;
};

class SessionService
{
  public:
    SessionService(std::vector<InstructionManual> manuals, BackendFactory factory, ServiceOptions options = {});
    ~SessionService();

    SessionService(const SessionService&) = delete;
    SessionService& operator=(const SessionService&) = delete;

    /// Returns the session view. Throws Error(UnknownManual), Error(StepOutOfRange) for a bad chunk index, or the
    /// factory's configuration errors.
    nlohmann::json create_session(const std::string& manual_id,
                                  std::size_t chunk_index = 0,
                                  const nlohmann::json& backend_override = nullptr);

    /// {"session_id", "manual_id", "chunk_index", "created_at", "state", "last_seq", "busy", "pending"}.
    [[nodiscard]] nlohmann::json session_view(const std::string& session_id) const;

    /// Queues a trainee message. Throws Error(UnknownSession) or Error(SessionFinished).
    void post_message(const std::string& session_id, std::string text);

    /// Runs after any queued messages; returns the resulting state event payload.
    /// Throws Error(UnknownSession) or Error(StepOutOfRange) / Error(SessionFinished) from the session.
    nlohmann::json control_step(const std::string& session_id, int step, bool done);

    /// Events with seq > from_seq, in order. Throws Error(UnknownSession).
    [[nodiscard]] std::vector<Event> events_after(const std::string& session_id, std::uint64_t from_seq) const;
    /// As events_after, but blocks up to timeout for the first new event. Returns empty on timeout or shutdown.
    [[nodiscard]] std::vector<Event> wait_events(const std::string& session_id,
                                                 std::uint64_t from_seq,
                                                 std::chrono::milliseconds timeout) const;

    /// Blocks until the session has no queued or running work.
    void wait_idle(const std::string& session_id) const;

    /// Live state including trace and step marks. Throws Error(UnknownSession).
    [[nodiscard]] AssemblySession assembly(const std::string& session_id) const;
    [[nodiscard]] std::string memory_jsonl(const std::string& session_id) const;

    [[nodiscard]] std::vector<std::string> session_ids() const;
    [[nodiscard]] nlohmann::json manuals_json() const;
    [[nodiscard]] const std::vector<InstructionManual>& manuals() const noexcept { return _manuals; }

    /// Rebuilds sessions from the log directory. Returns how many were restored.
    std::size_t restore();

    /// Stops accepting work, wakes waiting readers and joins the workers. Idempotent.
    void shutdown();
    [[nodiscard]] bool stopping() const;

    struct Session;

  private:
    std::shared_ptr<Session> find(const std::string& session_id) const;
    std::shared_ptr<Session> open_session(std::string session_id,
                                          const InstructionManual& manual,
                                          std::size_t chunk_index,
                                          const nlohmann::json& backend_override,
                                          std::int64_t created_at);

    std::vector<InstructionManual> _manuals;
    std::map<std::string, std::shared_ptr<const InstructionManual>> _by_id;
    BackendFactory _factory;
    ServiceOptions _options;

    mutable std::mutex _mutex;
    std::map<std::string, std::shared_ptr<Session>> _sessions;
    std::uint64_t _next_id = 1;
    bool _stopping = false;
};

/// Opening line of every session; the trainee is asked to confirm before the assembly begins.
[[nodiscard]] std::string greeting_text(const ManualChunk& chunk);

} // namespace mrta
