// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mrta/assembly.hpp>
#include <mrta/llm.hpp>
#include <mrta/manual.hpp>
#include <mrta/metrics.hpp>
#include <mrta/rng.hpp>
#include <mrta/vision.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mrta
{

inline constexpr std::size_t max_tools_per_conversation = 6;

enum class Speaker
{
    Trainer,
    Trainee,
};

[[nodiscard]] std::string_view speaker_name(Speaker speaker) noexcept;

struct ConversationTurn
{
    Speaker speaker = Speaker::Trainer;
    // Utterance text with any tool block removed.
    std::string text;
    std::optional<ToolCall> tool_call;
    std::optional<ToolResponse> tool_response;
    // Index into section_titles, or -1 before the first section header.
    int section = -1;

    bool operator==(const ConversationTurn&) const = default;
};

/// Utterance as spoken, with the tool block re-attached.
[[nodiscard]] std::string render_utterance(const ConversationTurn& turn);

struct ConversationRecord
{
    std::string conv_id;
    std::string manual_id;
    std::size_t chunk_index = 0;
    std::vector<ConversationTurn> turns;
    std::vector<std::string> section_titles;

    bool operator==(const ConversationRecord&) const = default;
};

[[nodiscard]] nlohmann::json to_json(const ConversationRecord& record);
[[nodiscard]] ConversationRecord conversation_from_json(const nlohmann::json& j);

struct ContextResponsePair
{
    std::string conv_id;
    std::size_t turn_index = 0;
    std::string context;
    std::string response;

    bool operator==(const ContextResponsePair&) const = default;
};

[[nodiscard]] nlohmann::json to_json(const ContextResponsePair& pair);

struct VqaPair
{
    std::string query;
    std::string image_ref;
    std::string answer;
    std::string manual_id;
    int step_index = 0;

    bool operator==(const VqaPair&) const = default;
};

[[nodiscard]] nlohmann::json to_json(const VqaPair& pair);

struct SimulatedTool
{
    ToolCall call;
    ToolResponse response;

    bool operator==(const SimulatedTool&) const = default;
};

/// k uniform on 1..6.
[[nodiscard]] std::size_t sample_tool_count(Rng& rng);

/// Samples k distinct tools and records each one's response on a scratch session positioned inside the chunk,
/// after a prologue that satisfies the tool's preconditions where the manual allows.
[[nodiscard]] std::vector<SimulatedTool> simulate_tool_responses(std::uint64_t seed,
                                                                 const InstructionManual& manual,
                                                                 const ManualChunk& chunk,
                                                                 VisionBackend* vlm);

[[nodiscard]] std::string render_conversation_system_prompt(std::span<const ToolSpec> tools);
[[nodiscard]] std::string render_conversation_query(const ManualChunk& chunk, std::span<const SimulatedTool> tools);

/// Parses "## section", "Trainer: ...", "Trainee: ..." lines with inline ```tool blocks. Tool calls pick up the
/// matching simulated response, each response used at most once. Throws Error(TranscriptParseError).
[[nodiscard]] ConversationRecord parse_transcript(std::string_view transcript,
                                                  std::string conv_id,
                                                  const ManualChunk& chunk,
                                                  std::span<const SimulatedTool> tools);

[[nodiscard]] ConversationRecord generate_conversation(const ManualChunk& chunk,
                                                       std::span<const SimulatedTool> tools,
                                                       LlmBackend& llm,
                                                       std::string conv_id);

enum class Violation
{
    EmptyConversation,
    FirstSpeakerNotTrainer,
    NonAlternatingSpeakers,
    MissingSectionTitles,
    SectionWithoutEngagement,
    MissingClosingProtocol,
};

[[nodiscard]] std::string_view violation_name(Violation violation) noexcept;

/// Empty when the record follows the generation rules.
[[nodiscard]] std::vector<Violation> validate_conversation(const ConversationRecord& record);

struct VqaBuild
{
    std::vector<VqaPair> pairs;
    std::size_t dropped = 0;
};

/// One pair per step that has an image; unusable vision answers are dropped and counted.
[[nodiscard]] VqaBuild build_vqa_dataset(const std::vector<InstructionManual>& manuals, VisionBackend& vlm);

/// One pair per Trainer turn with at least one preceding turn; context is the prior turns as "Speaker: text" lines.
[[nodiscard]] std::vector<ContextResponsePair> extract_pairs(std::span<const ConversationRecord> records);

struct DatasetSplit
{
    std::vector<ContextResponsePair> train;
    std::vector<ContextResponsePair> test;
};

/// Whole conversations go to test, in seeded order, until it holds round(test_fraction * |pairs|) pairs.
[[nodiscard]] DatasetSplit split_dataset(std::span<const ContextResponsePair> pairs, double test_fraction, std::uint64_t seed);

using TokenCounts = std::vector<std::pair<std::string, std::size_t>>;

struct DatasetStats
{
    std::size_t conversations = 0;
    std::size_t utterances = 0;
    std::size_t trainer_utterances = 0;
    std::size_t trainee_utterances = 0;
    std::size_t total_tokens = 0;
    std::size_t unique_tokens = 0;
    double avg_utterances_per_conversation = 0.0;
    double avg_tokens_trainer = 0.0;
    double avg_tokens_trainee = 0.0;
    std::size_t pairs = 0;
    double avg_context_tokens = 0.0;
    double avg_response_tokens = 0.0;
    std::size_t vqa_pairs = 0;
    /// Keyed by slice: "instructions", "entities", "conversations", "vqa". Count-descending, then token.
    std::map<std::string, TokenCounts> top_tokens;
    std::map<std::string, ToolUsage> tool_calls;
};

[[nodiscard]] DatasetStats dataset_stats(std::span<const ConversationRecord> records,
                                         std::span<const ContextResponsePair> pairs,
                                         std::span<const VqaPair> vqa,
                                         const std::vector<InstructionManual>& manuals,
                                         const Tokenizer& tokenizer = tokenize,
                                         std::size_t top_k = 20);

[[nodiscard]] nlohmann::json to_json(const DatasetStats& stats);

struct UserRequirement
{
    std::string_view name;
    std::string_view description;
};

/// The seven requirements the pilot application was designed around.
[[nodiscard]] std::span<const UserRequirement> canonical_user_requirements() noexcept;

[[nodiscard]] std::string render_requirements_prompt(std::span<const InstructionManual> manual_sample);

/// Bullet or numbered lines of the model's answer. Throws Error(EmptyOutput).
[[nodiscard]] std::vector<std::string> generate_user_requirements(std::span<const InstructionManual> manual_sample,
                                                                  LlmBackend& llm);

struct ForgeConfig
{
    std::uint64_t seed = 7;
    std::size_t chunk_size = 10;
    double test_fraction = 0.2;
    std::size_t top_k = 20;
    bool user_requirements = false;
};

[[nodiscard]] nlohmann::json to_json(const ForgeConfig& config);

struct RejectedConversation
{
    ConversationRecord record;
    std::vector<Violation> violations;
};

struct ForgeOutput
{
    ForgeConfig config;
    std::vector<ConversationRecord> conversations;
    std::vector<RejectedConversation> rejected;
    // conv_id and reason for transcripts that could not be parsed at all.
    std::vector<std::pair<std::string, std::string>> unparseable;
    std::vector<ContextResponsePair> pairs;
    DatasetSplit split;
    VqaBuild vqa;
    std::optional<std::vector<std::string>> user_requirements;
    DatasetStats stats;
    nlohmann::json manifest;
};

/// Stable conversation id for a chunk.
[[nodiscard]] std::string conversation_id(const ManualChunk& chunk);

/// Full dataset pipeline over manuals. Chunks are processed in manual order; each conversation draws from an RNG
/// stream derived from (seed, conversation id). Backend errors propagate.
[[nodiscard]] ForgeOutput run_forge(const std::vector<InstructionManual>& manuals,
                                    const ForgeConfig& config,
                                    LlmBackend& llm,
                                    VisionBackend* vlm);

/// Writes conversations.jsonl, pairs.jsonl, vqa.jsonl, manifest.json (and requirements.json when present).
/// Files are staged and renamed into place; staged files are removed on failure.
void write_forge_output(const ForgeOutput& output, const std::filesystem::path& out_dir);

} // namespace mrta
