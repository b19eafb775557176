// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mrta/metrics.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mrta
{

inline constexpr int manual_schema_version = 1;

/// Where a theme entity occurs. step == 0 denotes the summary; sentence is unused for the summary.
/// [begin, end) are byte offsets into the markup-free text.
struct EntityLocation
{
    int step = 0;
    std::size_t sentence = 0;
    std::size_t begin = 0;
    std::size_t end = 0;

    [[nodiscard]] bool in_summary() const noexcept { return step == 0; }
    bool operator==(const EntityLocation&) const = default;
};

struct ThemeEntity
{
    std::string surface;
    std::string normalized;
    EntityLocation location;

    bool operator==(const ThemeEntity&) const = default;
};

struct StepInstruction
{
    int index = 1;
    // Markup-free sentences; entity spans live in InstructionManual::theme_entities.
    std::vector<std::string> instructions;
    std::optional<std::string> image_ref;
    std::vector<std::string> piece_ids;

    bool operator==(const StepInstruction&) const = default;
};

struct InstructionManual
{
    std::string id;
    std::string title;
    std::string summary;
    std::vector<StepInstruction> steps;
    std::vector<ThemeEntity> theme_entities;

    [[nodiscard]] std::size_t step_count() const noexcept { return steps.size(); }
    /// 1-based access; throws Error(StepOutOfRange).
    [[nodiscard]] const StepInstruction& step(int index) const;

    bool operator==(const InstructionManual&) const = default;
};

struct ManualChunk
{
    std::string manual_id;
    std::size_t chunk_index = 0;
    std::string title;
    std::string summary;
    std::vector<StepInstruction> steps;

    bool operator==(const ManualChunk&) const = default;
};

struct CorpusStats
{
    std::size_t manual_count = 0;
    std::size_t total_steps = 0;
    std::size_t total_tokens = 0;
    std::size_t unique_tokens = 0;
    std::size_t theme_entity_count = 0;
    std::size_t theme_mentions = 0;
    double avg_steps_per_manual = 0.0;

    bool operator==(const CorpusStats&) const = default;
};

/// Case-folded, whitespace-collapsed form of an entity surface.
[[nodiscard]] std::string normalize_entity(std::string_view surface);

/// Validates a manual document and extracts [[entity]] markup.
/// Throws Error(SchemaError) or Error(EmptyManual).
[[nodiscard]] InstructionManual parse_manual(const nlohmann::json& document);
[[nodiscard]] InstructionManual parse_manual_text(std::string_view json_text);
[[nodiscard]] InstructionManual load_manual_file(const std::filesystem::path& path);

/// Inverse of parse_manual: markup is re-inserted at the recorded spans.
[[nodiscard]] nlohmann::json serialize_manual(const InstructionManual& manual);

/// One manual loaded from a directory, or the reason it failed.
struct ManualLoadFailure
{
    std::filesystem::path file;
    std::string reason;
};

struct ManualDirectory
{
    std::vector<InstructionManual> manuals;
    std::vector<ManualLoadFailure> failures;
};

/// Loads every *.json file in dir, sorted by file name. Duplicate ids are failures.
[[nodiscard]] ManualDirectory load_manual_directory(const std::filesystem::path& dir);

/// Partitions steps into ceil(N / chunk_size) chunks, each carrying the summary.
[[nodiscard]] std::vector<ManualChunk> chunk_manual(const InstructionManual& manual, std::size_t chunk_size = 10);

/// Deduplicated, sorted, normalized theme entities across manuals.
[[nodiscard]] std::vector<std::string> extract_theme_lexicon(const std::vector<InstructionManual>& manuals);

/// Tokens are counted over summaries and instruction sentences.
[[nodiscard]] CorpusStats corpus_stats(const std::vector<InstructionManual>& manuals, const Tokenizer& tokenizer = tokenize);

[[nodiscard]] nlohmann::json to_json(const CorpusStats& stats);
[[nodiscard]] std::string format_corpus_stats(const CorpusStats& stats);

/// Summary plus numbered steps, as shown to language models.
[[nodiscard]] std::string render_chunk_text(const ManualChunk& chunk);

[[nodiscard]] nlohmann::json to_json(const StepInstruction& step);

} // namespace mrta
