// SPDX-License-Identifier: Apache-2.0
#include <mrta/error.hpp>
#include <mrta/manual.hpp>
#include <mrta/text.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace mrta
{

using nlohmann::json;

const StepInstruction& InstructionManual::step(int index) const
{
    if (index < 1 || static_cast<std::size_t>(index) > steps.size())
        throw Error(ErrorCode::StepOutOfRange,
                    "step " + std::to_string(index) + " outside 1.." + std::to_string(steps.size()));
    return steps[static_cast<std::size_t>(index) - 1];
}

std::string normalize_entity(std::string_view surface)
{
    return text::collapse_whitespace(text::fold(surface));
}

namespace
{
    struct MarkupResult
    {
        std::string plain;
        std::vector<std::pair<std::size_t, std::size_t>> spans;
    };

    MarkupResult strip_markup(std::string_view source, std::string_view where)
    {
        MarkupResult out;
        std::size_t i = 0;
        constexpr auto none = std::string::npos;
        std::size_t open = none;
        while (i < source.size())
        {
            if (source.compare(i, 2, "[[") == 0)
            {
                if (open != none)
                    throw Error(ErrorCode::SchemaError, std::string(where) + ": nested '[[' entity markup");
                open = out.plain.size();
                i += 2;
                continue;
            }
            if (source.compare(i, 2, "]]") == 0)
            {
                if (open == none)
                    throw Error(ErrorCode::SchemaError, std::string(where) + ": ']]' without matching '[['");
                if (text::trim(std::string_view(out.plain).substr(open)).empty())
                    throw Error(ErrorCode::SchemaError, std::string(where) + ": empty entity markup");
                out.spans.emplace_back(open, out.plain.size());
                open = none;
                i += 2;
                continue;
            }
            out.plain.push_back(source[i]);
            ++i;
        }
        if (open != none)
            throw Error(ErrorCode::SchemaError, std::string(where) + ": unterminated '[[' entity markup");
        return out;
    }

    std::string insert_markup(const std::string& plain, std::vector<std::pair<std::size_t, std::size_t>> spans)
    {
        std::sort(spans.begin(), spans.end());
        std::string out;
        std::size_t cursor = 0;
        for (auto const& [begin, end]: spans)
        {
            out.append(plain, cursor, begin - cursor);
            out += "[[";
            out.append(plain, begin, end - begin);
            out += "]]";
            cursor = end;
        }
        out.append(plain, cursor);
        return out;
    }

    const json& require(const json& obj, const char* key, std::string_view where)
    {
        if (!obj.contains(key))
            throw Error(ErrorCode::SchemaError, std::string(where) + ": missing field '" + key + "'");
        return obj.at(key);
    }

    std::string require_string(const json& obj, const char* key, std::string_view where)
    {
        auto const& value = require(obj, key, where);
        if (!value.is_string())
            throw Error(ErrorCode::SchemaError, std::string(where) + ": field '" + key + "' must be a string");
        return value.get<std::string>();
    }

    void add_entities(InstructionManual& manual, const MarkupResult& markup, int step, std::size_t sentence)
    {
        for (auto const& [begin, end]: markup.spans)
        {
            ThemeEntity entity;
            entity.surface = markup.plain.substr(begin, end - begin);
            entity.normalized = normalize_entity(entity.surface);
            entity.location = EntityLocation {step, sentence, begin, end};
            manual.theme_entities.push_back(std::move(entity));
        }
    }
} // namespace

InstructionManual parse_manual(const json& document)
{
    if (!document.is_object())
        throw Error(ErrorCode::SchemaError, "manual document must be a JSON object");
    if (document.contains("schema_version"))
    {
        auto const& version = document.at("schema_version");
        if (!version.is_number_integer() || version.get<int>() != manual_schema_version)
            throw Error(ErrorCode::SchemaError, "unsupported schema_version");
    }

    InstructionManual manual;
    manual.id = require_string(document, "id", "manual");
    if (manual.id.empty())
        throw Error(ErrorCode::SchemaError, "manual: 'id' must be non-empty");
    manual.title = require_string(document, "title", "manual");

    auto const summary = strip_markup(require_string(document, "summary", "manual"), "summary");
    manual.summary = summary.plain;
    add_entities(manual, summary, 0, 0);

    auto const& steps = require(document, "steps", "manual");
    if (!steps.is_array())
        throw Error(ErrorCode::SchemaError, "manual: 'steps' must be an array");
    if (steps.empty())
        throw Error(ErrorCode::EmptyManual, "manual '" + manual.id + "' has no steps");

    for (std::size_t i = 0; i < steps.size(); ++i)
    {
        auto const& node = steps[i];
        auto const where = "steps[" + std::to_string(i) + "]";
        if (!node.is_object())
            throw Error(ErrorCode::SchemaError, where + ": must be an object");
        auto const& index = require(node, "index", where);
        if (!index.is_number_integer())
            throw Error(ErrorCode::SchemaError, where + ": 'index' must be an integer");
        StepInstruction step;
        step.index = index.get<int>();
        if (step.index != static_cast<int>(i) + 1)
            throw Error(ErrorCode::SchemaError,
                        where + ": non-contiguous step index " + std::to_string(step.index) + ", expected "
                            + std::to_string(i + 1));

        auto const& sentences = require(node, "instructions", where);
        if (!sentences.is_array() || sentences.empty())
            throw Error(ErrorCode::SchemaError, where + ": 'instructions' must be a non-empty array");
        for (std::size_t s = 0; s < sentences.size(); ++s)
        {
            if (!sentences[s].is_string())
                throw Error(ErrorCode::SchemaError, where + ": instructions must be strings");
            auto const markup = strip_markup(sentences[s].get<std::string>(), where);
            if (text::trim(markup.plain).empty())
                throw Error(ErrorCode::SchemaError, where + ": blank instruction sentence");
            add_entities(manual, markup, step.index, s);
            step.instructions.push_back(markup.plain);
        }

        if (node.contains("image_ref") && !node.at("image_ref").is_null())
        {
            if (!node.at("image_ref").is_string())
                throw Error(ErrorCode::SchemaError, where + ": 'image_ref' must be a string or null");
            step.image_ref = node.at("image_ref").get<std::string>();
        }
        if (node.contains("piece_ids"))
        {
            auto const& pieces = node.at("piece_ids");
            if (!pieces.is_array())
                throw Error(ErrorCode::SchemaError, where + ": 'piece_ids' must be an array");
            for (auto const& piece: pieces)
            {
                if (!piece.is_string())
                    throw Error(ErrorCode::SchemaError, where + ": piece ids must be strings");
                step.piece_ids.push_back(piece.get<std::string>());
            }
        }
        manual.steps.push_back(std::move(step));
    }
    return manual;
}

InstructionManual parse_manual_text(std::string_view json_text)
{
    json document;
    try
    {
        document = json::parse(json_text);
    }
    catch (const json::parse_error& e)
    {
        throw Error(ErrorCode::SchemaError, std::string("invalid JSON: ") + e.what());
    }
    return parse_manual(document);
}

InstructionManual load_manual_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_manual_text(buffer.str());
}

json serialize_manual(const InstructionManual& manual)
{
    auto spans_for = [&](int step, std::size_t sentence) {
        std::vector<std::pair<std::size_t, std::size_t>> spans;
        for (auto const& entity: manual.theme_entities)
            if (entity.location.step == step && (step == 0 || entity.location.sentence == sentence))
                spans.emplace_back(entity.location.begin, entity.location.end);
        return spans;
    };

    json steps = json::array();
    for (auto const& step: manual.steps)
    {
        json sentences = json::array();
        for (std::size_t s = 0; s < step.instructions.size(); ++s)
            sentences.push_back(insert_markup(step.instructions[s], spans_for(step.index, s)));
        steps.push_back({
            {"index", step.index},
            {"instructions", std::move(sentences)},
            {"image_ref", step.image_ref ? json(*step.image_ref) : json(nullptr)},
            {"piece_ids", step.piece_ids},
        });
    }
    return {
        {"schema_version", manual_schema_version},
        {"id", manual.id},
        {"title", manual.title},
        {"summary", insert_markup(manual.summary, spans_for(0, 0))},
        {"steps", std::move(steps)},
    };
}

ManualDirectory load_manual_directory(const std::filesystem::path& dir)
{
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir))
        throw Error(ErrorCode::IoError, "not a directory: " + dir.string());

    std::vector<fs::path> files;
    for (auto const& entry: fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    ManualDirectory out;
    std::set<std::string> seen;
    for (auto const& file: files)
    {
        try
        {
            auto manual = load_manual_file(file);
            if (!seen.insert(manual.id).second)
            {
                out.failures.push_back({file, "duplicate manual id '" + manual.id + "'"});
                continue;
            }
            out.manuals.push_back(std::move(manual));
        }
        catch (const Error& e)
        {
            out.failures.push_back({file, e.what()});
        }
    }
    return out;
}

std::vector<ManualChunk> chunk_manual(const InstructionManual& manual, std::size_t chunk_size)
{
    if (chunk_size == 0)
        throw Error(ErrorCode::InvalidArgument, "chunk_size must be >= 1");
    std::vector<ManualChunk> chunks;
    for (std::size_t start = 0; start < manual.steps.size(); start += chunk_size)
    {
        ManualChunk chunk;
        chunk.manual_id = manual.id;
        chunk.chunk_index = chunks.size();
        chunk.title = manual.title;
        chunk.summary = manual.summary;
        auto const stop = std::min(manual.steps.size(), start + chunk_size);
        chunk.steps.assign(manual.steps.begin() + static_cast<std::ptrdiff_t>(start),
                           manual.steps.begin() + static_cast<std::ptrdiff_t>(stop));
        chunks.push_back(std::move(chunk));
    }
    return chunks;
}

std::vector<std::string> extract_theme_lexicon(const std::vector<InstructionManual>& manuals)
{
    std::set<std::string> lexicon;
    for (auto const& manual: manuals)
        for (auto const& entity: manual.theme_entities)
            if (!entity.normalized.empty())
                lexicon.insert(entity.normalized);
    return {lexicon.begin(), lexicon.end()};
}

CorpusStats corpus_stats(const std::vector<InstructionManual>& manuals, const Tokenizer& tokenizer)
{
    CorpusStats stats;
    std::set<std::string> vocabulary;
    auto count = [&](std::string_view text) {
        auto const tokens = tokenizer(text);
        stats.total_tokens += tokens.size();
        vocabulary.insert(tokens.begin(), tokens.end());
    };
    for (auto const& manual: manuals)
    {
        ++stats.manual_count;
        stats.total_steps += manual.steps.size();
        stats.theme_mentions += manual.theme_entities.size();
        count(manual.summary);
        for (auto const& step: manual.steps)
            for (auto const& sentence: step.instructions)
                count(sentence);
    }
    stats.unique_tokens = vocabulary.size();
    stats.theme_entity_count = extract_theme_lexicon(manuals).size();
    stats.avg_steps_per_manual =
        stats.manual_count ? static_cast<double>(stats.total_steps) / static_cast<double>(stats.manual_count) : 0.0;
    return stats;
}

json to_json(const CorpusStats& stats)
{
    return {
        {"manual_count", stats.manual_count},
        {"total_steps", stats.total_steps},
        {"total_tokens", stats.total_tokens},
        {"unique_tokens", stats.unique_tokens},
        {"theme_entity_count", stats.theme_entity_count},
        {"theme_mentions", stats.theme_mentions},
        {"avg_steps_per_manual", stats.avg_steps_per_manual},
    };
}

std::string format_corpus_stats(const CorpusStats& stats)
{
    std::ostringstream out;
    auto row = [&](std::string_view label, auto value) {
        out << std::left << std::setw(22) << label << std::right << std::setw(12) << value << '\n';
    };
    row("#Manual", stats.manual_count);
    row("#InstructionStep", stats.total_steps);
    row("#Token (total)", stats.total_tokens);
    row("#Token (unique)", stats.unique_tokens);
    row("#Theme Entity", stats.theme_entity_count);
    row("#Theme Mention", stats.theme_mentions);
    std::ostringstream avg;
    avg << std::fixed << std::setprecision(1) << stats.avg_steps_per_manual;
    row("#AvgInstructionStep", avg.str());
    return out.str();
}

std::string render_chunk_text(const ManualChunk& chunk)
{
    std::ostringstream out;
    out << "Manual: " << chunk.title << " (" << chunk.manual_id << ", part " << chunk.chunk_index + 1 << ")\n";
    out << "Summary: " << chunk.summary << '\n';
    for (auto const& step: chunk.steps)
    {
        out << "Step " << step.index << ":";
        for (auto const& sentence: step.instructions)
            out << ' ' << sentence;
        if (!step.piece_ids.empty())
        {
            out << " [pieces:";
            for (auto const& piece: step.piece_ids)
                out << ' ' << piece;
            out << ']';
        }
        out << '\n';
    }
    return out.str();
}

json to_json(const StepInstruction& step)
{
    return {
        {"index", step.index},
        {"instructions", step.instructions},
        {"image_ref", step.image_ref ? json(*step.image_ref) : json(nullptr)},
        {"piece_ids", step.piece_ids},
    };
}

} // namespace mrta
