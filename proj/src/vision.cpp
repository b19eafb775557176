// SPDX-License-Identifier: Apache-2.0
#include <mrta/error.hpp>
#include <mrta/text.hpp>
#include <mrta/vision.hpp>

#include <charconv>
#include <climits>
#include <fstream>
#include <sstream>

namespace mrta
{

using nlohmann::json;

std::string DetectionResult::canonical() const
{
    return object_label + ' ' + std::to_string(box.x_left) + ' ' + std::to_string(box.y_top) + ' '
           + std::to_string(box.x_right) + ' ' + std::to_string(box.y_bottom);
}

MockVisionBackend::MockVisionBackend(std::vector<Rule> rules): _rules(std::move(rules)) {}

MockVisionBackend MockVisionBackend::from_json(const json& rules)
{
    if (!rules.is_array())
        throw Error(ErrorCode::SchemaError, "vision mock fixture must be a JSON array of rules");
    std::vector<Rule> parsed;
    for (auto const& node: rules)
    {
        if (!node.is_object() || !node.contains("query_contains") || !node.at("query_contains").is_string())
            throw Error(ErrorCode::SchemaError, "vision mock rule needs a string 'query_contains'");
        Rule rule;
        rule.query_contains = node.at("query_contains").get<std::string>();
        rule.image_ref = node.value("image_ref", std::string {});
        rule.output = node.value("output", std::string {});
        if (node.contains("error") && node.at("error").is_string())
            rule.error = node.at("error").get<std::string>();
        else if (!node.contains("output") || !node.at("output").is_string())
            throw Error(ErrorCode::SchemaError, "vision mock rule needs 'output' or 'error'");
        parsed.push_back(std::move(rule));
    }
    return MockVisionBackend(std::move(parsed));
}

MockVisionBackend MockVisionBackend::from_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open vision fixture " + path.string());
    try
    {
        return from_json(json::parse(in));
    }
    catch (const json::parse_error& e)
    {
        throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
    }
}

std::string MockVisionBackend::infer(const std::string& query, const std::string& image_ref)
{
    for (auto const& rule: _rules)
    {
        bool const image_matches = rule.image_ref.empty() || rule.image_ref == "*" || rule.image_ref == image_ref;
        if (image_matches && query.find(rule.query_contains) != std::string::npos)
        {
            if (rule.error)
                throw Error(ErrorCode::BackendError, "vision backend: " + *rule.error);
            return rule.output;
        }
    }
    throw Error(ErrorCode::BackendError, "vision mock has no rule for query '" + query + "' on " + image_ref);
}

std::string build_detection_query(const StepInstruction& step)
{
    if (step.instructions.empty())
        throw Error(ErrorCode::InvalidArgument, "step " + std::to_string(step.index) + " has no instructions");
    return std::string(detection_token) + ' ' + text::collapse_whitespace(step.instructions.front());
}

std::string build_state_query(const StepInstruction& reference_step)
{
    std::string reference;
    for (auto const& sentence: reference_step.instructions)
    {
        if (!reference.empty())
            reference.push_back(' ');
        reference += text::collapse_whitespace(sentence);
    }
    return std::string(state_check_token) + " Does the assembly in the image match the reference state of step "
           + std::to_string(reference_step.index) + "? Reference: " + reference
           + " Answer yes or no, then explain briefly.";
}

namespace
{
    struct Word
    {
        std::string_view raw;
        bool is_int = false;
        long long value = 0;
        bool ends_clause = false;    // trailing . ; : ! ?
        bool trailing_comma = false;
    };

    bool is_clause_char(char c)
    {
        return c == '.' || c == ';' || c == ':' || c == '!' || c == '?';
    }

    bool is_wrap_char(char c)
    {
        return c == '(' || c == ')' || c == '[' || c == ']' || c == '<' || c == '>' || c == '{' || c == '}'
               || c == '"' || c == '\'' || c == '*' || c == '`';
    }

    Word classify(std::string_view raw)
    {
        Word word;
        word.raw = raw;
        auto core = raw;
        while (!core.empty() && (is_clause_char(core.back()) || core.back() == ',' || is_wrap_char(core.back())))
        {
            if (is_clause_char(core.back()))
                word.ends_clause = true;
            if (core.back() == ',')
                word.trailing_comma = true;
            core.remove_suffix(1);
        }
        while (!core.empty() && is_wrap_char(core.front()))
            core.remove_prefix(1);
        auto digits = core;
        if (!digits.empty() && digits.front() == '-')
            digits.remove_prefix(1);
        if (digits.empty())
            return word;
        for (char c: digits)
            if (c < '0' || c > '9')
                return word;
        word.is_int = true;
        // Out-of-range values saturate and are rejected as degenerate later.
        auto [ptr, ec] = std::from_chars(core.data(), core.data() + core.size(), word.value);
        if (ec != std::errc {})
            word.value = core.front() == '-' ? LLONG_MIN : LLONG_MAX;
        return word;
    }

    std::vector<Word> split_words(std::string_view line)
    {
        std::vector<Word> words;
        std::size_t i = 0;
        auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; };
        while (i < line.size())
        {
            while (i < line.size() && is_ws(line[i]))
                ++i;
            auto const start = i;
            while (i < line.size() && !is_ws(line[i]))
                ++i;
            if (i > start)
                words.push_back(classify(line.substr(start, i - start)));
        }
        return words;
    }

    std::string clean_label_word(std::string_view raw)
    {
        while (!raw.empty() && (is_wrap_char(raw.back()) || raw.back() == ',' || raw.back() == ':'))
            raw.remove_suffix(1);
        while (!raw.empty() && is_wrap_char(raw.front()))
            raw.remove_prefix(1);
        return std::string(raw);
    }

    int to_coordinate(long long value)
    {
        if (value < INT_MIN || value > INT_MAX)
            return -1;
        return static_cast<int>(value);
    }

    std::optional<DetectionResult> scan_line(std::string_view line, std::string_view raw)
    {
        auto const words = split_words(line);
        std::size_t i = 0;
        while (i < words.size())
        {
            if (!words[i].is_int)
            {
                ++i;
                continue;
            }
            auto j = i;
            while (j < words.size() && words[j].is_int)
            {
                ++j;
                if (words[j - 1].ends_clause)
                    break;
            }
            auto const run = j - i;
            if (run >= 4)
            {
                std::vector<std::string> label_words;
                for (auto k = i; k > 0; --k)
                {
                    auto const& w = words[k - 1];
                    if (w.is_int)
                        break;
                    // The word adjacent to the box may carry its own "label:" punctuation; any earlier
                    // delimiter ends the label.
                    if (k != i && (w.ends_clause || w.trailing_comma))
                        break;
                    auto cleaned = clean_label_word(w.raw);
                    if (k == i && w.ends_clause && w.raw.back() != ':')
                        break;
                    if (!cleaned.empty())
                        label_words.push_back(std::move(cleaned));
                }
                if (!label_words.empty())
                {
                    DetectionResult result;
                    for (auto it = label_words.rbegin(); it != label_words.rend(); ++it)
                    {
                        if (!result.object_label.empty())
                            result.object_label.push_back(' ');
                        result.object_label += *it;
                    }
                    result.box = BoundingBox {to_coordinate(words[j - 4].value),
                                              to_coordinate(words[j - 3].value),
                                              to_coordinate(words[j - 2].value),
                                              to_coordinate(words[j - 1].value)};
                    result.raw_output = std::string(raw);
                    if (!result.box.valid())
                        throw Error(ErrorCode::DegenerateBox, "degenerate box in '" + std::string(line) + "'");
                    return result;
                }
            }
            i = j;
        }
        return std::nullopt;
    }
} // namespace

DetectionResult parse_detection_output(std::string_view raw)
{
    for (auto line: text::split_lines(raw))
        if (auto result = scan_line(line, raw))
            return *result;
    throw Error(ErrorCode::NoDetectionFound, "no '<label> <x> <y> <x> <y>' pattern in vision output");
}

DetectionResult detect_object(const StepInstruction& step, const std::string& image_ref, VisionBackend& backend)
{
    return parse_detection_output(backend.infer(build_detection_query(step), image_ref));
}

MatchVerdict parse_verdict(std::string_view raw)
{
    auto rest = text::trim(raw);
    while (!rest.empty() && (is_wrap_char(rest.front()) || rest.front() == '-'))
        rest.remove_prefix(1);
    std::size_t word_end = 0;
    while (word_end < rest.size() && std::isalpha(static_cast<unsigned char>(rest[word_end])))
        ++word_end;
    auto const word = rest.substr(0, word_end);

    MatchVerdict verdict;
    if (word.size() == 3 && text::starts_with_icase(word, "yes"))
        verdict.matches = true;
    else if (word.size() == 2 && text::starts_with_icase(word, "no"))
        verdict.matches = false;
    else
        throw Error(ErrorCode::UnparseableVerdict, "no leading yes/no in '" + std::string(raw) + "'");

    rest.remove_prefix(word_end);
    while (!rest.empty() && (std::isspace(static_cast<unsigned char>(rest.front())) || is_wrap_char(rest.front()) || rest.front() == ','
                             || rest.front() == '.' || rest.front() == '!' || rest.front() == ':'
                             || rest.front() == ';' || rest.front() == '-'))
        rest.remove_prefix(1);
    verdict.rationale = std::string(text::trim(rest));
    return verdict;
}

MatchVerdict check_assembly_state(const std::string& image_ref, const StepInstruction& reference_step, VisionBackend& backend)
{
    return parse_verdict(backend.infer(build_state_query(reference_step), image_ref));
}

json to_json(const DetectionResult& result)
{
    return {
        {"label", result.object_label},
        {"box", {result.box.x_left, result.box.y_top, result.box.x_right, result.box.y_bottom}},
    };
}

json to_json(const MatchVerdict& verdict)
{
    return {{"matches", verdict.matches}, {"rationale", verdict.rationale}};
}

} // namespace mrta
