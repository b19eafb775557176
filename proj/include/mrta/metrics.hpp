// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mrta
{

/// Lowercase, non-empty tokens. The shared unit for every count and score in the project.
class TokenSequence
{
  public:
    TokenSequence() = default;
    /// Throws Error(InvalidArgument) on an empty token.
    explicit TokenSequence(std::vector<std::string> tokens);

    [[nodiscard]] const std::vector<std::string>& tokens() const noexcept { return _tokens; }
    [[nodiscard]] std::size_t size() const noexcept { return _tokens.size(); }
    [[nodiscard]] bool empty() const noexcept { return _tokens.empty(); }
    [[nodiscard]] const std::string& operator[](std::size_t i) const { return _tokens[i]; }

    auto begin() const noexcept { return _tokens.begin(); }
    auto end() const noexcept { return _tokens.end(); }

    bool operator==(const TokenSequence&) const = default;

  private:
    std::vector<std::string> _tokens;
};

/// Case-folds (ASCII, Latin-1, Latin Extended-A, Greek, Cyrillic), splits on whitespace, strips leading and
/// trailing punctuation from each token and drops punctuation-only tokens.
[[nodiscard]] TokenSequence tokenize(std::string_view text);

using Tokenizer = std::function<TokenSequence(std::string_view)>;

enum class RougeMode
{
    Recall,
    F1,
};

enum class Metric
{
    Bleu4,
    Rouge1,
    Rouge2,
    RougeL,
    ToolAcc,
    ThemeAcc,
};

inline constexpr std::array<Metric, 6> all_metrics {
    Metric::Bleu4, Metric::Rouge1, Metric::Rouge2, Metric::RougeL, Metric::ToolAcc, Metric::ThemeAcc,
};

[[nodiscard]] std::string_view metric_name(Metric metric) noexcept;

/// Floor applied to zero n-gram precisions in bleu4.
inline constexpr double bleu_epsilon = 1e-9;

/// Sentence-level BLEU with clipped 1..4-gram precisions, uniform weights and brevity penalty.
/// An empty candidate scores 0.
[[nodiscard]] double bleu4(const TokenSequence& candidate, const TokenSequence& reference);

/// Clipped n-gram overlap over reference n-grams (recall), or its F1 with precision.
/// A reference shorter than n scores 0.
[[nodiscard]] double rouge_n(const TokenSequence& candidate,
                             const TokenSequence& reference,
                             int n,
                             RougeMode mode = RougeMode::Recall);

/// LCS length over reference length (recall), or its F1 with precision.
[[nodiscard]] double rouge_l(const TokenSequence& candidate,
                             const TokenSequence& reference,
                             RougeMode mode = RougeMode::Recall);

[[nodiscard]] std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b);

/// A list of entities matched as contiguous token sequences after tokenization.
class EntityLexicon
{
  public:
    EntityLexicon() = default;
    explicit EntityLexicon(std::vector<std::string> entries);

    [[nodiscard]] const std::vector<std::string>& entries() const noexcept { return _entries; }
    [[nodiscard]] std::size_t size() const noexcept { return _entries.size(); }

    /// Indices of the entries mentioned in text, ascending and unique.
    [[nodiscard]] std::vector<std::size_t> mentions(const TokenSequence& text) const;

  private:
    std::vector<std::string> _entries;
    std::vector<TokenSequence> _patterns;
};

/// Fraction of the entities mentioned by the reference that the candidate also mentions.
/// nullopt (abstain) when the reference mentions none.
[[nodiscard]] std::optional<double> entity_acc(const TokenSequence& candidate,
                                               const TokenSequence& reference,
                                               const EntityLexicon& lexicon);

struct Lexicons
{
    EntityLexicon tools;
    EntityLexicon themes;
};

/// Scores are in [0, 1]; tables render them x100.
struct MetricReport
{
    std::string model_id;
    double bleu4 = 0.0;
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
    double tool_acc = 0.0;
    double theme_acc = 0.0;
    std::size_t pair_count = 0;
    // Pairs that did not abstain; an accuracy with zero support is reported as 0.
    std::size_t tool_acc_support = 0;
    std::size_t theme_acc_support = 0;

    [[nodiscard]] double get(Metric metric) const noexcept;
    void set(Metric metric, double value) noexcept;
};

struct EvaluateOptions
{
    std::string model_id;
    RougeMode rouge_mode = RougeMode::Recall;
};

/// Corpus means of the per-pair scores. Throws Error(LengthMismatch) when sizes differ or are zero.
[[nodiscard]] MetricReport evaluate(std::span<const std::string> predictions,
                                    std::span<const std::string> references,
                                    const Lexicons& lexicons,
                                    const EvaluateOptions& options = {});

/// Population standard deviation of each metric across reports, on the x100 scale.
struct MetricDispersion
{
    std::array<double, 6> values {};

    [[nodiscard]] double get(Metric metric) const noexcept { return values[static_cast<std::size_t>(metric)]; }
};

/// Requires at least two reports; throws Error(InvalidArgument) otherwise.
[[nodiscard]] MetricDispersion metric_stddev(std::span<const MetricReport> reports);

[[nodiscard]] nlohmann::json to_json(const MetricReport& report);
[[nodiscard]] MetricReport report_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const MetricDispersion& dispersion);

/// Aligned text table: one row per report, optional trailing std-dev row.
[[nodiscard]] std::string format_report_table(std::span<const MetricReport> reports,
                                              const std::optional<MetricDispersion>& dispersion = std::nullopt);

} // namespace mrta
