// SPDX-License-Identifier: Apache-2.0
#include <mrta/error.hpp>
#include <mrta/metrics.hpp>
#include <mrta/text.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace mrta
{

TokenSequence::TokenSequence(std::vector<std::string> tokens): _tokens(std::move(tokens))
{
    for (auto const& token: _tokens)
        if (token.empty())
            throw Error(ErrorCode::InvalidArgument, "empty token in TokenSequence");
}

TokenSequence tokenize(std::string_view input)
{
    auto const cps = text::decode_utf8(input);
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < cps.size())
    {
        while (i < cps.size() && text::is_space(cps[i]))
            ++i;
        auto start = i;
        while (i < cps.size() && !text::is_space(cps[i]))
            ++i;
        auto end = i;
        while (start < end && text::is_punct(cps[start]))
            ++start;
        while (end > start && text::is_punct(cps[end - 1]))
            --end;
        if (start == end)
            continue;
        std::u32string word(cps.begin() + static_cast<std::ptrdiff_t>(start),
                            cps.begin() + static_cast<std::ptrdiff_t>(end));
        std::transform(word.begin(), word.end(), word.begin(), text::fold_case);
        tokens.push_back(text::encode_utf8(word));
    }
    return TokenSequence(std::move(tokens));
}

std::string_view metric_name(Metric metric) noexcept
{
    switch (metric)
    {
        case Metric::Bleu4: return "BLEU-4";
        case Metric::Rouge1: return "ROUGE-1";
        case Metric::Rouge2: return "ROUGE-2";
        case Metric::RougeL: return "ROUGE-L";
        case Metric::ToolAcc: return "ToolACC";
        case Metric::ThemeAcc: return "ThemeACC";
    }
    return "?";
}

namespace
{
    using NgramCounts = std::unordered_map<std::string, std::size_t>;

    // Tokens never contain the unit separator, so joined keys are unambiguous.
    NgramCounts count_ngrams(const TokenSequence& seq, std::size_t n)
    {
        NgramCounts counts;
        if (seq.size() < n)
            return counts;
        for (std::size_t i = 0; i + n <= seq.size(); ++i)
        {
            std::string key = seq[i];
            for (std::size_t k = 1; k < n; ++k)
            {
                key.push_back('\x1f');
                key += seq[i + k];
            }
            ++counts[key];
        }
        return counts;
    }

    std::size_t clipped_matches(const NgramCounts& candidate, const NgramCounts& reference)
    {
        std::size_t matches = 0;
        for (auto const& [gram, count]: candidate)
            if (auto it = reference.find(gram); it != reference.end())
                matches += std::min(count, it->second);
        return matches;
    }

    std::size_t ngram_total(std::size_t length, std::size_t n)
    {
        return length >= n ? length - n + 1 : 0;
    }

    double combine(double matches, double candidate_total, double reference_total, RougeMode mode)
    {
        if (reference_total == 0.0)
            return 0.0;
        double const recall = matches / reference_total;
        if (mode == RougeMode::Recall)
            return recall;
        double const precision = candidate_total > 0.0 ? matches / candidate_total : 0.0;
        return (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
} // namespace

double bleu4(const TokenSequence& candidate, const TokenSequence& reference)
{
    if (candidate.empty())
        return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n)
    {
        auto const total = ngram_total(candidate.size(), n);
        double precision = 0.0;
        if (total > 0)
            precision = static_cast<double>(clipped_matches(count_ngrams(candidate, n), count_ngrams(reference, n)))
                        / static_cast<double>(total);
        log_sum += std::log(std::max(precision, bleu_epsilon));
    }
    auto const c = static_cast<double>(candidate.size());
    auto const r = static_cast<double>(reference.size());
    double const brevity = c > r ? 1.0 : std::exp(1.0 - r / c);
    return brevity * std::exp(log_sum / 4.0);
}

double rouge_n(const TokenSequence& candidate, const TokenSequence& reference, int n, RougeMode mode)
{
    if (n < 1)
        throw Error(ErrorCode::InvalidArgument, "rouge_n requires n >= 1");
    auto const order = static_cast<std::size_t>(n);
    auto const ref_total = ngram_total(reference.size(), order);
    if (ref_total == 0)
        return 0.0;
    auto const matches = clipped_matches(count_ngrams(candidate, order), count_ngrams(reference, order));
    return combine(static_cast<double>(matches),
                   static_cast<double>(ngram_total(candidate.size(), order)),
                   static_cast<double>(ref_total),
                   mode);
}

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b)
{
    std::vector<std::size_t> previous(b.size() + 1, 0);
    std::vector<std::size_t> current(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i)
    {
        for (std::size_t j = 1; j <= b.size(); ++j)
            current[j] = a[i - 1] == b[j - 1] ? previous[j - 1] + 1 : std::max(previous[j], current[j - 1]);
        std::swap(previous, current);
    }
    return previous[b.size()];
}

double rouge_l(const TokenSequence& candidate, const TokenSequence& reference, RougeMode mode)
{
    if (reference.empty() || candidate.empty())
        return 0.0;
    return combine(static_cast<double>(lcs_length(candidate, reference)),
                   static_cast<double>(candidate.size()),
                   static_cast<double>(reference.size()),
                   mode);
}

EntityLexicon::EntityLexicon(std::vector<std::string> entries): _entries(std::move(entries))
{
    _patterns.reserve(_entries.size());
    for (auto const& entry: _entries)
        _patterns.push_back(tokenize(entry));
}

std::vector<std::size_t> EntityLexicon::mentions(const TokenSequence& text) const
{
    std::vector<std::size_t> found;
    for (std::size_t e = 0; e < _patterns.size(); ++e)
    {
        auto const& pattern = _patterns[e].tokens();
        if (pattern.empty() || pattern.size() > text.size())
            continue;
        auto const hit = std::search(text.begin(), text.end(), pattern.begin(), pattern.end());
        if (hit != text.end())
            found.push_back(e);
    }
    return found;
}

std::optional<double> entity_acc(const TokenSequence& candidate,
                                 const TokenSequence& reference,
                                 const EntityLexicon& lexicon)
{
    auto const expected = lexicon.mentions(reference);
    if (expected.empty())
        return std::nullopt;
    auto const produced = lexicon.mentions(candidate);
    std::vector<std::size_t> common;
    std::set_intersection(
        expected.begin(), expected.end(), produced.begin(), produced.end(), std::back_inserter(common));
    return static_cast<double>(common.size()) / static_cast<double>(expected.size());
}

double MetricReport::get(Metric metric) const noexcept
{
    switch (metric)
    {
        case Metric::Bleu4: return bleu4;
        case Metric::Rouge1: return rouge1;
        case Metric::Rouge2: return rouge2;
        case Metric::RougeL: return rougeL;
        case Metric::ToolAcc: return tool_acc;
        case Metric::ThemeAcc: return theme_acc;
    }
    return 0.0;
}

void MetricReport::set(Metric metric, double value) noexcept
{
    switch (metric)
    {
        case Metric::Bleu4: bleu4 = value; break;
        case Metric::Rouge1: rouge1 = value; break;
        case Metric::Rouge2: rouge2 = value; break;
        case Metric::RougeL: rougeL = value; break;
        case Metric::ToolAcc: tool_acc = value; break;
        case Metric::ThemeAcc: theme_acc = value; break;
    }
}

MetricReport evaluate(std::span<const std::string> predictions,
                      std::span<const std::string> references,
                      const Lexicons& lexicons,
                      const EvaluateOptions& options)
{
    if (predictions.size() != references.size())
        throw Error(ErrorCode::LengthMismatch,
                    std::to_string(predictions.size()) + " predictions vs " + std::to_string(references.size())
                        + " references");
    if (predictions.empty())
        throw Error(ErrorCode::LengthMismatch, "no prediction/reference pairs");

    MetricReport report;
    report.model_id = options.model_id;
    report.pair_count = predictions.size();

    double bleu = 0, r1 = 0, r2 = 0, rl = 0, tool = 0, theme = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
    {
        auto const cand = tokenize(predictions[i]);
        auto const ref = tokenize(references[i]);
        bleu += bleu4(cand, ref);
        r1 += rouge_n(cand, ref, 1, options.rouge_mode);
        r2 += rouge_n(cand, ref, 2, options.rouge_mode);
        rl += rouge_l(cand, ref, options.rouge_mode);
        if (auto acc = entity_acc(cand, ref, lexicons.tools))
        {
            tool += *acc;
            ++report.tool_acc_support;
        }
        if (auto acc = entity_acc(cand, ref, lexicons.themes))
        {
            theme += *acc;
            ++report.theme_acc_support;
        }
    }
    auto const n = static_cast<double>(predictions.size());
    report.bleu4 = bleu / n;
    report.rouge1 = r1 / n;
    report.rouge2 = r2 / n;
    report.rougeL = rl / n;
    report.tool_acc = report.tool_acc_support ? tool / static_cast<double>(report.tool_acc_support) : 0.0;
    report.theme_acc = report.theme_acc_support ? theme / static_cast<double>(report.theme_acc_support) : 0.0;
    return report;
}

MetricDispersion metric_stddev(std::span<const MetricReport> reports)
{
    if (reports.size() < 2)
        throw Error(ErrorCode::InvalidArgument, "metric_stddev needs at least two reports");
    MetricDispersion out;
    auto const n = static_cast<double>(reports.size());
    for (auto metric: all_metrics)
    {
        double mean = 0.0;
        for (auto const& r: reports)
            mean += 100.0 * r.get(metric);
        mean /= n;
        double var = 0.0;
        for (auto const& r: reports)
        {
            double const d = 100.0 * r.get(metric) - mean;
            var += d * d;
        }
        out.values[static_cast<std::size_t>(metric)] = std::sqrt(var / n);
    }
    return out;
}

nlohmann::json to_json(const MetricReport& report)
{
    return {
        {"model_id", report.model_id},
        {"bleu4", report.bleu4},
        {"rouge1", report.rouge1},
        {"rouge2", report.rouge2},
        {"rougeL", report.rougeL},
        {"tool_acc", report.tool_acc},
        {"theme_acc", report.theme_acc},
        {"pair_count", report.pair_count},
        {"tool_acc_support", report.tool_acc_support},
        {"theme_acc_support", report.theme_acc_support},
    };
}

MetricReport report_from_json(const nlohmann::json& j)
{
    if (!j.is_object())
        throw Error(ErrorCode::SchemaError, "metric report must be an object");
    MetricReport report;
    report.model_id = j.value("model_id", std::string {});
    auto read = [&](const char* key, double& slot) {
        if (!j.contains(key) || !j.at(key).is_number())
            throw Error(ErrorCode::SchemaError, std::string("metric report missing numeric '") + key + "'");
        slot = j.at(key).get<double>();
        if (slot < 0.0 || slot > 1.0)
            throw Error(ErrorCode::SchemaError, std::string("metric '") + key + "' outside [0, 1]");
    };
    read("bleu4", report.bleu4);
    read("rouge1", report.rouge1);
    read("rouge2", report.rouge2);
    read("rougeL", report.rougeL);
    read("tool_acc", report.tool_acc);
    read("theme_acc", report.theme_acc);
    report.pair_count = j.value("pair_count", std::size_t {0});
    report.tool_acc_support = j.value("tool_acc_support", std::size_t {0});
    report.theme_acc_support = j.value("theme_acc_support", std::size_t {0});
    return report;
}

nlohmann::json to_json(const MetricDispersion& dispersion)
{
    auto j = nlohmann::json::object();
    for (auto metric: all_metrics)
        j[std::string(metric_name(metric))] = dispersion.get(metric);
    return j;
}

std::string format_report_table(std::span<const MetricReport> reports, const std::optional<MetricDispersion>& dispersion)
{
    std::size_t label_width = 5;
    for (auto const& r: reports)
        label_width = std::max(label_width, r.model_id.size());
    label_width = std::max<std::size_t>(label_width, 6);

    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(label_width)) << "Model";
    for (auto metric: all_metrics)
        out << "  " << std::right << std::setw(9) << metric_name(metric);
    out << '\n';
    out << std::string(label_width + all_metrics.size() * 11, '-') << '\n';

    out << std::fixed << std::setprecision(2);
    for (auto const& r: reports)
    {
        out << std::left << std::setw(static_cast<int>(label_width)) << (r.model_id.empty() ? "-" : r.model_id);
        for (auto metric: all_metrics)
            out << "  " << std::right << std::setw(9) << 100.0 * r.get(metric);
        out << '\n';
    }
    if (dispersion)
    {
        out << std::left << std::setw(static_cast<int>(label_width)) << "StdDev";
        for (auto metric: all_metrics)
            out << "  " << std::right << std::setw(9) << dispersion->get(metric);
        out << '\n';
    }
    return out.str();
}

} // namespace mrta
