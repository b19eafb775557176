// SPDX-License-Identifier: Apache-2.0
#include "oracles/oracles.hpp"

#include <mrta/error.hpp>
#include <mrta/metrics.hpp>
#include <mrta/rng.hpp>
#include <mrta/text.hpp>

#include <cmath>

#include <doctest.h>

using namespace mrta;

namespace
{
TokenSequence seq(std::vector<std::string> tokens)
{
    return TokenSequence(std::move(tokens));
}

TokenSequence random_sequence(Rng& rng, std::size_t max_len, std::size_t vocab)
{
    std::vector<std::string> tokens;
    auto const len = rng.below(max_len + 1);
    for (std::size_t i = 0; i < len; ++i)
        tokens.push_back("w" + std::to_string(rng.below(vocab)));
    return TokenSequence(std::move(tokens));
}
} // namespace

TEST_CASE("tokenize folds case and strips edge punctuation")
{
    CHECK(tokenize("Hello, World!").tokens() == std::vector<std::string> {"hello", "world"});
    CHECK(tokenize("  don't -- stop  ").tokens() == std::vector<std::string> {"don't", "stop"});
    CHECK(tokenize("ΑΒΓ Straße ÀÉ").tokens() == std::vector<std::string> {"αβγ", "straße", "àé"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("... !!! ,").empty());
    CHECK(tokenize("(2x4) brick.").tokens() == std::vector<std::string> {"2x4", "brick"});
}

TEST_CASE("TokenSequence rejects empty tokens")
{
    CHECK_THROWS_AS(TokenSequence({"a", ""}), Error);
}

TEST_CASE("text helpers")
{
    CHECK(text::collapse_whitespace("  a \t b\n\nc  ") == "a b c");
    CHECK(text::trim("  x  ") == "x");
    auto const lines = text::split_lines("a\r\nb\nc");
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "a");
    CHECK(text::contains_icase("The NextStep tool", "nextstep"));
    CHECK(text::starts_with_icase("YES it is", "yes"));
    CHECK(text::encode_utf8(text::decode_utf8("héllo")) == "héllo");
}

TEST_CASE("bleu4 on hand-computed cases")
{
    auto const ref = seq({"the", "cat", "sat", "on", "the", "red", "mat", "today"});
    CHECK(bleu4(ref, ref) == doctest::Approx(1.0));
    CHECK(bleu4(TokenSequence {}, ref) == 0.0);

    auto const prefix = seq({"the", "cat", "sat", "on"});
    CHECK(bleu4(prefix, ref) == doctest::Approx(std::exp(1.0 - 8.0 / 4.0)));

    // No 4-gram overlap: the epsilon floor keeps the score tiny but positive.
    auto const shuffled = seq({"mat", "the", "cat", "today"});
    auto const score = bleu4(shuffled, ref);
    CHECK(score > 0.0);
    CHECK(score < 1e-2);
}

TEST_CASE("rouge-n recall and f1")
{
    auto const cand = seq({"a", "b", "c"});
    auto const ref = seq({"a", "b", "d", "e"});
    CHECK(rouge_n(cand, ref, 1) == doctest::Approx(0.5));
    CHECK(rouge_n(cand, ref, 1, RougeMode::F1) == doctest::Approx(4.0 / 7.0));
    CHECK(rouge_n(cand, ref, 2) == doctest::Approx(1.0 / 3.0));
    CHECK(rouge_n(cand, seq({"a"}), 2) == 0.0);
    CHECK_THROWS_AS((void)rouge_n(cand, ref, 0), Error);

    // Clipping: repeated candidate tokens count at most as often as in the reference.
    CHECK(rouge_n(seq({"a", "a", "a"}), seq({"a", "b"}), 1) == doctest::Approx(0.5));
}

TEST_CASE("rouge-l uses the longest common subsequence")
{
    auto const a = seq({"a", "b", "c", "d"});
    auto const b = seq({"a", "c", "d", "b"});
    CHECK(lcs_length(a, b) == 3);
    CHECK(rouge_l(a, b) == doctest::Approx(0.75));
    CHECK(rouge_l(TokenSequence {}, b) == 0.0);
    CHECK(rouge_l(seq({"a", "b"}), seq({"a", "b", "c", "d"}), RougeMode::F1) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("metrics agree with the brute-force oracle on random pairs")
{
    Rng rng(2024);
    for (int i = 0; i < 300; ++i)
    {
        auto const cand = random_sequence(rng, 18, 6);
        auto const ref = random_sequence(rng, 18, 6);
        CHECK(std::abs(bleu4(cand, ref) - oracle::bleu4(cand.tokens(), ref.tokens())) < 1e-12);
        for (int n = 1; n <= 2; ++n)
        {
            CHECK(std::abs(rouge_n(cand, ref, n) - oracle::rouge_n(cand.tokens(), ref.tokens(), n)) < 1e-12);
            CHECK(std::abs(rouge_n(cand, ref, n, RougeMode::F1) - oracle::rouge_n(cand.tokens(), ref.tokens(), n, true))
                  < 1e-12);
        }
        CHECK(lcs_length(cand, ref) == oracle::lcs(cand.tokens(), ref.tokens()));
        CHECK(std::abs(rouge_l(cand, ref, RougeMode::F1) - oracle::rouge_l(cand.tokens(), ref.tokens(), true)) < 1e-12);
    }
}

TEST_CASE("metric properties")
{
    Rng rng(99);
    for (int i = 0; i < 200; ++i)
    {
        auto const a = random_sequence(rng, 15, 5);
        auto const b = random_sequence(rng, 15, 5);
        for (double v: {bleu4(a, b), rouge_n(a, b, 1), rouge_n(a, b, 2), rouge_l(a, b)})
        {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0 + 1e-12);
        }
        CHECK(lcs_length(a, b) == lcs_length(b, a));
        CHECK(lcs_length(a, b) <= std::min(a.size(), b.size()));
        if (!a.empty())
        {
            CHECK(rouge_l(a, a) == doctest::Approx(1.0));
            CHECK(rouge_n(a, a, 1) == doctest::Approx(1.0));
            CHECK(bleu4(a, a) <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("entity accuracy matches contiguous token sequences")
{
    EntityLexicon const lexicon({"front axle", "wheel", "NextStep"});
    auto const ref = tokenize("Attach the front axle, then the wheel.");
    CHECK(lexicon.mentions(ref) == std::vector<std::size_t> {0, 1});
    CHECK(entity_acc(tokenize("the front axle goes first"), ref, lexicon) == doctest::Approx(0.5));
    CHECK(entity_acc(tokenize("axle front wheel"), ref, lexicon) == doctest::Approx(0.5));
    CHECK_FALSE(entity_acc(ref, tokenize("nothing here"), lexicon).has_value());
}

TEST_CASE("evaluate averages per pair and abstains without support")
{
    std::vector<std::string> const refs {"Call NextStep to move on", "Attach the front axle"};
    Lexicons lexicons {EntityLexicon({"NextStep"}), EntityLexicon({"front axle"})};
    auto const perfect = evaluate(refs, refs, lexicons, {"gold", RougeMode::Recall});
    CHECK(perfect.model_id == "gold");
    CHECK(perfect.pair_count == 2);
    for (auto metric: all_metrics)
        CHECK(perfect.get(metric) == doctest::Approx(1.0));
    CHECK(perfect.tool_acc_support == 1);
    CHECK(perfect.theme_acc_support == 1);

    std::vector<std::string> const preds {"Say something else", "Attach the front axle"};
    auto const partial = evaluate(preds, refs, lexicons);
    CHECK(partial.tool_acc == 0.0);
    CHECK(partial.theme_acc == doctest::Approx(1.0));

    auto const none = evaluate(std::vector<std::string> {"x"}, std::vector<std::string> {"y"}, Lexicons {});
    CHECK(none.tool_acc == 0.0);
    CHECK(none.tool_acc_support == 0);

    CHECK_THROWS_AS((void)evaluate(preds, std::vector<std::string> {"a"}, lexicons), Error);
    CHECK_THROWS_AS((void)evaluate(std::vector<std::string> {}, std::vector<std::string> {}, lexicons), Error);
}

TEST_CASE("metric_stddev is the population deviation on the x100 scale")
{
    std::vector<MetricReport> reports(3);
    std::vector<double> values {0.2, 0.4, 0.9};
    for (std::size_t i = 0; i < 3; ++i)
        for (auto metric: all_metrics)
            reports[i].set(metric, values[i]);
    auto const sd = metric_stddev(reports);
    for (auto metric: all_metrics)
        CHECK(sd.get(metric) == doctest::Approx(oracle::population_stddev({20.0, 40.0, 90.0})));
    CHECK_THROWS_AS((void)metric_stddev(std::span<const MetricReport>(reports.data(), 1)), Error);
}

TEST_CASE("report json round trip and validation")
{
    MetricReport r;
    r.model_id = "m";
    r.bleu4 = 0.5;
    r.theme_acc = 0.25;
    r.pair_count = 4;
    auto const back = report_from_json(to_json(r));
    CHECK(back.model_id == "m");
    CHECK(back.bleu4 == 0.5);
    CHECK(back.theme_acc == 0.25);
    CHECK(back.pair_count == 4);

    auto bad = to_json(r);
    bad["bleu4"] = 54.0;
    CHECK_THROWS_AS((void)report_from_json(bad), Error);
    bad.erase("bleu4");
    CHECK_THROWS_AS((void)report_from_json(bad), Error);
}

TEST_CASE("report table has one row per report plus the deviation row")
{
    std::vector<MetricReport> reports(2);
    reports[0].model_id = "alpha";
    reports[0].bleu4 = 0.5;
    reports[1].model_id = "beta";
    auto const table = format_report_table(reports, metric_stddev(reports));
    CHECK(table.find("alpha") != std::string::npos);
    CHECK(table.find("50.00") != std::string::npos);
    CHECK(table.find("StdDev") != std::string::npos);
    CHECK(table.find("25.00") != std::string::npos);
}
