// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

// Straightforward reference implementations of the text metrics. They share no code with the library:
// n-grams are compared as token vectors, counts come from linear scans and the LCS from a memoized recursion.
namespace mrta::oracle
{

using Tokens = std::vector<std::string>;

inline std::vector<Tokens> ngrams(const Tokens& tokens, std::size_t n)
{
    std::vector<Tokens> out;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
        out.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    return out;
}

inline std::size_t occurrences(const std::vector<Tokens>& grams, const Tokens& gram)
{
    return static_cast<std::size_t>(std::count(grams.begin(), grams.end(), gram));
}

inline std::size_t clipped_overlap(const Tokens& candidate, const Tokens& reference, std::size_t n)
{
    auto const cand = ngrams(candidate, n);
    auto const ref = ngrams(reference, n);
    std::vector<Tokens> seen;
    std::size_t total = 0;
    for (auto const& gram: cand)
    {
        if (std::find(seen.begin(), seen.end(), gram) != seen.end())
            continue;
        seen.push_back(gram);
        total += std::min(occurrences(cand, gram), occurrences(ref, gram));
    }
    return total;
}

inline double bleu4(const Tokens& candidate, const Tokens& reference, double epsilon = 1e-9)
{
    if (candidate.empty())
        return 0.0;
    double product = 1.0;
    for (std::size_t n = 1; n <= 4; ++n)
    {
        double precision = 0.0;
        if (candidate.size() >= n)
            precision = static_cast<double>(clipped_overlap(candidate, reference, n))
                        / static_cast<double>(candidate.size() - n + 1);
        product *= std::max(precision, epsilon);
    }
    double const c = static_cast<double>(candidate.size());
    double const r = static_cast<double>(reference.size());
    double const bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return bp * std::pow(product, 0.25);
}

inline double f_measure(double matches, double cand_total, double ref_total, bool f1)
{
    if (ref_total == 0.0)
        return 0.0;
    double const recall = matches / ref_total;
    if (!f1)
        return recall;
    double const precision = cand_total == 0.0 ? 0.0 : matches / cand_total;
    return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

inline double rouge_n(const Tokens& candidate, const Tokens& reference, std::size_t n, bool f1 = false)
{
    if (reference.size() < n)
        return 0.0;
    double const cand_total = candidate.size() >= n ? static_cast<double>(candidate.size() - n + 1) : 0.0;
    return f_measure(static_cast<double>(clipped_overlap(candidate, reference, n)),
                     cand_total,
                     static_cast<double>(reference.size() - n + 1),
                     f1);
}

inline std::size_t lcs(const Tokens& a, const Tokens& b)
{
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
    auto go = [&](auto&& self, std::size_t i, std::size_t j) -> std::size_t {
        if (i == a.size() || j == b.size())
            return 0;
        auto const key = std::make_pair(i, j);
        if (auto it = memo.find(key); it != memo.end())
            return it->second;
        std::size_t best = a[i] == b[j] ? 1 + self(self, i + 1, j + 1) : std::max(self(self, i + 1, j), self(self, i, j + 1));
        memo.emplace(key, best);
        return best;
    };
    return go(go, 0, 0);
}

inline double rouge_l(const Tokens& candidate, const Tokens& reference, bool f1 = false)
{
    if (candidate.empty() || reference.empty())
        return 0.0;
    return f_measure(static_cast<double>(lcs(candidate, reference)),
                     static_cast<double>(candidate.size()),
                     static_cast<double>(reference.size()),
                     f1);
}

inline double population_stddev(const std::vector<double>& values)
{
    double mean = 0.0;
    for (double v: values)
        mean += v;
    mean /= static_cast<double>(values.size());
    double sum = 0.0;
    for (double v: values)
        sum += (v - mean) * (v - mean);
    return std::sqrt(sum / static_cast<double>(values.size()));
}

} // namespace mrta::oracle
