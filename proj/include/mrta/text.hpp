// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mrta::text
{

[[nodiscard]] bool is_space(char32_t cp) noexcept;
[[nodiscard]] bool is_punct(char32_t cp) noexcept;
[[nodiscard]] char32_t fold_case(char32_t cp) noexcept;

[[nodiscard]] std::u32string decode_utf8(std::string_view text);
[[nodiscard]] std::string encode_utf8(std::u32string_view text);

/// Simple case folding over the whole string.
[[nodiscard]] std::string fold(std::string_view text);

/// Trims and collapses runs of whitespace to a single ASCII space.
[[nodiscard]] std::string collapse_whitespace(std::string_view text);

[[nodiscard]] std::string_view trim(std::string_view text) noexcept;

/// Splits on '\n', dropping a trailing '\r' from each line.
[[nodiscard]] std::vector<std::string_view> split_lines(std::string_view text);

[[nodiscard]] bool starts_with_icase(std::string_view text, std::string_view prefix) noexcept;
[[nodiscard]] bool contains_icase(std::string_view text, std::string_view needle);

} // namespace mrta::text
