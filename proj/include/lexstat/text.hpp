// Copyright 2026 The lexstat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Small UTF-8 helpers shared by the tokenizer, normalizer and estimator.

#ifndef LEXSTAT_TEXT_HPP_
#define LEXSTAT_TEXT_HPP_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace lexstat::text {

/// Decodes one code point starting at `pos` and advances `pos`. Invalid
/// sequences decode to U+FFFD and consume a single byte.
char32_t next_code_point(std::string_view s, std::size_t& pos);

void append_utf8(std::string& out, char32_t cp);

/// Number of code points (invalid bytes count as one each).
std::size_t code_point_count(std::string_view s);

/// Simple case folding: ASCII, Latin-1, Latin Extended-A, Greek, Cyrillic.
char32_t fold_case(char32_t cp);
std::string fold_case(std::string_view s);

/// True for code points that belong inside a word: letters, digits, marks
/// and every non-punctuation, non-space character outside ASCII (Hangul,
/// CJK, ...).
bool is_word_char(char32_t cp);
bool is_space(char32_t cp);

std::string_view trim(std::string_view s);

/// Trim, collapse internal whitespace runs to a single ASCII space.
std::string collapse_whitespace(std::string_view s);

/// Splits into maximal runs of word characters. Case is preserved.
std::vector<std::string> word_runs(std::string_view s);

bool contains_ci(std::string_view haystack, std::string_view needle);

}  // namespace lexstat::text

#endif  // LEXSTAT_TEXT_HPP_
