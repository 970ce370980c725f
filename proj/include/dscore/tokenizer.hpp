#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "dscore/common.hpp"

namespace dscore {

// Default token counter: Unicode-aware whitespace split with punctuation
// detachment. The rule, frozen so counts are reproducible across runs:
//
//   * whitespace separates tokens and is never part of one;
//   * within a whitespace-delimited chunk, a token is either
//       - a maximal run of word codepoints (neither space nor punctuation), or
//       - one punctuation codepoint plus the word run immediately after it.
//
// Examples: "hello world" -> [hello][world]; "don't" -> [don]['t];
// "paris." -> [paris][.]; "..." -> [.][.][.]
//
// The token counter is a run-level setting recorded in the run manifest;
// alternative counters can be swapped in behind count_tokens.

struct TokenSpan {
    std::size_t begin = 0;  // byte offset, inclusive
    std::size_t end = 0;    // byte offset, exclusive
};

inline std::vector<TokenSpan> tokenize_spans(std::string_view text) {
    std::vector<TokenSpan> spans;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t start = i;
        char32_t cp = utf8_next(text, i);
        if (is_space_cp(cp)) continue;
        // The opening codepoint (word or punctuation) absorbs the word run
        // behind it; a second punctuation codepoint starts a new token.
        std::size_t j = i;
        while (j < text.size()) {
            std::size_t k = j;
            char32_t c = utf8_next(text, k);
            if (is_space_cp(c) || is_punct_cp(c)) break;
            j = k;
        }
        spans.push_back(TokenSpan{start, j});
        i = j;
    }
    return spans;
}

inline std::size_t count_tokens(std::string_view text) {
    return tokenize_spans(text).size();
}

inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& t : tokenize_spans(text)) {
        out.emplace_back(text.substr(t.begin, t.end - t.begin));
    }
    return out;
}

}  // namespace dscore
