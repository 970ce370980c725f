#pragma once

#include <cctype>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "dscore/common.hpp"
#include "dscore/types.hpp"

namespace dscore {

// ---------------------------------------------------------------------------
// Tolerant JSON extraction from model output.
// ---------------------------------------------------------------------------

namespace detail {

// Returns the end offset (exclusive) of the balanced JSON value starting at
// `start`, or npos when the text ends before it closes. String-aware.
inline std::size_t balanced_end(std::string_view s, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '[' || c == '{') {
            ++depth;
        } else if (c == ']' || c == '}') {
            --depth;
            if (depth == 0) return i + 1;
            if (depth < 0) return std::string_view::npos;
        }
    }
    return std::string_view::npos;
}

}  // namespace detail

// Reasoning-model chatter wrapped in <think>...</think> can contain JSON
// drafts; drop those blocks before scanning for the real output.
inline std::string strip_think_blocks(std::string_view raw) {
    std::string out(raw);
    for (;;) {
        auto open = out.find("<think>");
        if (open == std::string::npos) break;
        auto close = out.find("</think>", open);
        if (close == std::string::npos) {
            out.erase(open);
            break;
        }
        out.erase(open, close + 8 - open);
    }
    return out;
}

// Scans raw text for the first parseable JSON value (chatter before/after is
// ignored). `opener` restricts to '[' or '{'; 0 accepts either. An optional
// predicate rejects candidates so callers can keep scanning for, say, the
// first object that carries a "directive" key.
inline std::optional<Json> first_json_value(
    std::string_view raw, char opener = 0,
    const std::function<bool(const Json&)>& accept = nullptr) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (c != '[' && c != '{') continue;
        if (opener != 0 && c != opener) continue;
        std::size_t end = detail::balanced_end(raw, i);
        if (end == std::string_view::npos) continue;
        Json j = Json::parse(raw.substr(i, end - i), nullptr, false);
        if (j.is_discarded()) continue;
        if (accept && !accept(j)) continue;
        return j;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Mechanical repair (tier 1): deterministic fixes for the malformations LLMs
// produce most: markdown fences, smart quotes, single quotes, bare keys,
// trailing commas, truncated output. Returns the repaired value when the
// rebuilt text parses, otherwise nullopt (tier 2, an LLM reconstitution call,
// is the caller's decision).
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '$';
}

// Rewrites the candidate region into strict JSON with a small state machine.
inline std::string rebuild_json(std::string_view s) {
    std::string out;
    out.reserve(s.size() + 8);
    std::string stack;  // open brackets
    bool in_string = false;
    bool escaped = false;

    auto drop_trailing_comma = [&]() {
        std::size_t e = out.size();
        while (e > 0 && std::isspace(static_cast<unsigned char>(out[e - 1]))) --e;
        if (e > 0 && out[e - 1] == ',') out.erase(e - 1, 1);
    };

    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
                out += c;
            } else if (c == '\\') {
                escaped = true;
                out += c;
            } else if (c == '"') {
                in_string = false;
                out += c;
            } else if (c == '\n') {
                out += "\\n";  // raw newline inside a string literal
            } else {
                out += c;
            }
            ++i;
            continue;
        }
        if (c == '"') {
            in_string = true;
            out += c;
            ++i;
        } else if (c == '\'') {
            // Single-quoted string: convert to double quotes. \' becomes a
            // plain apostrophe (JSON has no such escape).
            out += '"';
            ++i;
            while (i < s.size() && s[i] != '\'') {
                if (s[i] == '\\' && i + 1 < s.size()) {
                    if (s[i + 1] == '\'') {
                        out += '\'';
                    } else {
                        out += s[i];
                        out += s[i + 1];
                    }
                    i += 2;
                    continue;
                }
                if (s[i] == '"') out += '\\';
                out += s[i];
                ++i;
            }
            out += '"';
            if (i < s.size()) ++i;
        } else if (c == '{' || c == '[') {
            stack += c;
            out += c;
            ++i;
        } else if (c == '}' || c == ']') {
            drop_trailing_comma();
            char want = (c == '}') ? '{' : '[';
            if (!stack.empty() && stack.back() == want) {
                stack.pop_back();
                out += c;
                if (stack.empty()) return out;  // top-level value closed; drop trailing chatter
            }
            // Mismatched or surplus closers are dropped.
            ++i;
        } else if (is_ident_char(c)) {
            std::size_t j = i;
            while (j < s.size() && is_ident_char(s[j])) ++j;
            std::string word(s.substr(i, j - i));
            // Keywords and numbers pass through; other bare words get quoted
            // (they are either unquoted keys or unquoted string values).
            bool keyword = word == "true" || word == "false" || word == "null";
            char* num_end = nullptr;
            std::strtod(word.c_str(), &num_end);
            bool numeric = num_end && *num_end == '\0' && !word.empty();
            if (keyword || numeric) {
                out += word;
            } else {
                out += '"';
                out += word;
                out += '"';
            }
            i = j;
        } else {
            out += c;
            ++i;
        }
    }
    if (in_string) out += '"';
    drop_trailing_comma();
    while (!stack.empty()) {
        out += (stack.back() == '{') ? '}' : ']';
        stack.pop_back();
    }
    return out;
}

}  // namespace detail

inline std::optional<Json> mechanical_repair(std::string_view raw) {
    std::string text = strip_think_blocks(raw);
    // Smart quotes become ASCII quotes; they break parsing when a model emits
    // them as string delimiters.
    text = replace_all(text, "“", "\"");
    text = replace_all(text, "”", "\"");
    text = replace_all(text, "‘", "'");
    text = replace_all(text, "’", "'");

    // Candidate region: first opener to end of text. Leading prose and code
    // fences fall away with the slice; the rebuilder stops at the close of
    // the top-level value, which discards trailing chatter, and appends
    // missing closers when the output was truncated.
    auto first = text.find_first_of("[{");
    if (first == std::string::npos) return std::nullopt;
    std::string_view region = std::string_view(text).substr(first);

    Json direct = Json::parse(region, nullptr, false);
    if (!direct.is_discarded()) return direct;

    Json rebuilt = Json::parse(detail::rebuild_json(region), nullptr, false);
    if (!rebuilt.is_discarded()) return rebuilt;
    return std::nullopt;
}

}  // namespace dscore
