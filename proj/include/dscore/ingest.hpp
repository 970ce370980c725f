#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dscore/common.hpp"
#include "dscore/jsonl.hpp"
#include "dscore/tokenizer.hpp"
#include "dscore/types.hpp"

namespace dscore {

// ---------------------------------------------------------------------------
// Corpus loading.
// ---------------------------------------------------------------------------

enum class CorpusFormat { PlainText, JsonlWithTextField };

enum class OnError { Abort, Skip };

struct LoadOptions {
    CorpusFormat format = CorpusFormat::PlainText;
    std::string text_field = "text";
    OnError on_error = OnError::Abort;
};

struct LoadResult {
    std::vector<Document> documents;
    std::vector<LineDiagnostic> diagnostics;
};

// Document normalization: strip UTF-8 BOM, CRLF/CR -> LF, trim the ends.
// Interior whitespace is preserved so segment text stays faithful.
inline std::string normalize_document_text(std::string_view raw) {
    std::string_view s = raw;
    if (s.size() >= 3 && static_cast<unsigned char>(s[0]) == 0xEF &&
        static_cast<unsigned char>(s[1]) == 0xBB && static_cast<unsigned char>(s[2]) == 0xBF) {
        s.remove_prefix(3);
    }
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r') {
            if (i + 1 >= s.size() || s[i + 1] != '\n') out += '\n';
            continue;
        }
        out += s[i];
    }
    return trim(out);
}

// doc_ids feed segment and qa ids of the form "<doc>::s<k>::q<k>"; keep the
// separator out of user-derived ids.
inline std::string sanitize_id(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        out += (c == ':' || is_space_cp(static_cast<unsigned char>(c))) ? '_' : c;
    }
    return out.empty() ? std::string("doc") : out;
}

namespace detail {

inline std::string unique_doc_id(std::string base, std::set<std::string>& taken) {
    std::string id = base;
    int n = 1;
    while (taken.count(id)) id = base + "_" + std::to_string(++n);
    taken.insert(id);
    return id;
}

}  // namespace detail

inline LoadResult load_corpus(const std::vector<std::string>& paths, const LoadOptions& opt = {}) {
    LoadResult result;
    std::set<std::string> taken_ids;
    for (const auto& path : paths) {
        const std::string stem = sanitize_id(std::filesystem::path(path).stem().string());
        const std::string filename = std::filesystem::path(path).filename().string();
        if (opt.format == CorpusFormat::PlainText) {
            std::string text = normalize_document_text(read_text_file(path));
            if (text.empty()) {
                LineDiagnostic d{path, 1, "document is empty after whitespace normalization"};
                if (opt.on_error == OnError::Abort) throw std::runtime_error(to_string(d));
                result.diagnostics.push_back(d);
                continue;
            }
            Document doc;
            doc.doc_id = detail::unique_doc_id(stem, taken_ids);
            doc.source_uri = path;
            doc.text = std::move(text);
            doc.metadata = {{"source", filename}};
            result.documents.push_back(std::move(doc));
        } else {
            std::size_t record_index = 0;
            auto diags = read_jsonl(path, [&](Json&& j, std::size_t line_no) {
                const std::size_t idx = record_index++;
                if (!j.contains(opt.text_field) || !j.at(opt.text_field).is_string()) {
                    LineDiagnostic d{path, line_no,
                                     "record has no string field \"" + opt.text_field + "\""};
                    if (opt.on_error == OnError::Abort) throw std::runtime_error(to_string(d));
                    result.diagnostics.push_back(d);
                    return;
                }
                std::string text = normalize_document_text(j.at(opt.text_field).get<std::string>());
                if (text.empty()) {
                    LineDiagnostic d{path, line_no, "record text is empty after normalization"};
                    if (opt.on_error == OnError::Abort) throw std::runtime_error(to_string(d));
                    result.diagnostics.push_back(d);
                    return;
                }
                Document doc;
                std::string base = stem + "-" + std::to_string(idx);
                if (j.contains("id") && j.at("id").is_string()) {
                    base = sanitize_id(j.at("id").get<std::string>());
                }
                doc.doc_id = detail::unique_doc_id(base, taken_ids);
                doc.source_uri = path;
                doc.text = std::move(text);
                doc.metadata = {{"source", filename}, {"record_index", std::to_string(idx)}};
                result.documents.push_back(std::move(doc));
            });
            for (auto& d : diags) {
                if (opt.on_error == OnError::Abort) throw std::runtime_error(to_string(d));
                result.diagnostics.push_back(std::move(d));
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Sentence boundaries.
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_sentence_final(char32_t cp) {
    switch (cp) {
        case U'.': case U'!': case U'?':
        case 0x2026:  // ellipsis
        case 0x3002: case 0xFF01: case 0xFF1F:
            return true;
        default:
            return false;
    }
}

inline bool is_closing_trail(char32_t cp) {
    switch (cp) {
        case U'"': case U'\'': case U')': case U']': case U'}':
        case 0x2019: case 0x201D: case 0x00BB: case 0x300D: case 0x300F:
            return true;
        default:
            return false;
    }
}

}  // namespace detail

// Splits into sentence spans that cover the text exactly (each sentence keeps
// its trailing whitespace), so concatenation reconstructs the input. A
// boundary falls after sentence-final punctuation (plus closing quotes or
// brackets) followed by whitespace, and after blank lines.
inline std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(std::string_view text) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t start = 0;
    std::size_t i = 0;
    bool saw_final_punct = false;
    int newline_run = 0;
    while (i < text.size()) {
        std::size_t cp_start = i;
        char32_t cp = utf8_next(text, i);
        if (is_space_cp(cp)) {
            if (cp == U'\n') ++newline_run;
            bool paragraph_break = newline_run >= 2;
            if (saw_final_punct || paragraph_break) {
                // Extend over the rest of the whitespace run.
                while (i < text.size()) {
                    std::size_t k = i;
                    if (!is_space_cp(utf8_next(text, k))) break;
                    i = k;
                }
                spans.emplace_back(start, i);
                start = i;
                saw_final_punct = false;
                newline_run = 0;
            }
            continue;
        }
        newline_run = 0;
        if (detail::is_sentence_final(cp)) {
            saw_final_punct = true;
        } else if (!(saw_final_punct && detail::is_closing_trail(cp))) {
            saw_final_punct = false;
        }
        (void)cp_start;
    }
    if (start < text.size()) spans.emplace_back(start, text.size());
    return spans;
}

// ---------------------------------------------------------------------------
// Token-budget segmentation.
// ---------------------------------------------------------------------------

constexpr int kMinTokenBudget = 16;
constexpr int kDefaultTokenBudget = 256;

struct SegmentationNotes {
    std::vector<std::string> warnings;
};

namespace detail {

inline Segment make_segment(const Document& doc, int index, std::string_view raw_text) {
    Segment s;
    s.doc_id = doc.doc_id;
    s.index = index;
    s.segment_id = doc.doc_id + "::s" + std::to_string(index);
    s.text = trim(raw_text);
    s.token_count = static_cast<int>(count_tokens(s.text));
    return s;
}

// Splits one over-budget sentence at token boundaries into <= max_tokens
// pieces (keeps segment text a contiguous slice of the source).
inline void hard_split(const Document& doc, std::string_view piece, int max_tokens,
                       std::vector<Segment>& out) {
    auto spans = tokenize_spans(piece);
    std::size_t t = 0;
    while (t < spans.size()) {
        std::size_t last = std::min(t + static_cast<std::size_t>(max_tokens), spans.size());
        std::size_t begin = spans[t].begin;
        std::size_t end = (last < spans.size()) ? spans[last].begin : piece.size();
        out.push_back(make_segment(doc, static_cast<int>(out.size()),
                                   piece.substr(begin, end - begin)));
        t = last;
    }
}

}  // namespace detail

// Deterministic greedy sentence packer: sentences are packed in order while
// the running token count stays within max_tokens; a single sentence over the
// cap is hard-split at token boundaries. Alternative scorers (e.g. an
// LM-perplexity chunker) can replace this behind the same signature.
inline std::vector<Segment> segment_by_budget(const Document& doc, int max_tokens,
                                              SegmentationNotes* notes = nullptr) {
    if (max_tokens < kMinTokenBudget) {
        throw std::invalid_argument("max_tokens must be >= " + std::to_string(kMinTokenBudget));
    }
    if (doc.text.empty()) {
        throw std::invalid_argument("document " + doc.doc_id +
                                    " is empty after whitespace normalization");
    }
    const int total = static_cast<int>(count_tokens(doc.text));
    std::vector<Segment> out;
    if (total < kMinTokenBudget) {
        // Degenerate inputs pass through rather than failing a batch run.
        if (notes) {
            notes->warnings.push_back("document " + doc.doc_id + " has only " +
                                      std::to_string(total) +
                                      " tokens; emitted as a single segment");
        }
        out.push_back(detail::make_segment(doc, 0, doc.text));
        return out;
    }

    std::string_view text = doc.text;
    auto sentences = sentence_spans(text);
    std::size_t cur_begin = 0, cur_end = 0;
    int cur_tokens = 0;
    auto flush = [&]() {
        if (cur_end > cur_begin) {
            out.push_back(detail::make_segment(doc, static_cast<int>(out.size()),
                                               text.substr(cur_begin, cur_end - cur_begin)));
        }
        cur_tokens = 0;
    };
    for (auto [sb, se] : sentences) {
        std::string_view sent = text.substr(sb, se - sb);
        const int sent_tokens = static_cast<int>(count_tokens(sent));
        if (sent_tokens > max_tokens) {
            flush();
            detail::hard_split(doc, sent, max_tokens, out);
            cur_begin = cur_end = se;
            continue;
        }
        if (cur_tokens > 0 && cur_tokens + sent_tokens > max_tokens) {
            flush();
            cur_begin = sb;
        }
        if (cur_tokens == 0) cur_begin = sb;
        cur_end = se;
        cur_tokens += sent_tokens;
    }
    flush();
    return out;
}

// ---------------------------------------------------------------------------
// Structural segmentation.
// ---------------------------------------------------------------------------

enum class DelimiterSpec { BlankLine, HeadingRegex, CustomRegex };

struct StructuralOptions {
    DelimiterSpec delimiter = DelimiterSpec::BlankLine;
    std::string custom_regex;  // used when delimiter == CustomRegex
    int max_tokens = kDefaultTokenBudget;
};

namespace detail {

// Offsets where a new structural part begins (position 0 is implicit).
inline std::vector<std::size_t> structural_breaks(const std::string& text,
                                                  const StructuralOptions& opt) {
    std::vector<std::size_t> breaks;
    if (opt.delimiter == DelimiterSpec::BlankLine) {
        // A blank line (newline, optional horizontal space, newline) ends a part;
        // the delimiter itself is boundary whitespace and belongs to the left part.
        std::size_t i = 0;
        while (i < text.size()) {
            if (text[i] == '\n') {
                std::size_t j = i + 1;
                while (j < text.size() && (text[j] == ' ' || text[j] == '\t')) ++j;
                if (j < text.size() && text[j] == '\n') {
                    ++j;
                    while (j < text.size() && (text[j] == '\n' || text[j] == ' ' || text[j] == '\t'))
                        ++j;
                    if (j < text.size()) breaks.push_back(j);
                    i = j;
                    continue;
                }
            }
            ++i;
        }
        return breaks;
    }
    std::string pattern = opt.delimiter == DelimiterSpec::HeadingRegex
                              ? std::string("^#{1,6}[ \\t].*$")
                              : opt.custom_regex;
    std::regex re;
    try {
        re.assign(pattern, std::regex::ECMAScript | std::regex::multiline);
    } catch (const std::regex_error& e) {
        throw std::invalid_argument(std::string("invalid delimiter regex: ") + e.what());
    }
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re);
         it != std::sregex_iterator(); ++it) {
        std::size_t pos = static_cast<std::size_t>(it->position());
        if (pos > 0) breaks.push_back(pos);  // the match starts a new part
    }
    return breaks;
}

}  // namespace detail

// Partitions at delimiter boundaries; parts exceeding the token cap fall back
// to the budget packer.
inline std::vector<Segment> segment_structural(const Document& doc, const StructuralOptions& opt,
                                               SegmentationNotes* notes = nullptr) {
    if (doc.text.empty()) {
        throw std::invalid_argument("document " + doc.doc_id +
                                    " is empty after whitespace normalization");
    }
    auto breaks = detail::structural_breaks(doc.text, opt);
    std::vector<std::pair<std::size_t, std::size_t>> parts;
    std::size_t start = 0;
    for (std::size_t b : breaks) {
        if (b > start) parts.emplace_back(start, b);
        start = b;
    }
    if (start < doc.text.size()) parts.emplace_back(start, doc.text.size());

    std::vector<Segment> out;
    for (auto [pb, pe] : parts) {
        std::string_view part(doc.text.data() + pb, pe - pb);
        if (trim_view(part).empty()) continue;
        if (static_cast<int>(count_tokens(part)) <= opt.max_tokens) {
            out.push_back(detail::make_segment(doc, static_cast<int>(out.size()), part));
        } else {
            Document sub;
            sub.doc_id = doc.doc_id;
            sub.text = trim(part);
            for (auto& seg : segment_by_budget(sub, opt.max_tokens, notes)) {
                seg.index = static_cast<int>(out.size());
                seg.segment_id = doc.doc_id + "::s" + std::to_string(seg.index);
                out.push_back(std::move(seg));
            }
        }
    }
    return out;
}

}  // namespace dscore
