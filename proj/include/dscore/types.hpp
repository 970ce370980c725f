#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace dscore {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Corpus types.
// ---------------------------------------------------------------------------

struct Document {
    std::string doc_id;
    std::string source_uri;
    std::string text;  // whitespace-normalized (BOM stripped, CRLF -> LF, ends trimmed)
    std::map<std::string, std::string> metadata;
};

struct Segment {
    std::string segment_id;
    std::string doc_id;
    int index = 0;  // 0-based ordinal within the document
    std::string text;
    int token_count = 0;
};

// ---------------------------------------------------------------------------
// QA types.
// ---------------------------------------------------------------------------

enum class QType { Explicit, Implicit };

inline const char* to_string(QType t) {
    return t == QType::Explicit ? "explicit" : "implicit";
}

inline QType qtype_from_string(const std::string& s) {
    if (s == "explicit") return QType::Explicit;
    if (s == "implicit") return QType::Implicit;
    throw std::invalid_argument("unknown qtype: " + s);
}

enum class Provenance { Generated, RegeneratedInQC };

inline const char* to_string(Provenance p) {
    return p == Provenance::Generated ? "generated" : "regenerated_in_qc";
}

inline Provenance provenance_from_string(const std::string& s) {
    if (s == "generated") return Provenance::Generated;
    if (s == "regenerated_in_qc") return Provenance::RegeneratedInQC;
    throw std::invalid_argument("unknown provenance: " + s);
}

struct QAPair {
    std::string qa_id;
    std::string segment_id;
    std::string question;
    std::string answer;
    QType qtype = QType::Explicit;
    std::optional<std::string> reasoning;  // required non-empty for implicit pairs
    Provenance provenance = Provenance::Generated;
};

// ---------------------------------------------------------------------------
// Quality-control types.
// ---------------------------------------------------------------------------

enum class MatchKind { ExactSubstring, NormalizedSubstring, NotFound, NotApplicable };

inline const char* to_string(MatchKind k) {
    switch (k) {
        case MatchKind::ExactSubstring: return "exact_substring";
        case MatchKind::NormalizedSubstring: return "normalized_substring";
        case MatchKind::NotFound: return "not_found";
        default: return "not_applicable";
    }
}

struct GroundingReport {
    std::string qa_id;
    bool answer_found = false;
    MatchKind match_kind = MatchKind::NotApplicable;
    std::optional<std::pair<std::size_t, std::size_t>> matched_span;  // [begin, end) codepoint offsets
};

enum class Directive { Keep, Delete, Typefix };

inline const char* to_string(Directive d) {
    switch (d) {
        case Directive::Keep: return "KEEP";
        case Directive::Delete: return "DELETE";
        default: return "TYPEFIX";
    }
}

inline Directive directive_from_string(const std::string& s) {
    if (s == "KEEP") return Directive::Keep;
    if (s == "DELETE") return Directive::Delete;
    if (s == "TYPEFIX") return Directive::Typefix;
    throw std::invalid_argument("unknown directive: " + s);
}

struct QCVerdict {
    std::string qa_id;
    Directive directive = Directive::Keep;
    std::optional<QType> corrected_qtype;  // present iff directive == Typefix
    std::string rationale;
};

// ---------------------------------------------------------------------------
// Counterfactual types.
// ---------------------------------------------------------------------------

struct MCQItem {
    std::string qa_id;
    std::string stem;
    std::vector<std::string> options;  // exactly 4
    int correct_index = 0;             // in [0,3]
    int nuanced_index = 0;             // flagged nuanced-deviation distractor, != correct_index
    std::uint64_t rng_seed_used = 0;
};

enum class DistractorVerdict { Acceptable, Regenerate };

struct DistractorAppraisal {
    std::string qa_id;
    struct Entry {
        std::string text;
        DistractorVerdict verdict = DistractorVerdict::Acceptable;
        std::string reason;
    };
    std::vector<Entry> per_distractor;  // exactly 3
};

// ---------------------------------------------------------------------------
// JSONL record forms. Field names are part of the on-disk contract.
// ---------------------------------------------------------------------------

inline Json to_json(const Segment& s) {
    return Json{{"segment_id", s.segment_id},
                {"doc_id", s.doc_id},
                {"index", s.index},
                {"text", s.text},
                {"token_count", s.token_count}};
}

inline Segment segment_from_json(const Json& j) {
    Segment s;
    s.segment_id = j.at("segment_id").get<std::string>();
    s.doc_id = j.at("doc_id").get<std::string>();
    s.index = j.at("index").get<int>();
    s.text = j.at("text").get<std::string>();
    s.token_count = j.at("token_count").get<int>();
    return s;
}

inline Json to_json(const QAPair& p) {
    Json j{{"qa_id", p.qa_id},
           {"segment_id", p.segment_id},
           {"question", p.question},
           {"answer", p.answer},
           {"qtype", to_string(p.qtype)},
           {"reasoning", nullptr},
           {"provenance", to_string(p.provenance)}};
    if (p.reasoning) j["reasoning"] = *p.reasoning;
    return j;
}

inline QAPair qa_from_json(const Json& j) {
    QAPair p;
    p.qa_id = j.at("qa_id").get<std::string>();
    p.segment_id = j.at("segment_id").get<std::string>();
    p.question = j.at("question").get<std::string>();
    p.answer = j.at("answer").get<std::string>();
    p.qtype = qtype_from_string(j.at("qtype").get<std::string>());
    if (j.contains("reasoning") && !j.at("reasoning").is_null()) {
        p.reasoning = j.at("reasoning").get<std::string>();
    }
    if (j.contains("provenance") && j.at("provenance").is_string()) {
        p.provenance = provenance_from_string(j.at("provenance").get<std::string>());
    }
    return p;
}

inline Json to_json(const QCVerdict& v) {
    Json j{{"qa_id", v.qa_id},
           {"directive", to_string(v.directive)},
           {"corrected_qtype", nullptr},
           {"rationale", v.rationale}};
    if (v.corrected_qtype) j["corrected_qtype"] = to_string(*v.corrected_qtype);
    return j;
}

inline QCVerdict verdict_from_json(const Json& j) {
    QCVerdict v;
    v.qa_id = j.at("qa_id").get<std::string>();
    v.directive = directive_from_string(j.at("directive").get<std::string>());
    if (j.contains("corrected_qtype") && !j.at("corrected_qtype").is_null()) {
        v.corrected_qtype = qtype_from_string(j.at("corrected_qtype").get<std::string>());
    }
    if (j.contains("rationale") && j.at("rationale").is_string()) {
        v.rationale = j.at("rationale").get<std::string>();
    }
    return v;
}

inline Json to_json(const MCQItem& m) {
    return Json{{"qa_id", m.qa_id},
                {"stem", m.stem},
                {"options", m.options},
                {"correct_index", m.correct_index},
                {"nuanced_index", m.nuanced_index}};
}

inline MCQItem mcq_from_json(const Json& j) {
    MCQItem m;
    m.qa_id = j.at("qa_id").get<std::string>();
    m.stem = j.at("stem").get<std::string>();
    m.options = j.at("options").get<std::vector<std::string>>();
    m.correct_index = j.at("correct_index").get<int>();
    m.nuanced_index = j.at("nuanced_index").get<int>();
    return m;
}

}  // namespace dscore
