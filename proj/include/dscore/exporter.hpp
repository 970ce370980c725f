#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dscore/backend.hpp"
#include "dscore/common.hpp"
#include "dscore/json_repair.hpp"
#include "dscore/ledger.hpp"
#include "dscore/prompts.hpp"
#include "dscore/types.hpp"

namespace dscore {

enum class ExportFormat { QaPlain, QaCot, Mcq };

inline std::string to_string(ExportFormat f) {
    switch (f) {
        case ExportFormat::QaPlain: return "qa_plain";
        case ExportFormat::QaCot: return "qa_cot";
        case ExportFormat::Mcq: return "mcq";
    }
    return "qa_cot";
}

inline ExportFormat export_format_from_string(const std::string& s) {
    if (s == "qa_plain") return ExportFormat::QaPlain;
    if (s == "qa_cot") return ExportFormat::QaCot;
    if (s == "mcq") return ExportFormat::Mcq;
    throw std::invalid_argument("unknown export format: " + s +
                                " (expected qa_plain, qa_cot, or mcq)");
}

// Frozen serialization detail: in qa_cot records the reasoning trace and the
// final answer are joined by this delimiter.
inline constexpr std::string_view kAnswerDelimiter = "\n\nAnswer: ";

inline std::string answer_letter(int correct_index) {
    if (correct_index < 0 || correct_index > 3)
        throw std::out_of_range("answer_letter: correct_index must be 0..3");
    return std::string(1, static_cast<char>('A' + correct_index));
}

struct SchemaError {
    std::string path;
    std::string reason;
};

// Structural validation of one exported line. nullopt means the line is
// schema-valid for the given format.
inline std::optional<SchemaError> validate_record(const std::string& line, ExportFormat fmt) {
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) return SchemaError{"", "parse"};
    if (!j.is_object()) return SchemaError{"", "must be a JSON object"};

    auto require_string = [&](const char* key) -> std::optional<SchemaError> {
        if (!j.contains(key)) return SchemaError{key, "required"};
        if (!j.at(key).is_string()) return SchemaError{key, "must be a string"};
        return std::nullopt;
    };

    if (fmt == ExportFormat::Mcq) {
        if (auto e = require_string("stem")) return e;
        if (!j.contains("options")) return SchemaError{"options", "required"};
        const auto& opts = j.at("options");
        if (!opts.is_array() || opts.size() != 4) return SchemaError{"options", "cardinality"};
        for (const auto& o : opts)
            if (!o.is_string()) return SchemaError{"options", "must contain strings"};
        if (auto e = require_string("answer_letter")) return e;
        const auto& letter = j.at("answer_letter").get_ref<const std::string&>();
        if (letter.size() != 1 || letter[0] < 'A' || letter[0] > 'D')
            return SchemaError{"answer_letter", "range"};
        return std::nullopt;
    }

    for (const char* key : {"instruction", "input", "output"})
        if (auto e = require_string(key)) return e;
    return std::nullopt;
}

namespace detail {

inline std::string record_schema_hint(ExportFormat fmt) {
    if (fmt == ExportFormat::Mcq)
        return "{\"qa_id\": string, \"stem\": string, \"options\": [string, string, string, "
               "string], \"correct_index\": 0..3, \"nuanced_index\": 0..3}";
    return "{\"qa_id\": string, \"segment_id\": string, \"question\": string, \"answer\": "
           "string, \"qtype\": \"explicit\"|\"implicit\", \"reasoning\": string|null, "
           "\"provenance\": string}";
}

inline std::string dedup_key(const QAPair& qa) {
    return collapse_whitespace(casefold(qa.question)) + '\x1f' +
           collapse_whitespace(casefold(qa.answer));
}

}  // namespace detail

// Two-tier reconstruction of a deficient record: deterministic mechanical
// fixes first, then a single model call that rewrites the raw text as strict
// JSON. Both failing means the record is unrepairable.
inline Expected<Json, std::string> repair_record(const std::string& malformed,
                                                 BackendClient* client, ExportFormat fmt,
                                                 const PromptConfig& prompts = {},
                                                 RunLedger* ledger = nullptr) {
    if (auto fixed = mechanical_repair(malformed); fixed && fixed->is_object()) {
        if (ledger) ledger->add("export.repaired_mechanical", 1);
        return *fixed;
    }
    if (client != nullptr) {
        auto reply =
            client->complete(build_repair_prompt(malformed, detail::record_schema_hint(fmt), prompts));
        if (reply.has_value()) {
            auto parsed = mechanical_repair(reply.value().text);
            if (parsed && parsed->is_object() && !parsed->value("unrepairable", false)) {
                if (ledger) ledger->add("export.repaired_llm", 1);
                return *parsed;
            }
        }
    }
    return make_unexpected(std::string("unrepairable"));
}

// Normalized-question dedup: casefold and whitespace-collapse question and
// answer; the first occurrence of a key wins.
inline std::vector<QAPair> dedup(const std::vector<QAPair>& pairs, RunLedger* ledger = nullptr) {
    std::vector<QAPair> out;
    std::set<std::string> seen;
    for (const auto& qa : pairs) {
        if (seen.insert(detail::dedup_key(qa)).second) {
            out.push_back(qa);
        } else if (ledger) {
            ledger->add("export.deduped", 1);
        }
    }
    return out;
}

struct ExportOptions {
    ExportFormat format = ExportFormat::QaCot;
    bool include_context = false;
    bool dedup = true;
    std::string config_hash;
    Json template_versions = Json::object();
    Json seeds = Json::object();
    PromptConfig prompts;
};

struct ExportResult {
    std::vector<std::string> lines;        // serialized records, one per element
    std::vector<std::string> quarantined;  // raw inputs that defeated both repair tiers
    std::int64_t n_input = 0;
    std::int64_t n_exported = 0;
    std::int64_t n_quarantined = 0;
    std::int64_t n_deduped = 0;
    Json manifest;
};

namespace detail {

inline Json export_manifest(const ExportOptions& opt, const ExportResult& r) {
    return Json{{"format", to_string(opt.format)},
                {"include_context", opt.include_context},
                {"n", r.n_exported},
                {"n_input", r.n_input},
                {"n_exported", r.n_exported},
                {"n_quarantined", r.n_quarantined},
                {"n_deduped", r.n_deduped},
                {"config_hash", opt.config_hash},
                {"template_versions", opt.template_versions},
                {"seeds", opt.seeds}};
}

inline Json qa_record(const QAPair& qa, const ExportOptions& opt,
                      const std::map<std::string, std::string>* segment_text,
                      RunLedger* ledger) {
    std::string input;
    if (opt.include_context && segment_text != nullptr) {
        auto at = segment_text->find(qa.segment_id);
        if (at != segment_text->end()) {
            input = at->second;
        } else if (ledger) {
            ledger->add("export.context_missing", 1);
        }
    }
    std::string output = qa.answer;
    if (opt.format == ExportFormat::QaCot && qa.qtype == QType::Implicit && qa.reasoning &&
        !qa.reasoning->empty()) {
        output = *qa.reasoning;
        output += kAnswerDelimiter;
        output += qa.answer;
    }
    return Json{{"instruction", qa.question}, {"input", input}, {"output", output}};
}

inline Json mcq_record(const MCQItem& it) {
    if (it.options.size() != 4)
        throw std::invalid_argument("mcq export: item " + it.qa_id + " has " +
                                    std::to_string(it.options.size()) + " options, expected 4");
    return Json{{"stem", it.stem}, {"options", it.options}, {"answer_letter",
                                                             answer_letter(it.correct_index)}};
}

inline void check_context_precondition(const ExportOptions& opt,
                                       const std::map<std::string, std::string>* segment_text) {
    if (opt.include_context && segment_text == nullptr)
        throw std::invalid_argument("include_context requires segment texts");
}

}  // namespace detail

// Typed export of in-memory QA pairs. Throws on kind/format mismatch.
inline ExportResult export_qa_pairs(const std::vector<QAPair>& pairs, const ExportOptions& opt,
                                    const std::map<std::string, std::string>* segment_text = nullptr,
                                    RunLedger* ledger = nullptr) {
    if (opt.format == ExportFormat::Mcq)
        throw std::invalid_argument("format 'mcq' requires multiple-choice items, not QA pairs");
    detail::check_context_precondition(opt, segment_text);
    ExportResult r;
    r.n_input = static_cast<std::int64_t>(pairs.size());
    std::set<std::string> seen;
    for (const auto& qa : pairs) {
        if (opt.dedup && !seen.insert(detail::dedup_key(qa)).second) {
            ++r.n_deduped;
            if (ledger) ledger->add("export.deduped", 1);
            continue;
        }
        r.lines.push_back(detail::qa_record(qa, opt, segment_text, ledger).dump());
        ++r.n_exported;
    }
    r.manifest = detail::export_manifest(opt, r);
    return r;
}

// Typed export of in-memory MCQ items. Throws on kind/format mismatch.
inline ExportResult export_mcq_items(const std::vector<MCQItem>& items, const ExportOptions& opt) {
    if (opt.format != ExportFormat::Mcq)
        throw std::invalid_argument("multiple-choice items require format 'mcq', not " +
                                    to_string(opt.format));
    ExportResult r;
    r.n_input = static_cast<std::int64_t>(items.size());
    for (const auto& it : items) {
        r.lines.push_back(detail::mcq_record(it).dump());
        ++r.n_exported;
    }
    r.manifest = detail::export_manifest(opt, r);
    return r;
}

// Raw-line export: tolerant of malformed input. Each line is parsed strictly,
// then mechanically repaired, then handed to the model once; records failing
// all three are quarantined with their original bytes. Conservation:
// n_exported + n_quarantined + n_deduped = n_input.
inline ExportResult export_lines(const std::vector<std::string>& raw_lines,
                                 const ExportOptions& opt, BackendClient* repair_client = nullptr,
                                 const std::map<std::string, std::string>* segment_text = nullptr,
                                 RunLedger* ledger = nullptr) {
    detail::check_context_precondition(opt, segment_text);
    ExportResult r;
    std::set<std::string> seen;

    for (const auto& raw : raw_lines) {
        if (raw.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        ++r.n_input;

        std::optional<QAPair> qa;
        std::optional<MCQItem> mcq;
        auto try_convert = [&](const Json& cand) {
            try {
                if (opt.format == ExportFormat::Mcq)
                    mcq = mcq_from_json(cand);
                else
                    qa = qa_from_json(cand);
                return true;
            } catch (const std::exception&) {
                return false;
            }
        };

        // escalate: strict parse, mechanical repair, one model call
        bool converted = false;
        std::string strict_dump;
        if (Json strict = Json::parse(raw, nullptr, false); !strict.is_discarded()) {
            strict_dump = strict.dump();
            converted = try_convert(strict);
        }
        if (!converted) {
            auto fixed = mechanical_repair(raw);
            if (fixed && fixed->is_object() && fixed->dump() != strict_dump &&
                try_convert(*fixed)) {
                converted = true;
                if (ledger) ledger->add("export.repaired_mechanical", 1);
            }
        }
        if (!converted && repair_client != nullptr) {
            auto reply = repair_client->complete(
                build_repair_prompt(raw, detail::record_schema_hint(opt.format), opt.prompts));
            if (reply.has_value()) {
                auto parsed = mechanical_repair(reply.value().text);
                if (parsed && parsed->is_object() && !parsed->value("unrepairable", false) &&
                    try_convert(*parsed)) {
                    converted = true;
                    if (ledger) ledger->add("export.repaired_llm", 1);
                }
            }
        }

        if (!converted) {
            r.quarantined.push_back(raw);
            ++r.n_quarantined;
            if (ledger) ledger->add("export.quarantined", 1);
            continue;
        }

        try {
            if (opt.format == ExportFormat::Mcq) {
                r.lines.push_back(detail::mcq_record(*mcq).dump());
            } else {
                if (opt.dedup && !seen.insert(detail::dedup_key(*qa)).second) {
                    ++r.n_deduped;
                    if (ledger) ledger->add("export.deduped", 1);
                    continue;
                }
                r.lines.push_back(detail::qa_record(*qa, opt, segment_text, ledger).dump());
            }
            ++r.n_exported;
        } catch (const std::exception&) {
            // structurally parsed but unusable (e.g. wrong option count)
            r.quarantined.push_back(raw);
            ++r.n_quarantined;
            if (ledger) ledger->add("export.quarantined", 1);
        }
    }

    if (ledger) ledger->add("export.exported", r.n_exported);
    r.manifest = detail::export_manifest(opt, r);
    return r;
}

}  // namespace dscore
