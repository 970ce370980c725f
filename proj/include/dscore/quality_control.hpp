#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dscore/backend.hpp"
#include "dscore/common.hpp"
#include "dscore/generation.hpp"
#include "dscore/json_repair.hpp"
#include "dscore/ledger.hpp"
#include "dscore/prompts.hpp"
#include "dscore/types.hpp"

namespace dscore {

namespace detail {

// Casefolded, whitespace-collapsed copy of text plus a map from each
// normalized byte to the source byte offset it came from (one extra entry at
// the end marks one-past-the-last source byte), so normalized matches can be
// reported as spans into the original text.
struct NormalizedView {
    std::string text;
    std::vector<std::size_t> to_source;
};

inline NormalizedView normalized_view(std::string_view src) {
    NormalizedView out;
    out.text.reserve(src.size());
    out.to_source.reserve(src.size() + 1);
    std::size_t i = 0;
    bool pending_space = false;
    while (i < src.size()) {
        std::size_t at = i;
        char32_t cp = utf8_next(src, i);
        if (is_space_cp(cp)) {
            if (!out.text.empty()) pending_space = true;
            continue;
        }
        if (pending_space) {
            out.text += ' ';
            out.to_source.push_back(at);
            pending_space = false;
        }
        std::size_t before = out.text.size();
        utf8_append(out.text, casefold_cp(cp));
        for (std::size_t b = before; b < out.text.size(); ++b) out.to_source.push_back(at);
    }
    out.to_source.push_back(src.size());
    return out;
}

// Byte offset -> codepoint offset, for reporting character positions.
inline std::size_t codepoint_index(std::string_view text, std::size_t byte_offset) {
    std::size_t count = 0, i = 0;
    while (i < text.size() && i < byte_offset) {
        utf8_next(text, i);
        ++count;
    }
    return count;
}

}  // namespace detail

// Deterministic fidelity pre-check: is the explicit answer retrievable from
// the segment text, verbatim or after normalization? The result is advisory;
// it annotates the adjudication prompt rather than deleting anything itself.
inline GroundingReport grounding_prefilter(const QAPair& qa, const Segment& segment) {
    if (qa.segment_id != segment.segment_id)
        throw std::invalid_argument("grounding_prefilter: pair " + qa.qa_id + " belongs to " +
                                    qa.segment_id + ", not " + segment.segment_id);
    GroundingReport rep;
    rep.qa_id = qa.qa_id;
    if (qa.qtype == QType::Implicit) {
        rep.answer_found = false;
        rep.match_kind = MatchKind::NotApplicable;
        return rep;
    }
    auto exact = segment.text.find(qa.answer);
    if (!qa.answer.empty() && exact != std::string::npos) {
        rep.answer_found = true;
        rep.match_kind = MatchKind::ExactSubstring;
        rep.matched_span = {detail::codepoint_index(segment.text, exact),
                            detail::codepoint_index(segment.text, exact + qa.answer.size())};
        return rep;
    }
    std::string norm_answer = strip_terminal_punct(collapse_whitespace(casefold(qa.answer)));
    auto view = detail::normalized_view(segment.text);
    auto hit = norm_answer.empty() ? std::string::npos : view.text.find(norm_answer);
    if (hit != std::string::npos) {
        rep.answer_found = true;
        rep.match_kind = MatchKind::NormalizedSubstring;
        rep.matched_span = {
            detail::codepoint_index(segment.text, view.to_source[hit]),
            detail::codepoint_index(segment.text, view.to_source[hit + norm_answer.size()])};
        return rep;
    }
    rep.answer_found = false;
    rep.match_kind = MatchKind::NotFound;
    return rep;
}

struct QCOptions {
    int parse_retries = 3;   // adjudication attempts before fail-closed DELETE
    int floor_attempts = 3;  // regeneration attempts per explicit-less segment
    PromptConfig prompts;
    GenerationOptions regen;  // used by floor regeneration
};

namespace detail {

inline Expected<QCVerdict, std::string> parse_verdict(const std::string& raw,
                                                      const QAPair& qa) {
    std::string cleaned = strip_think_blocks(raw);
    auto has_directive = [](const Json& j) { return j.is_object() && j.contains("directive"); };
    auto obj = first_json_value(cleaned, '{', has_directive);
    if (!obj) {
        auto repaired = mechanical_repair(cleaned);
        if (repaired && has_directive(*repaired)) obj = std::move(repaired);
    }
    if (!obj) return make_unexpected(std::string("no verdict object in reply"));
    if (!(*obj)["directive"].is_string())
        return make_unexpected(std::string("directive is not a string"));

    QCVerdict v;
    v.qa_id = qa.qa_id;
    std::string d = casefold((*obj)["directive"].get<std::string>());
    if (d == "keep") {
        v.directive = Directive::Keep;
    } else if (d == "delete") {
        v.directive = Directive::Delete;
    } else if (d == "typefix") {
        v.directive = Directive::Typefix;
    } else {
        return make_unexpected("unknown directive \"" + (*obj)["directive"].get<std::string>() + "\"");
    }
    if (obj->contains("rationale") && (*obj)["rationale"].is_string())
        v.rationale = (*obj)["rationale"].get<std::string>();

    if (v.directive == Directive::Typefix) {
        QType corrected = qa.qtype == QType::Explicit ? QType::Implicit : QType::Explicit;
        if (obj->contains("corrected_type") && (*obj)["corrected_type"].is_string()) {
            std::string c = casefold((*obj)["corrected_type"].get<std::string>());
            if (c == "explicit")
                corrected = QType::Explicit;
            else if (c == "implicit")
                corrected = QType::Implicit;
            else
                return make_unexpected("unknown corrected_type \"" +
                                       (*obj)["corrected_type"].get<std::string>() + "\"");
        }
        if (corrected == qa.qtype) {
            // A "fix" to the current label is a keep.
            v.directive = Directive::Keep;
        } else {
            v.corrected_qtype = corrected;
        }
    }
    return v;
}

}  // namespace detail

// One LLM fidelity/type judgment for one pair. Unparseable replies are
// re-asked up to the budget; when the budget runs out (or the backend fails)
// the verdict falls closed to DELETE and the event is ledgered.
inline QCVerdict adjudicate(const QAPair& qa, const Segment& segment, BackendClient& client,
                            RunLedger* ledger = nullptr, const QCOptions& opts = {}) {
    GroundingReport grounding = grounding_prefilter(qa, segment);
    const ChatPrompt base = build_adjudication_prompt(qa, segment, grounding, opts.prompts);
    const int budget = opts.parse_retries < 1 ? 1 : opts.parse_retries;
    std::string defect;
    for (int attempt = 1; attempt <= budget; ++attempt) {
        ChatPrompt prompt = base;
        if (!defect.empty()) {
            prompt.user += "\n\n" + corrective_instruction(defect);
            if (ledger) ledger->add("qc.adjudication_retries");
        }
        auto completion = client.complete(prompt);
        if (!completion.has_value()) {
            defect = completion.error().message;
            if (!retryable(completion.error().kind)) break;
            continue;
        }
        auto verdict = detail::parse_verdict(completion->text, qa);
        if (verdict.has_value()) return *verdict;
        defect = verdict.error();
    }
    if (ledger) {
        ledger->add("qc.adjudication_failed");
        ledger->note("adjudication exhausted for " + qa.qa_id + " (" + defect +
                     "); fail-closed DELETE");
    }
    QCVerdict v;
    v.qa_id = qa.qa_id;
    v.directive = Directive::Delete;
    v.rationale = "adjudication unresolvable after " + std::to_string(budget) +
                  " attempts; deleted fail-closed";
    return v;
}

// Supplies a reasoning trace for a pair that TYPEFIX just re-labeled
// implicit. Returns nullopt when no trace could be obtained.
using BackfillFn = std::function<std::optional<std::string>(const QAPair&)>;

inline BackfillFn make_llm_backfill(const Segment& segment, BackendClient& client,
                                    const QCOptions& opts = {}) {
    return [&segment, &client, opts](const QAPair& qa) -> std::optional<std::string> {
        auto completion = client.complete(build_backfill_prompt(qa, segment, opts.prompts));
        if (!completion.has_value()) return std::nullopt;
        auto obj = first_json_value(strip_think_blocks(completion->text), '{');
        if (!obj) {
            auto repaired = mechanical_repair(completion->text);
            if (repaired) obj = std::move(repaired);
        }
        if (!obj || !obj->is_object() || !obj->contains("reasoning") ||
            !(*obj)["reasoning"].is_string())
            return std::nullopt;
        std::string r = (*obj)["reasoning"].get<std::string>();
        if (r.empty()) return std::nullopt;
        return r;
    };
}

// Applies one verdict per pair. KEEP passes through, DELETE drops, TYPEFIX
// flips the type label; a flip to implicit must end up with a non-empty
// reasoning trace (via backfill), else the pair is dropped fail-closed.
inline std::vector<QAPair> apply_verdicts(const std::vector<QAPair>& pairs,
                                          const std::vector<QCVerdict>& verdicts,
                                          const BackfillFn& backfill = nullptr,
                                          RunLedger* ledger = nullptr) {
    std::map<std::string, const QCVerdict*> by_id;
    for (const auto& v : verdicts) by_id[v.qa_id] = &v;
    if (by_id.size() != verdicts.size())
        throw std::invalid_argument("apply_verdicts: duplicate verdict qa_id");
    if (verdicts.size() != pairs.size())
        throw std::invalid_argument("apply_verdicts: " + std::to_string(pairs.size()) +
                                    " pairs but " + std::to_string(verdicts.size()) + " verdicts");

    std::vector<QAPair> out;
    for (const auto& qa : pairs) {
        auto it = by_id.find(qa.qa_id);
        if (it == by_id.end())
            throw std::invalid_argument("apply_verdicts: no verdict for " + qa.qa_id);
        const QCVerdict& v = *it->second;
        switch (v.directive) {
            case Directive::Keep:
                out.push_back(qa);
                break;
            case Directive::Delete:
                if (ledger) ledger->add("qc.deleted");
                break;
            case Directive::Typefix: {
                QAPair fixed = qa;
                fixed.qtype = v.corrected_qtype.value_or(
                    qa.qtype == QType::Explicit ? QType::Implicit : QType::Explicit);
                if (fixed.qtype == QType::Implicit &&
                    (!fixed.reasoning || fixed.reasoning->empty())) {
                    std::optional<std::string> trace = backfill ? backfill(fixed) : std::nullopt;
                    if (!trace) {
                        if (ledger) {
                            ledger->add("qc.backfill_failed");
                            ledger->note("reasoning backfill failed for " + qa.qa_id +
                                         "; deleted fail-closed");
                        }
                        break;
                    }
                    fixed.reasoning = std::move(*trace);
                }
                if (ledger) ledger->add("qc.typefixed");
                out.push_back(std::move(fixed));
                break;
            }
        }
    }
    return out;
}

struct FloorFailure {
    std::string segment_id;
    std::string message;
};

// Guarantees the per-segment floor: at least one explicit pair survives QC.
// A segment left with none gets one freshly generated explicit pair
// (provenance marks it), which must itself pass adjudication; persistent
// failure excludes the whole segment.
inline Expected<std::vector<QAPair>, FloorFailure> enforce_segment_floor(
    const Segment& segment, std::vector<QAPair> kept, BackendClient& client,
    RunLedger* ledger = nullptr, const QCOptions& opts = {},
    std::vector<QCVerdict>* verdict_sink = nullptr) {
    for (const auto& qa : kept)
        if (qa.qtype == QType::Explicit) return kept;

    const int attempts = opts.floor_attempts < 1 ? 1 : opts.floor_attempts;
    std::string last = "no attempt made";
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        GenerationSpec one{1, 0};
        auto gen = generate_for_segment(segment, one, client, ledger, opts.regen);
        if (!gen.has_value() || gen->empty()) {
            last = gen.has_value() ? "generation returned no pairs" : gen.error().message;
            continue;
        }
        QAPair qa = std::move(gen->front());
        qa.qa_id = segment.segment_id + "::r" + std::to_string(attempt);
        qa.provenance = Provenance::RegeneratedInQC;
        QCVerdict v = adjudicate(qa, segment, client, ledger, opts);
        if (verdict_sink) verdict_sink->push_back(v);
        if (v.directive == Directive::Keep && qa.qtype == QType::Explicit) {
            if (ledger) ledger->add("qc.floor_regenerated");
            kept.push_back(std::move(qa));
            return kept;
        }
        last = "regenerated pair " + qa.qa_id + " was not kept as explicit (" +
               std::string(to_string(v.directive)) + ")";
    }
    if (ledger) {
        ledger->add("qc.floor_unsatisfied");
        ledger->note("explicit floor unsatisfied for " + segment.segment_id + ": " + last);
    }
    return make_unexpected(FloorFailure{segment.segment_id, last});
}

struct QCStageResult {
    std::vector<QAPair> pairs;        // grouped by segment, input order
    std::vector<QCVerdict> verdicts;  // one per input pair, plus regenerated-pair verdicts
    std::vector<FloorFailure> excluded_segments;
};

// Full Stage 2 pass: adjudications fan out across pairs (bounded by the
// client's limiter); verdict application and floor enforcement then run
// per segment, in input segment order.
inline QCStageResult qc_stage(const std::vector<Segment>& segments,
                              const std::vector<QAPair>& pairs, BackendClient& client,
                              RunLedger* ledger = nullptr, const QCOptions& opts = {}) {
    std::map<std::string, const Segment*> seg_by_id;
    for (const auto& s : segments) seg_by_id[s.segment_id] = &s;
    for (const auto& qa : pairs)
        if (!seg_by_id.count(qa.segment_id))
            throw std::invalid_argument("qc_stage: pair " + qa.qa_id +
                                        " references unknown segment " + qa.segment_id);

    std::vector<QCVerdict> verdicts(pairs.size());
    if (!pairs.empty()) {
        int workers = client.config().max_parallel < 1 ? 1 : client.config().max_parallel;
        if (static_cast<std::size_t>(workers) > pairs.size())
            workers = static_cast<int>(pairs.size());
        std::atomic<std::size_t> next_idx{0};
        auto work = [&] {
            for (;;) {
                std::size_t i = next_idx.fetch_add(1);
                if (i >= pairs.size()) return;
                verdicts[i] = adjudicate(pairs[i], *seg_by_id[pairs[i].segment_id], client,
                                         ledger, opts);
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    // Per-segment grouping preserving input order of both segments and pairs.
    std::map<std::string, std::vector<std::size_t>> pair_indices;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        pair_indices[pairs[i].segment_id].push_back(i);

    QCStageResult out;
    out.verdicts = verdicts;
    for (const auto& seg : segments) {
        auto it = pair_indices.find(seg.segment_id);
        if (it == pair_indices.end()) continue;  // segment had no pairs to audit
        std::vector<QAPair> seg_pairs;
        std::vector<QCVerdict> seg_verdicts;
        for (auto i : it->second) {
            seg_pairs.push_back(pairs[i]);
            seg_verdicts.push_back(verdicts[i]);
        }
        auto backfill = make_llm_backfill(seg, client, opts);
        auto kept = apply_verdicts(seg_pairs, seg_verdicts, backfill, ledger);
        auto floored =
            enforce_segment_floor(seg, std::move(kept), client, ledger, opts, &out.verdicts);
        if (floored.has_value()) {
            for (auto& qa : *floored) out.pairs.push_back(std::move(qa));
        } else {
            out.excluded_segments.push_back(floored.error());
        }
    }
    if (ledger) ledger->add("qc.pairs_out", static_cast<std::int64_t>(out.pairs.size()));
    return out;
}

}  // namespace dscore
