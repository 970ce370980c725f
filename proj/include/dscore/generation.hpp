#pragma once

#include <atomic>
#include <string>
#include <thread>
#include <vector>

#include "dscore/backend.hpp"
#include "dscore/common.hpp"
#include "dscore/json_repair.hpp"
#include "dscore/ledger.hpp"
#include "dscore/prompts.hpp"
#include "dscore/types.hpp"

namespace dscore {

struct ParseFailure {
    std::string message;  // includes the offending field path
    std::string raw;      // kept for the repair path
};

enum class GenErrorKind { ParseFailure, GenerationExhausted };

struct GenerationError {
    GenErrorKind kind;
    std::string message;
    int attempts = 1;
};

// Pulls the first JSON array out of raw model text (chatter around it is
// ignored, mechanical repair is tried when extraction fails) and validates
// each element. qa_ids are assigned positionally: {segment_id}::q1, ::q2, ...
inline Expected<std::vector<QAPair>, ParseFailure> parse_generation_output(
    const std::string& raw, const std::string& segment_id) {
    std::string cleaned = strip_think_blocks(raw);
    auto arr = first_json_value(cleaned, '[');
    if (!arr) {
        auto repaired = mechanical_repair(cleaned);
        if (repaired && repaired->is_array()) arr = std::move(repaired);
    }
    if (!arr) return make_unexpected(ParseFailure{"no JSON array found in reply", raw});

    std::vector<QAPair> pairs;
    for (std::size_t i = 0; i < arr->size(); ++i) {
        const Json& e = (*arr)[i];
        auto fail = [&](const std::string& what) {
            return make_unexpected(
                ParseFailure{"[" + std::to_string(i) + "]." + what, raw});
        };
        if (!e.is_object()) return fail("element is not an object");
        if (!e.contains("question") || !e["question"].is_string() ||
            e["question"].get<std::string>().empty())
            return fail("question: missing or empty");
        if (!e.contains("answer") || !e["answer"].is_string() ||
            e["answer"].get<std::string>().empty())
            return fail("answer: missing or empty");
        if (!e.contains("type") || !e["type"].is_string())
            return fail("type: missing");
        std::string type = casefold(e["type"].get<std::string>());
        if (type != "explicit" && type != "implicit")
            return fail("type: must be \"explicit\" or \"implicit\", got \"" +
                        e["type"].get<std::string>() + "\"");

        QAPair qa;
        qa.qa_id = segment_id + "::q" + std::to_string(pairs.size() + 1);
        qa.segment_id = segment_id;
        qa.question = e["question"].get<std::string>();
        qa.answer = e["answer"].get<std::string>();
        qa.qtype = type == "explicit" ? QType::Explicit : QType::Implicit;
        if (e.contains("reasoning") && e["reasoning"].is_string() &&
            !e["reasoning"].get<std::string>().empty())
            qa.reasoning = e["reasoning"].get<std::string>();
        if (qa.qtype == QType::Implicit && !qa.reasoning)
            return fail("reasoning: required for implicit pairs");
        qa.provenance = Provenance::Generated;
        pairs.push_back(std::move(qa));
    }
    return pairs;
}

struct GenerationOptions {
    int parse_retries = 3;  // total attempts, counting the first
    PromptConfig prompts;
};

namespace detail {

// Keeps at most the first n_explicit explicit and n_implicit implicit pairs,
// preserving reply order, then renumbers qa_ids to stay gapless.
inline std::vector<QAPair> truncate_to_spec(std::vector<QAPair> pairs, const GenerationSpec& spec) {
    std::vector<QAPair> out;
    int have_explicit = 0, have_implicit = 0;
    for (auto& qa : pairs) {
        if (qa.qtype == QType::Explicit) {
            if (have_explicit >= spec.n_explicit) continue;
            ++have_explicit;
        } else {
            if (have_implicit >= spec.n_implicit) continue;
            ++have_implicit;
        }
        out.push_back(std::move(qa));
    }
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i].qa_id = out[i].segment_id + "::q" + std::to_string(i + 1);
    return out;
}

inline int count_type(const std::vector<QAPair>& pairs, QType t) {
    int n = 0;
    for (const auto& qa : pairs) n += qa.qtype == t ? 1 : 0;
    return n;
}

}  // namespace detail

// One prompt produces the whole batch for a segment. Parse failures and
// per-type shortfalls trigger corrective re-prompts up to the retry budget;
// a persistent shortfall returns the best attempt (ledgered, never padded),
// and only a run with zero usable pairs is an error.
inline Expected<std::vector<QAPair>, GenerationError> generate_for_segment(
    const Segment& segment, const GenerationSpec& spec, BackendClient& client,
    RunLedger* ledger = nullptr, const GenerationOptions& opts = {}) {
    if (spec.total() < 1)
        return make_unexpected(
            GenerationError{GenErrorKind::GenerationExhausted,
                            "generation spec requests zero pairs", 0});

    const ChatPrompt base = build_generation_prompt(segment, spec, opts.prompts);
    const int budget = opts.parse_retries < 1 ? 1 : opts.parse_retries;

    std::vector<QAPair> best;
    std::string defect;
    for (int attempt = 1; attempt <= budget; ++attempt) {
        ChatPrompt prompt = base;
        if (!defect.empty()) {
            prompt.user += "\n\n" + corrective_instruction(defect);
            if (ledger) ledger->add("generation.parse_retries");
        }
        auto completion = client.complete(prompt);
        if (!completion.has_value()) {
            return make_unexpected(GenerationError{
                GenErrorKind::GenerationExhausted,
                "backend failed for segment " + segment.segment_id + ": " +
                    completion.error().message,
                attempt});
        }
        auto parsed = parse_generation_output(completion->text, segment.segment_id);
        if (!parsed.has_value()) {
            defect = parsed.error().message;
            continue;
        }
        auto pairs = detail::truncate_to_spec(std::move(*parsed), spec);
        int ne = detail::count_type(pairs, QType::Explicit);
        int ni = detail::count_type(pairs, QType::Implicit);
        if (ne == spec.n_explicit && ni == spec.n_implicit) return pairs;
        if (pairs.size() > best.size()) best = std::move(pairs);
        defect = "returned " + std::to_string(ne) + " explicit and " + std::to_string(ni) +
                 " implicit pairs; need exactly " + std::to_string(spec.n_explicit) + " and " +
                 std::to_string(spec.n_implicit);
    }
    if (!best.empty()) {
        if (ledger) {
            ledger->add("generation.shortfall_pairs",
                        spec.total() - static_cast<std::int64_t>(best.size()));
            ledger->note("generation shortfall on " + segment.segment_id + ": kept " +
                         std::to_string(best.size()) + " of " + std::to_string(spec.total()));
        }
        return best;
    }
    return make_unexpected(GenerationError{
        GenErrorKind::GenerationExhausted,
        "no parseable generation for segment " + segment.segment_id + " after " +
            std::to_string(budget) + " attempts; last defect: " + defect,
        budget});
}

struct SegmentFailure {
    std::string segment_id;
    std::string message;
};

struct GenerateStageResult {
    std::vector<QAPair> pairs;  // ordered by input segment order
    std::vector<SegmentFailure> failures;
};

// Fans segments out over worker threads; the client's admission limiter
// bounds actual request concurrency. Output order follows input order
// regardless of completion order, and one bad segment never aborts the rest.
inline GenerateStageResult generate_stage(const std::vector<Segment>& segments,
                                          const GenerationSpec& spec, BackendClient& client,
                                          RunLedger* ledger = nullptr,
                                          const GenerationOptions& opts = {}) {
    if (ledger) ledger->note(std::string("generation template ") + kPromptTemplateVersion);
    std::vector<Expected<std::vector<QAPair>, GenerationError>> results;
    results.reserve(segments.size());
    for (std::size_t i = 0; i < segments.size(); ++i)
        results.push_back(std::vector<QAPair>{});

    int workers = client.config().max_parallel < 1 ? 1 : client.config().max_parallel;
    if (static_cast<std::size_t>(workers) > segments.size())
        workers = static_cast<int>(segments.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= segments.size()) return;
            results[i] = generate_for_segment(segments[i], spec, client, ledger, opts);
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();

    GenerateStageResult out;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (results[i].has_value()) {
            for (auto& qa : *results[i]) out.pairs.push_back(std::move(qa));
        } else {
            out.failures.push_back({segments[i].segment_id, results[i].error().message});
            if (ledger) {
                ledger->add("generation.failed_segments");
                ledger->note("generation failed: " + results[i].error().message);
            }
        }
    }
    if (ledger) ledger->add("generation.pairs", static_cast<std::int64_t>(out.pairs.size()));
    return out;
}

}  // namespace dscore
