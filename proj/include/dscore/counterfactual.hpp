#pragma once

#include <atomic>
#include <map>
#include <stdexcept>
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

struct DistractorSet {
    std::vector<std::string> texts;  // exactly 3
    int nuanced_index = 0;           // slot in texts, [0,2]
};

struct DistractorFailure {
    std::string qa_id;
    std::string message;  // item falls back to QA-only export
};

struct CounterfactualOptions {
    int parse_retries = 3;     // distractor-generation attempts
    int appraisal_rounds = 2;  // appraise -> replace cycles
    bool appraise = true;      // --no-appraisal marks everything acceptable
    PromptConfig prompts;
};

namespace detail {

inline std::string option_norm(const std::string& s) {
    return collapse_whitespace(casefold(trim(s)));
}

inline bool all_distinct_from(const std::vector<std::string>& texts, const std::string& answer) {
    std::vector<std::string> seen{option_norm(answer)};
    for (const auto& t : texts) {
        std::string n = option_norm(t);
        if (n.empty()) return false;
        for (const auto& s : seen)
            if (s == n) return false;
        seen.push_back(std::move(n));
    }
    return true;
}

inline Expected<DistractorSet, std::string> parse_distractor_reply(const std::string& raw,
                                                                   const std::string& answer) {
    auto usable = [](const Json& j) { return j.is_object() && j.contains("distractors"); };
    std::string cleaned = strip_think_blocks(raw);
    auto obj = first_json_value(cleaned, '{', usable);
    if (!obj) {
        auto repaired = mechanical_repair(cleaned);
        if (repaired && usable(*repaired)) obj = std::move(repaired);
    }
    if (!obj) return make_unexpected(std::string("no distractor object in reply"));
    const Json& d = (*obj)["distractors"];
    if (!d.is_array() || d.size() != 3)
        return make_unexpected("distractors: need exactly 3, got " +
                               std::to_string(d.is_array() ? d.size() : 0));
    DistractorSet out;
    for (const auto& e : d) {
        if (!e.is_string() || e.get<std::string>().empty())
            return make_unexpected(std::string("distractors: entries must be non-empty strings"));
        out.texts.push_back(e.get<std::string>());
    }
    if (!all_distinct_from(out.texts, answer))
        return make_unexpected(
            std::string("distractors must be distinct from the answer and each other"));
    if (obj->contains("nuanced_index") && (*obj)["nuanced_index"].is_number_integer()) {
        int n = (*obj)["nuanced_index"].get<int>();
        if (n < 0 || n > 2) return make_unexpected(std::string("nuanced_index out of range"));
        out.nuanced_index = n;
    }
    return out;
}

}  // namespace detail

// Asks for 3 wrong-but-plausible options; schema or distinctness defects
// trigger corrective re-prompts until the budget runs out.
inline Expected<DistractorSet, DistractorFailure> generate_distractors(
    const QAPair& qa, const Segment& segment, BackendClient& client, RunLedger* ledger = nullptr,
    const CounterfactualOptions& opts = {}) {
    const ChatPrompt base = build_distractor_prompt(qa, segment, opts.prompts);
    const int budget = opts.parse_retries < 1 ? 1 : opts.parse_retries;
    std::string defect;
    for (int attempt = 1; attempt <= budget; ++attempt) {
        ChatPrompt prompt = base;
        if (!defect.empty()) {
            prompt.user += "\n\n" + corrective_instruction(defect);
            if (ledger) ledger->add("distract.retries");
        }
        auto completion = client.complete(prompt);
        if (!completion.has_value()) {
            defect = completion.error().message;
            if (!retryable(completion.error().kind)) break;
            continue;
        }
        auto parsed = detail::parse_distractor_reply(completion->text, qa.answer);
        if (parsed.has_value()) return *parsed;
        defect = parsed.error();
    }
    if (ledger) {
        ledger->add("distract.exhausted");
        ledger->note("distractor generation exhausted for " + qa.qa_id + " (" + defect + ")");
    }
    return make_unexpected(DistractorFailure{qa.qa_id, "no valid distractor set: " + defect});
}

// One appraisal call (with parse retries). The error path means the judge
// never produced a usable appraisal; the caller treats that as all-regenerate.
inline Expected<DistractorAppraisal, std::string> appraise_distractors(
    const QAPair& qa, const std::vector<std::string>& distractors, const Segment& segment,
    BackendClient& client, RunLedger* ledger = nullptr, const CounterfactualOptions& opts = {}) {
    if (distractors.size() != 3)
        throw std::invalid_argument("appraise_distractors: need exactly 3 distractors");
    const ChatPrompt base = build_appraisal_prompt(qa, distractors, segment, opts.prompts);
    const int budget = opts.parse_retries < 1 ? 1 : opts.parse_retries;
    std::string defect;
    for (int attempt = 1; attempt <= budget; ++attempt) {
        ChatPrompt prompt = base;
        if (!defect.empty()) prompt.user += "\n\n" + corrective_instruction(defect);
        auto completion = client.complete(prompt);
        if (!completion.has_value()) {
            defect = completion.error().message;
            if (!retryable(completion.error().kind)) break;
            continue;
        }
        auto usable = [](const Json& j) { return j.is_object() && j.contains("appraisals"); };
        std::string cleaned = strip_think_blocks(completion->text);
        auto obj = first_json_value(cleaned, '{', usable);
        if (!obj) {
            auto repaired = mechanical_repair(cleaned);
            if (repaired && usable(*repaired)) obj = std::move(repaired);
        }
        if (!obj) {
            defect = "no appraisal object in reply";
            continue;
        }
        const Json& arr = (*obj)["appraisals"];
        if (!arr.is_array() || arr.size() != distractors.size()) {
            defect = "appraisals: need exactly " + std::to_string(distractors.size()) + " entries";
            continue;
        }
        DistractorAppraisal out;
        out.qa_id = qa.qa_id;
        bool ok = true;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            DistractorAppraisal::Entry e;
            e.text = distractors[i];
            if (!arr[i].is_object() || !arr[i].contains("verdict") ||
                !arr[i]["verdict"].is_string()) {
                defect = "appraisals[" + std::to_string(i) + "].verdict missing";
                ok = false;
                break;
            }
            std::string v = casefold(arr[i]["verdict"].get<std::string>());
            if (v == "acceptable") {
                e.verdict = DistractorVerdict::Acceptable;
            } else if (v == "regenerate") {
                e.verdict = DistractorVerdict::Regenerate;
            } else {
                defect = "appraisals[" + std::to_string(i) + "].verdict unknown: " + v;
                ok = false;
                break;
            }
            if (arr[i].contains("reason") && arr[i]["reason"].is_string())
                e.reason = arr[i]["reason"].get<std::string>();
            out.per_distractor.push_back(std::move(e));
        }
        if (ok) return out;
    }
    if (ledger) ledger->add("distract.appraisal_unparseable");
    return make_unexpected(defect);
}

namespace detail {

// One replacement call for a rejected slot. Also enforces distinctness
// against every string in `avoid`.
inline Expected<std::string, std::string> replace_distractor(
    const QAPair& qa, const Segment& segment, const std::vector<std::string>& avoid,
    const std::string& reason, BackendClient& client, const CounterfactualOptions& opts) {
    auto completion =
        client.complete(build_replacement_prompt(qa, segment, avoid, reason, opts.prompts));
    if (!completion.has_value()) return make_unexpected(completion.error().message);
    auto usable = [](const Json& j) { return j.is_object() && j.contains("distractor"); };
    std::string cleaned = strip_think_blocks(completion->text);
    auto obj = first_json_value(cleaned, '{', usable);
    if (!obj) {
        auto repaired = mechanical_repair(cleaned);
        if (repaired && usable(*repaired)) obj = std::move(repaired);
    }
    if (!obj || !(*obj)["distractor"].is_string())
        return make_unexpected(std::string("no replacement distractor in reply"));
    std::string text = (*obj)["distractor"].get<std::string>();
    std::string n = option_norm(text);
    if (n.empty()) return make_unexpected(std::string("replacement is empty"));
    for (const auto& a : avoid)
        if (option_norm(a) == n)
            return make_unexpected("replacement duplicates \"" + a + "\"");
    return text;
}

}  // namespace detail

// Appraise-and-replace until every slot is acceptable. Slots the judge
// rejects are regenerated one by one; rounds are bounded, and running out of
// rounds (or of usable appraisals) fails the item over to QA-only export.
inline Expected<DistractorSet, DistractorFailure> ensure_acceptable_distractors(
    const QAPair& qa, DistractorSet set, const Segment& segment, BackendClient& client,
    RunLedger* ledger = nullptr, const CounterfactualOptions& opts = {}) {
    if (!opts.appraise) return set;
    const int rounds = opts.appraisal_rounds < 1 ? 1 : opts.appraisal_rounds;
    for (int round = 1; round <= rounds; ++round) {
        auto appraisal = appraise_distractors(qa, set.texts, segment, client, ledger, opts);
        std::vector<bool> regen(3, false);
        std::vector<std::string> reasons(3);
        if (appraisal.has_value()) {
            bool all_ok = true;
            for (std::size_t i = 0; i < 3; ++i) {
                if (appraisal->per_distractor[i].verdict == DistractorVerdict::Regenerate) {
                    regen[i] = true;
                    reasons[i] = appraisal->per_distractor[i].reason;
                    all_ok = false;
                }
            }
            if (all_ok) return set;
        } else {
            // No usable appraisal: distrust all three.
            regen.assign(3, true);
            reasons.assign(3, "appraisal unparseable");
        }
        if (round == rounds) break;
        for (std::size_t i = 0; i < 3; ++i) {
            if (!regen[i]) continue;
            std::vector<std::string> avoid{qa.answer};
            for (const auto& t : set.texts) avoid.push_back(t);
            auto repl = detail::replace_distractor(qa, segment, avoid,
                                                   reasons[i].empty() ? "rejected" : reasons[i],
                                                   client, opts);
            if (repl.has_value()) {
                set.texts[i] = std::move(*repl);
                if (ledger) ledger->add("distract.replaced");
            } else if (ledger) {
                ledger->add("distract.replacement_failed");
            }
        }
    }
    if (ledger) {
        ledger->add("distract.exhausted");
        ledger->note("appraisal never settled for " + qa.qa_id + "; item exported QA-only");
    }
    return make_unexpected(
        DistractorFailure{qa.qa_id, "distractors still rejected after appraisal rounds"});
}

// Pure, seeded assembly. The correct answer's position is drawn uniformly
// from the four slots by a generator keyed on (run_seed, qa_id); distractors
// fill the remaining slots in order. Re-runs reproduce identical items.
inline MCQItem assemble_mcq(const QAPair& qa, const DistractorSet& set, std::uint64_t run_seed) {
    if (set.texts.size() != 3)
        throw std::invalid_argument("assemble_mcq: need exactly 3 distractors");
    if (set.nuanced_index < 0 || set.nuanced_index > 2)
        throw std::invalid_argument("assemble_mcq: nuanced_index out of range");
    if (!detail::all_distinct_from(set.texts, qa.answer))
        throw std::invalid_argument("assemble_mcq: duplicate options for " + qa.qa_id);

    Rng rng(run_seed, qa.qa_id);
    int correct = static_cast<int>(rng.bounded(4));

    MCQItem item;
    item.qa_id = qa.qa_id;
    item.stem = qa.question;
    item.options.assign(4, {});
    item.correct_index = correct;
    item.rng_seed_used = run_seed;
    item.options[static_cast<std::size_t>(correct)] = qa.answer;
    int slot = 0;
    for (int pos = 0; pos < 4; ++pos) {
        if (pos == correct) continue;
        item.options[static_cast<std::size_t>(pos)] = set.texts[static_cast<std::size_t>(slot)];
        if (slot == set.nuanced_index) item.nuanced_index = pos;
        ++slot;
    }
    return item;
}

struct DistractStageResult {
    std::vector<MCQItem> items;               // input pair order
    std::vector<DistractorFailure> qa_only;   // pairs exported without options
};

// Stage 3 over all kept pairs: per-item work fans out through the client's
// limiter; assembly is pure. Items that cannot obtain three acceptable
// distractors are reported, not padded.
inline DistractStageResult distract_stage(const std::vector<Segment>& segments,
                                          const std::vector<QAPair>& pairs,
                                          BackendClient& client, std::uint64_t run_seed,
                                          RunLedger* ledger = nullptr,
                                          const CounterfactualOptions& opts = {}) {
    std::map<std::string, const Segment*> seg_by_id;
    for (const auto& s : segments) seg_by_id[s.segment_id] = &s;
    for (const auto& qa : pairs)
        if (!seg_by_id.count(qa.segment_id))
            throw std::invalid_argument("distract_stage: pair " + qa.qa_id +
                                        " references unknown segment " + qa.segment_id);

    std::vector<Expected<MCQItem, DistractorFailure>> results;
    results.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
        results.push_back(make_unexpected(DistractorFailure{pairs[i].qa_id, "not attempted"}));

    if (!pairs.empty()) {
        int workers = client.config().max_parallel < 1 ? 1 : client.config().max_parallel;
        if (static_cast<std::size_t>(workers) > pairs.size())
            workers = static_cast<int>(pairs.size());
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= pairs.size()) return;
                const QAPair& qa = pairs[i];
                const Segment& seg = *seg_by_id[qa.segment_id];
                auto gen = generate_distractors(qa, seg, client, ledger, opts);
                if (!gen.has_value()) {
                    results[i] = make_unexpected(gen.error());
                    continue;
                }
                auto ok = ensure_acceptable_distractors(qa, std::move(*gen), seg, client, ledger,
                                                        opts);
                if (!ok.has_value()) {
                    results[i] = make_unexpected(ok.error());
                    continue;
                }
                results[i] = assemble_mcq(qa, *ok, run_seed);
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    DistractStageResult out;
    for (auto& r : results) {
        if (r.has_value())
            out.items.push_back(std::move(*r));
        else
            out.qa_only.push_back(std::move(r.error()));
    }
    if (ledger) ledger->add("distract.items", static_cast<std::int64_t>(out.items.size()));
    return out;
}

}  // namespace dscore
