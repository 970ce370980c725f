// Acceptance harness: one check per shipped guarantee, one PASS/FAIL line
// each. Exit status is the number of failed checks.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dscore/compose.hpp"
#include "dscore/counterfactual.hpp"
#include "dscore/exporter.hpp"
#include "dscore/generation.hpp"
#include "dscore/metrics.hpp"
#include "dscore/mock_backend.hpp"
#include "dscore/pipeline.hpp"
#include "dscore/quality_control.hpp"

#include "../unit/test_util.hpp"

using namespace dscore;
using testutil::TempDir;

namespace {

struct Failure {
    std::string detail;
};

// Assertion helper: collects the first failing condition's description.
#define EXPECT(cond, msg)                                        \
    do {                                                         \
        if (!(cond)) {                                           \
            std::ostringstream os_;                              \
            os_ << msg;                                          \
            throw Failure{os_.str()};                            \
        }                                                        \
    } while (0)

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

BackendClient mock_client(std::shared_ptr<Backend> be, std::shared_ptr<RunLedger> ledger = nullptr,
                          int max_parallel = 8) {
    BackendConfig cfg;
    cfg.max_parallel = max_parallel;
    cfg.retry.max_attempts = 1;
    return BackendClient(std::move(be), cfg, std::move(ledger));
}

int count_words(const std::string& text) {
    std::istringstream in(text);
    std::string w;
    int n = 0;
    while (in >> w) ++n;
    return n;
}

// ---------------------------------------------------------------------------
// 1. A 100-200 word document with the 3-explicit + 3-implicit recipe yields
//    exactly 6 QA pairs, each carried into a 4-option item, in under 5 s.
// ---------------------------------------------------------------------------
std::string check_end_to_end_shape() {
    const std::string doc =
        "In early 2020 hospitals across several countries began pooling anonymized "
        "patient questionnaires to track the spread of a novel respiratory illness. "
        "Clinicians recorded symptom onset dates, travel history, and household "
        "contacts for every admitted case. Laboratory teams sequenced viral samples "
        "weekly and shared the genomes through an open repository within two days of "
        "collection. Epidemiologists combined the questionnaires with the genomic "
        "data to estimate transmission chains inside apartment blocks and care "
        "homes. Their models suggested that isolating confirmed cases within one day "
        "of symptom onset cut secondary infections by more than half. Public health "
        "agencies used these estimates to prioritize contact tracing in dense "
        "housing, and several cities reported measurable declines in new admissions "
        "within six weeks. The pooled dataset later supported retrospective studies "
        "of vaccine effectiveness and long-term symptom duration across age groups.";
    int words = count_words(doc);
    EXPECT(words >= 100 && words <= 200, "fixture must be 100-200 words, got " << words);

    TempDir dir;
    auto input = dir.file("doc.txt", doc);

    PipelineConfig cfg;
    cfg.inputs = {input};
    cfg.out_dir = dir.join("out");
    cfg.run_id = "shape";
    cfg.seed = 31;
    cfg.backend.kind = "mock";
    cfg.backend.mock_seed = 5;
    cfg.n_explicit = 3;
    cfg.n_implicit = 3;

    auto t0 = std::chrono::steady_clock::now();
    auto result = run(cfg);
    double elapsed = seconds_since(t0);

    EXPECT(result.exit_code == 0, "run exit code " << result.exit_code);
    RunPaths paths{cfg.out_dir};
    auto segments = load_segments(paths.segments());
    EXPECT(segments.size() == 1, "expected one segment, got " << segments.size());
    auto pairs = load_qa_pairs(paths.stage2());
    EXPECT(pairs.size() == 6, "expected 6 surviving pairs, got " << pairs.size());
    for (const auto& qa : pairs)
        if (qa.qtype == QType::Implicit)
            EXPECT(qa.reasoning.has_value() && !qa.reasoning->empty(),
                   "implicit pair " << qa.qa_id << " lacks a reasoning trace");
    auto items = load_mcq_items(paths.stage3());
    EXPECT(items.size() == 6, "expected 6 option items, got " << items.size());
    for (const auto& it : items)
        EXPECT(it.options.size() == 4, it.qa_id << " has " << it.options.size() << " options");
    EXPECT(elapsed < 5.0, "took " << elapsed << " s, limit 5 s");

    std::ostringstream os;
    os << "6 pairs, 4 options each, " << words << "-word input, "
       << static_cast<int>(elapsed * 1000) << " ms";
    return os.str();
}

// ---------------------------------------------------------------------------
// 2. Wholesale-deletion verdicts on 10% of a 500-segment corpus: the floor
//    regenerates an explicit pair for each gutted segment, regenerated pairs
//    carry the RegeneratedInQC provenance, and verdicts conserve the input.
// ---------------------------------------------------------------------------
std::string check_qc_floor() {
    const char* vocab[] = {"granite", "erosion",  "sediment", "quartz",   "basalt",
                           "aquifer", "moraine",  "glacier",  "estuary",  "plateau",
                           "lignite", "schist",   "gneiss",   "fossil",   "strata",
                           "drumlin", "caldera",  "rhyolite", "obsidian", "breccia"};
    const int kSegments = 500;
    const int kMarked = kSegments / 10;

    std::vector<Segment> segments;
    segments.reserve(kSegments);
    for (int i = 0; i < kSegments; ++i) {
        std::string text = "Survey plot number " + std::to_string(1000 + i) + " logged ";
        for (int w = 0; w < 10; ++w)
            text += std::string(vocab[(i * 3 + w * 7) % 20]) + std::to_string((i + w) % 97) + " ";
        text += "deposits along the transect.";
        if (i % 10 == 0) text += " Reference token cullzone" + std::to_string(i) + " applies.";
        Segment s;
        s.segment_id = "doc" + std::to_string(i) + "::s0";
        s.index = 0;
        s.text = text;
        s.token_count = static_cast<int>(count_tokens(text));
        segments.push_back(std::move(s));
    }

    auto gen_client = mock_client(std::make_shared<GenerativeMockBackend>(9));
    auto gen = generate_stage(segments, GenerationSpec{2, 1}, gen_client);
    EXPECT(gen.failures.empty(), gen.failures.size() << " generation failures");
    EXPECT(gen.pairs.size() == static_cast<std::size_t>(kSegments * 3),
           "stage-1 produced " << gen.pairs.size() << " pairs, expected " << kSegments * 3);

    // Adjudication shim: the first three verdicts for any marked segment are
    // DELETE (its whole first batch); everything else defers to the mock.
    GenerativeMockBackend inner(9);
    std::mutex mu;
    std::map<std::string, int> deleted;
    auto be = std::make_shared<FunctionBackend>([&](const ChatPrompt& p) -> CompletionResult {
        auto pos = p.user.find("cullzone");
        if (pos != std::string::npos && p.user.find(kTaskAdjudicate) != std::string::npos) {
            auto end = pos + 8;
            while (end < p.user.size() && std::isdigit(static_cast<unsigned char>(p.user[end])))
                ++end;
            std::string key = p.user.substr(pos, end - pos);
            std::lock_guard lock(mu);
            if (deleted[key] < 3) {
                ++deleted[key];
                return Completion{
                    R"({"directive": "DELETE", "corrected_type": null, "rationale": "unsupported"})"};
            }
        }
        return inner.complete_once(p);
    });

    auto ledger = std::make_shared<RunLedger>();
    auto client = mock_client(be, ledger);
    auto qc = qc_stage(segments, gen.pairs, client, ledger.get());
    EXPECT(qc.excluded_segments.empty(),
           qc.excluded_segments.size() << " segments left without an explicit pair");

    std::map<std::string, int> explicit_per_segment;
    std::set<std::string> regenerated_segments;
    for (const auto& qa : qc.pairs) {
        if (qa.qtype == QType::Explicit) ++explicit_per_segment[qa.segment_id];
        if (qa.qa_id.find("::r") != std::string::npos) {
            EXPECT(qa.provenance == Provenance::RegeneratedInQC,
                   qa.qa_id << " regenerated without RegeneratedInQC provenance");
            regenerated_segments.insert(qa.segment_id);
        }
    }
    std::set<std::string> surviving;
    for (const auto& qa : qc.pairs) surviving.insert(qa.segment_id);
    EXPECT(surviving.size() == static_cast<std::size_t>(kSegments),
           surviving.size() << " surviving segments, expected " << kSegments);
    for (const auto& id : surviving)
        EXPECT(explicit_per_segment[id] >= 1, id << " survived with no explicit pair");
    EXPECT(regenerated_segments.size() == static_cast<std::size_t>(kMarked),
           regenerated_segments.size() << " segments regenerated, expected " << kMarked);

    // Conservation over stage-1 pairs: exactly one verdict per input pair.
    std::set<std::string> adjudicated;
    int keep = 0, del = 0, fix = 0;
    for (const auto& v : qc.verdicts) {
        if (v.qa_id.find("::q") == std::string::npos) continue;
        EXPECT(adjudicated.insert(v.qa_id).second, "duplicate verdict for " << v.qa_id);
        if (v.directive == Directive::Keep) ++keep;
        if (v.directive == Directive::Delete) ++del;
        if (v.directive == Directive::Typefix) ++fix;
    }
    EXPECT(adjudicated.size() == gen.pairs.size(),
           adjudicated.size() << " verdicts for " << gen.pairs.size() << " pairs");
    EXPECT(keep + del + fix == static_cast<int>(gen.pairs.size()),
           "keep " << keep << " + delete " << del << " + typefix " << fix << " != "
                   << gen.pairs.size());
    EXPECT(del == kMarked * 3, del << " deletions, expected " << kMarked * 3);

    std::ostringstream os;
    os << gen.pairs.size() << " pairs in = " << keep << " keep + " << del << " delete + " << fix
       << " typefix; " << regenerated_segments.size() << "/" << kMarked
       << " gutted segments refilled";
    return os.str();
}

// ---------------------------------------------------------------------------
// 3. 10,000 seeded item assemblies place the correct answer uniformly:
//    chi-square GOF p > 0.01 and every position within 25% +/- 1% absolute.
// ---------------------------------------------------------------------------
std::string check_position_uniformity() {
    const int kTrials = 10000;
    DistractorSet set;
    set.texts = {"nearly the answer", "an unrelated term", "a stale figure"};
    set.nuanced_index = 0;

    std::vector<MCQItem> items;
    items.reserve(kTrials);
    for (int i = 0; i < kTrials; ++i) {
        QAPair qa;
        qa.qa_id = "doc" + std::to_string(i % 997) + "::s0::q" + std::to_string(i);
        qa.segment_id = "doc::s0";
        qa.question = "Which value did the survey report?";
        qa.answer = "the recorded answer";
        items.push_back(assemble_mcq(qa, set, 2026));
    }

    auto audit = position_bias_audit(items);
    EXPECT(audit.p_value > 0.01,
           "chi-square " << audit.chi_square << ", p " << audit.p_value << " <= 0.01");
    for (int pos = 0; pos < 4; ++pos) {
        double freq = static_cast<double>(audit.counts[static_cast<std::size_t>(pos)]) / kTrials;
        EXPECT(std::abs(freq - 0.25) <= 0.01,
               "position " << pos << " frequency " << freq << " outside 25% +/- 1%");
    }

    std::ostringstream os;
    os << "counts [" << audit.counts[0] << ", " << audit.counts[1] << ", " << audit.counts[2]
       << ", " << audit.counts[3] << "], chi-square " << audit.chi_square << ", p "
       << audit.p_value;
    return os.str();
}

// ---------------------------------------------------------------------------
// 4. Composition law: 12,376 implicit + 12,294 explicit at 1/1 gives 24,670;
//    sampled counts follow floor(fraction * pool) for the standard fractions
//    on arbitrary pool sizes; identical inputs give element-identical output.
// ---------------------------------------------------------------------------
std::vector<QAPair> synthetic_pool(std::size_t n_implicit, std::size_t n_explicit) {
    std::vector<QAPair> pool;
    pool.reserve(n_implicit + n_explicit);
    auto add = [&](QType t, std::size_t i) {
        QAPair qa;
        const char* tag = t == QType::Implicit ? "i" : "e";
        qa.qa_id = "doc" + std::to_string(i % 311) + "::s0::" + tag + std::to_string(i);
        qa.segment_id = "doc" + std::to_string(i % 311) + "::s0";
        qa.question = std::string("placeholder question ") + tag + std::to_string(i);
        qa.answer = "placeholder answer";
        qa.qtype = t;
        if (t == QType::Implicit) qa.reasoning = "placeholder reasoning";
        pool.push_back(std::move(qa));
    };
    for (std::size_t i = 0; i < n_implicit; ++i) add(QType::Implicit, i);
    for (std::size_t i = 0; i < n_explicit; ++i) add(QType::Explicit, i);
    return pool;
}

std::string check_composition_law() {
    auto pool = synthetic_pool(12376, 12294);
    CompositionConfig cfg;
    cfg.seed = 17;
    auto full = mix(pool, cfg);
    EXPECT(full.has_value(), full.error());
    EXPECT(full.value().report.n_total == 24670,
           "1/1 mix produced " << full.value().report.n_total << ", expected 24670");

    const double fractions[] = {0.0, 0.33, 0.66, 1.0};
    Rng rng(99);
    int combos = 0;
    for (int trial = 0; trial < 6; ++trial) {
        std::size_t ni = 1 + rng.bounded(4000);
        std::size_t ne = 1 + rng.bounded(4000);
        auto p = synthetic_pool(ni, ne);
        for (double fi : fractions)
            for (double fe : fractions) {
                if (fi == 0.0 && fe == 0.0) continue;
                CompositionConfig c;
                c.implicit_fraction = fi;
                c.explicit_fraction = fe;
                c.seed = 7 + trial;
                auto m = mix(p, c);
                EXPECT(m.has_value(), "mix failed: " << m.error());
                auto want_i = static_cast<std::int64_t>(
                    std::floor(fi * static_cast<double>(ni) + 1e-9));
                auto want_e = static_cast<std::int64_t>(
                    std::floor(fe * static_cast<double>(ne) + 1e-9));
                EXPECT(m.value().report.n_implicit_sampled == want_i,
                       "implicit " << m.value().report.n_implicit_sampled << " != floor(" << fi
                                   << " * " << ni << ") = " << want_i);
                EXPECT(m.value().report.n_explicit_sampled == want_e,
                       "explicit " << m.value().report.n_explicit_sampled << " != floor(" << fe
                                   << " * " << ne << ") = " << want_e);
                ++combos;
            }
    }

    CompositionConfig again;
    again.implicit_fraction = 0.66;
    again.explicit_fraction = 1.0;
    again.seed = 41;
    auto a = mix(pool, again);
    auto b = mix(pool, again);
    EXPECT(a.has_value() && b.has_value(), "rerun mix failed");
    EXPECT(a.value().dataset.size() == b.value().dataset.size(), "rerun size differs");
    for (std::size_t i = 0; i < a.value().dataset.size(); ++i)
        EXPECT(to_json(a.value().dataset[i]) == to_json(b.value().dataset[i]),
               "rerun differs at element " << i);

    std::ostringstream os;
    os << "12376 + 12294 -> 24670 at 1/1; floor law held over " << combos
       << " fraction/pool combos; rerun element-identical (" << a.value().dataset.size()
       << " elements)";
    return os.str();
}

// ---------------------------------------------------------------------------
// 5. Metric oracles: the LCS dynamic program matches exhaustive enumeration,
//    the F1/EM fixture reproduces hand-derived values, and all metrics are
//    100 on identity and within [0,100] under fuzzing. Budget: 60 s.
// ---------------------------------------------------------------------------
std::size_t brute_force_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::size_t best = 0;
    for (std::uint32_t mask = 0; mask < (1u << a.size()); ++mask) {
        std::vector<std::string> sub;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (mask & (1u << i)) sub.push_back(a[i]);
        std::size_t j = 0;
        for (const auto& tok : b)
            if (j < sub.size() && tok == sub[j]) ++j;
        if (j == sub.size()) best = std::max(best, sub.size());
    }
    return best;
}

std::string check_metric_oracles() {
    auto t0 = std::chrono::steady_clock::now();

    const char* alphabet[] = {"red", "green", "blue", "gray", "teal"};
    Rng rng(505);
    const int kCases = 1200;
    for (int trial = 0; trial < kCases; ++trial) {
        std::size_t la = rng.bounded(13), lb = rng.bounded(13);
        std::vector<std::string> a, b;
        for (std::size_t i = 0; i < la; ++i) a.push_back(alphabet[rng.bounded(5)]);
        for (std::size_t i = 0; i < lb; ++i) b.push_back(alphabet[rng.bounded(5)]);
        double oracle;
        if (la == 0 && lb == 0)
            oracle = 100.0;
        else if (la == 0 || lb == 0)
            oracle = 0.0;
        else
            oracle = 200.0 * static_cast<double>(brute_force_lcs(a, b)) /
                     static_cast<double>(la + lb);
        std::string sa = join(a, " "), sb = join(b, " ");
        double got = rouge_l(sa, sb);
        EXPECT(std::abs(got - oracle) < 1e-9,
               "rouge-L " << got << " vs oracle " << oracle << " on \"" << sa << "\" / \"" << sb
                          << "\"");
    }

    struct Case {
        const char* pred;
        const char* gold;
        double f1;
        double em;
    };
    const Case fixture[] = {
        {"the cat sat", "the cat sat", 100.0, 100.0},
        {"cat sat", "the cat sat", 100.0, 100.0},
        {"dog", "cat", 0.0, 0.0},
        {"Paris", "paris.", 100.0, 100.0},
        {"", "", 100.0, 100.0},
        {"", "x", 0.0, 0.0},
        {"x", "", 0.0, 0.0},
        {"a", "the", 100.0, 100.0},
        {"the cat", "cat the", 100.0, 100.0},
        {"big red ball", "red ball", 80.0, 0.0},
        {"one two three four", "one two", 200.0 / 3.0, 0.0},
        {"apple apple", "apple", 200.0 / 3.0, 0.0},
        {"don't stop", "dont stop", 100.0, 100.0},
        {"U.S.A.", "usa", 100.0, 100.0},
        {"42", "42", 100.0, 100.0},
        {"New York City", "new york", 80.0, 0.0},
        {"An apple", "apple", 100.0, 100.0},
        {"cat, dog; bird", "bird dog cat", 100.0, 0.0},
        {"three four five", "four five six", 200.0 / 3.0, 0.0},
        {"thecat", "the cat", 0.0, 0.0},
    };
    int row = 0;
    for (const auto& c : fixture) {
        EXPECT(std::abs(token_f1(c.pred, c.gold) - c.f1) < 1e-6,
               "fixture row " << row << ": F1 " << token_f1(c.pred, c.gold) << " != " << c.f1);
        EXPECT(exact_match(c.pred, c.gold) == c.em,
               "fixture row " << row << ": EM " << exact_match(c.pred, c.gold) << " != " << c.em);
        ++row;
    }

    // Identity and range, fuzzed over random non-empty token strings.
    const int kFuzz = 400;
    for (int trial = 0; trial < kFuzz; ++trial) {
        auto make = [&]() {
            std::size_t len = 1 + rng.bounded(10);
            std::vector<std::string> toks;
            for (std::size_t i = 0; i < len; ++i) toks.push_back(alphabet[rng.bounded(5)]);
            return join(toks, " ");
        };
        std::string s = make(), t = make();
        EXPECT(token_f1(s, s) == 100.0, "F1 identity on \"" << s << "\"");
        EXPECT(exact_match(s, s) == 100.0, "EM identity on \"" << s << "\"");
        EXPECT(rouge_l(s, s) == 100.0, "rouge-L identity on \"" << s << "\"");
        EXPECT(rouge_n(s, s, 2) == 100.0, "rouge-2 identity on \"" << s << "\"");
        EXPECT(bleu({s, t}, {s, t}) == 100.0, "BLEU identity on \"" << s << "\"");
        for (double v : {token_f1(s, t), exact_match(s, t), rouge_l(s, t), rouge_n(s, t, 2),
                         bleu({s}, {t})})
            EXPECT(v >= 0.0 && v <= 100.0, "metric " << v << " outside [0,100]");
    }

    double elapsed = seconds_since(t0);
    EXPECT(elapsed < 60.0, "took " << elapsed << " s, limit 60 s");

    std::ostringstream os;
    os << kCases << " LCS oracle cases, 20 fixture rows, " << kFuzz << " fuzz rounds in "
       << static_cast<int>(elapsed * 1000) << " ms";
    return os.str();
}

// ---------------------------------------------------------------------------
// 6. Repair conservation: 50 malformed-or-valid lines export or quarantine
//    with nothing silently dropped, and every exported line re-validates.
// ---------------------------------------------------------------------------
std::string check_repair_conservation() {
    std::vector<std::string> lines;
    auto pair_json = [](int i, const char* extra_suffix) {
        std::ostringstream os;
        os << R"({"qa_id": "d::s0::q)" << i << R"(", "segment_id": "d::s0", )"
           << R"("question": "What did survey )" << i << R"( record?", )"
           << R"("answer": "finding )" << i << R"(", "qtype": "explicit", )"
           << R"("reasoning": null, "provenance": "generated"})" << extra_suffix;
        return os.str();
    };

    for (int i = 0; i < 10; ++i) lines.push_back(pair_json(i, ""));
    for (int i = 10; i < 20; ++i)
        lines.push_back("```json\n" + pair_json(i, "") + "\n```");
    for (int i = 20; i < 30; ++i) {
        std::ostringstream os;
        os << R"({"qa_id": "d::s0::q)" << i << R"(", "segment_id": "d::s0",)"
           << R"( "question": "What did survey )" << i << R"( record?",)"
           << R"( "answer": "finding )" << i << R"(", "qtype": "explicit",)"
           << R"( "reasoning": null, "provenance": "generated",})";
        lines.push_back(os.str());
    }
    for (int i = 30; i < 40; ++i) {
        std::ostringstream os;
        os << R"({qa_id: "d::s0::q)" << i << R"(", segment_id: "d::s0",)"
           << R"( question: "What did survey )" << i << R"( record?",)"
           << R"( answer: "finding )" << i << R"(", qtype: "explicit",)"
           << R"( reasoning: null, provenance: "generated"})";
        lines.push_back(os.str());
    }
    for (int i = 40; i < 45; ++i) {
        auto full = pair_json(i, "");
        lines.push_back(full.substr(0, full.size() / 2));  // truncated mid-record
    }
    lines.push_back("The model was unable to produce a record for this item.");
    lines.push_back("Sure! Here is the JSON you asked for:");
    lines.push_back("null");
    lines.push_back("[1, 2, 3]");
    lines.push_back("I refuse.");
    EXPECT(lines.size() == 50, "corpus has " << lines.size() << " lines");

    ExportOptions opts;
    opts.format = ExportFormat::QaCot;
    opts.dedup = false;
    auto ledger = std::make_shared<RunLedger>();
    auto res = export_lines(lines, opts, nullptr, nullptr, ledger.get());

    EXPECT(res.n_input == 50, "n_input " << res.n_input);
    EXPECT(res.n_deduped == 0, "n_deduped " << res.n_deduped);
    EXPECT(res.n_exported + res.n_quarantined == 50,
           res.n_exported << " exported + " << res.n_quarantined << " quarantined != 50");
    EXPECT(static_cast<std::int64_t>(res.lines.size()) == res.n_exported, "line count mismatch");
    EXPECT(static_cast<std::int64_t>(res.quarantined.size()) == res.n_quarantined,
           "quarantine count mismatch");
    EXPECT(res.n_exported >= 40, "only " << res.n_exported << " exported; repair regressed");
    EXPECT(res.n_quarantined >= 5, "only " << res.n_quarantined << " quarantined");

    for (const auto& line : res.lines) {
        auto err = validate_record(line, opts.format);
        EXPECT(!err.has_value(), "exported line fails validation: " << err->reason);
    }
    // Quarantined lines preserve the offending input bytes verbatim.
    std::set<std::string> originals(lines.begin(), lines.end());
    for (const auto& raw : res.quarantined)
        EXPECT(originals.count(raw) == 1, "quarantined bytes do not match any input line");

    std::ostringstream os;
    os << res.n_exported << " exported + " << res.n_quarantined
       << " quarantined = 50, all exported lines re-validate";
    return os.str();
}

// ---------------------------------------------------------------------------
// 7. Resume determinism: stopping after every stage boundary and resuming
//    reproduces the uninterrupted run's artifacts byte for byte.
// ---------------------------------------------------------------------------
std::string check_resume_determinism() {
    const std::string doc_a =
        "Tidal gauges along the northern coast recorded a steady rise of three "
        "millimeters per year across two decades. Engineers reinforced harbor walls "
        "with granite blocks quarried from the inland ridge, and ferry schedules "
        "were adjusted around the new spring tide tables.";
    const std::string doc_b =
        "The observatory's survey of variable stars catalogued four hundred "
        "candidates in a single winter. Astronomers compared photographic plates "
        "taken ten years apart and measured brightness changes against a fixed "
        "reference grid etched into each plate.";

    TempDir dir;
    auto input_a = dir.file("a.txt", doc_a);
    auto input_b = dir.file("b.txt", doc_b);

    PipelineConfig cfg;
    cfg.inputs = {input_a, input_b};
    cfg.run_id = "resume";
    cfg.seed = 2024;
    cfg.backend.kind = "mock";
    cfg.backend.mock_seed = 11;
    cfg.n_explicit = 2;
    cfg.n_implicit = 1;
    cfg.implicit_fraction = 0.66;
    cfg.explicit_fraction = 1.0;
    cfg.shuffle = true;

    cfg.out_dir = dir.join("straight");
    auto straight = run(cfg);
    EXPECT(straight.exit_code == 0, "straight run exit " << straight.exit_code);

    const char* artifacts[] = {"segments.jsonl", "stage1.jsonl",   "stage2.jsonl",
                               "verdicts.jsonl", "stage3.jsonl",   "stage3_qa_only.jsonl",
                               "train.jsonl",    "report.json",    "sft.jsonl",
                               "quarantine.jsonl", "export_manifest.json"};
    const char* boundaries[] = {"ingest", "generate", "qc", "distract", "compose"};

    int compared = 0;
    for (const char* stop : boundaries) {
        PipelineConfig c = cfg;
        c.out_dir = dir.join(std::string("stop_") + stop);
        RunOptions first;
        first.stop_after = stop;
        auto halted = run(c, first);
        EXPECT(halted.exit_code == 0, "halted-at-" << stop << " exit " << halted.exit_code);

        auto resumed = run(c);
        EXPECT(resumed.exit_code == 0, "resumed-from-" << stop << " exit " << resumed.exit_code);
        bool skipped = false;
        for (const auto& [name, rec] : resumed.manifest.stages)
            if (name == std::string(stop)) skipped = rec.status == StageStatus::Done;
        EXPECT(skipped, "stage " << stop << " not marked Done after resume");

        for (const char* artifact : artifacts) {
            auto want = read_text_file(cfg.out_dir + "/" + artifact);
            auto got = read_text_file(c.out_dir + "/" + artifact);
            EXPECT(want == got,
                   artifact << " differs after resume from the " << stop << " boundary");
            ++compared;
        }
    }

    std::ostringstream os;
    os << "5 boundaries x " << (compared / 5) << " artifacts byte-identical to the straight run";
    return os.str();
}

struct Criterion {
    const char* name;
    std::function<std::string()> fn;
};

}  // namespace

int main() {
    const Criterion criteria[] = {
        {"end-to-end shape (6 pairs x 4 options from one 100-200 word text, < 5 s)",
         check_end_to_end_shape},
        {"qc floor under wholesale deletion (500 segments, 10% gutted)", check_qc_floor},
        {"answer-position uniformity (10,000 seeded assemblies)", check_position_uniformity},
        {"composition law (floor formula, additivity, rerun identity)", check_composition_law},
        {"metric oracles (LCS brute force, F1/EM fixture, identity/range)", check_metric_oracles},
        {"repair conservation (50 malformed lines, zero silent drops)",
         check_repair_conservation},
        {"resume determinism (every stage boundary, byte-identical artifacts)",
         check_resume_determinism},
    };

    int failures = 0;
    int index = 0;
    for (const auto& c : criteria) {
        ++index;
        std::string detail;
        bool ok = true;
        try {
            detail = c.fn();
        } catch (const Failure& f) {
            ok = false;
            detail = f.detail;
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("unexpected exception: ") + e.what();
        }
        std::printf("[%s] %d. %s: %s\n", ok ? "PASS" : "FAIL", index, c.name, detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }

    if (failures == 0)
        std::printf("all %d acceptance checks passed\n", index);
    else
        std::printf("%d of %d acceptance checks FAILED\n", failures, index);
    return failures;
}
