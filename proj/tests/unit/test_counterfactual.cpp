#include "catch2/catch_amalgamated.hpp"

#include <atomic>
#include <set>

#include "dscore/counterfactual.hpp"
#include "dscore/mock_backend.hpp"

using namespace dscore;

namespace {

Segment make_segment(const std::string& id, const std::string& text) {
    Segment s;
    s.doc_id = id.substr(0, id.find(':'));
    s.segment_id = id;
    s.index = 0;
    s.text = text;
    s.token_count = static_cast<int>(count_tokens(text));
    return s;
}

QAPair make_pair(const std::string& qa_id, const std::string& segment_id,
                 const std::string& question, const std::string& answer) {
    QAPair qa;
    qa.qa_id = qa_id;
    qa.segment_id = segment_id;
    qa.question = question;
    qa.answer = answer;
    qa.qtype = QType::Explicit;
    return qa;
}

BackendClient mock_client(std::shared_ptr<Backend> be, int max_parallel = 4,
                          std::shared_ptr<RunLedger> ledger = nullptr) {
    BackendConfig cfg;
    cfg.max_parallel = max_parallel;
    cfg.retry.max_attempts = 1;
    return BackendClient(std::move(be), cfg, std::move(ledger));
}

const std::string kText =
    "Researchers measured coastal erosion along granite cliffs during winter storms. "
    "Sediment samples revealed quartz deposits beneath older basalt layers.";

}  // namespace

TEST_CASE("generative mock yields an accepted distractor set", "[counterfactual]") {
    auto seg = make_segment("d::s0", kText);
    auto qa = make_pair("d::s0::q1", "d::s0", "Which rock forms the cliffs?", "granite");
    auto client = mock_client(std::make_shared<GenerativeMockBackend>(3));
    auto r = generate_distractors(qa, seg, client);
    REQUIRE(r.has_value());
    REQUIRE(r->texts.size() == 3);
    CHECK(detail::all_distinct_from(r->texts, qa.answer));
    CHECK(r->nuanced_index >= 0);
    CHECK(r->nuanced_index <= 2);
}

TEST_CASE("a distractor equal to the answer triggers a corrective retry", "[counterfactual]") {
    auto seg = make_segment("d::s0", kText);
    auto qa = make_pair("d::s0::q1", "d::s0", "Q?", "granite");
    std::atomic<int> calls{0};
    auto be = std::make_shared<FunctionBackend>([&](const ChatPrompt& p) -> CompletionResult {
        ++calls;
        if (p.user.find("previous reply was rejected") == std::string::npos)
            return Completion{
                R"({"distractors": ["granite", "basalt", "quartz"], "nuanced_index": 0})"};
        return Completion{
            R"({"distractors": ["sandstone", "basalt", "quartz"], "nuanced_index": 1})"};
    });
    auto ledger = std::make_shared<RunLedger>();
    auto client = mock_client(be, 4, ledger);
    auto r = generate_distractors(qa, seg, client, ledger.get());
    REQUIRE(r.has_value());
    CHECK(calls == 2);
    CHECK(ledger->get("distract.retries") == 1);
    CHECK(r->texts[0] == "sandstone");
    CHECK(r->nuanced_index == 1);
}

TEST_CASE("an undersized distractor list exhausts the budget", "[counterfactual]") {
    auto seg = make_segment("d::s0", kText);
    auto qa = make_pair("d::s0::q1", "d::s0", "Q?", "granite");
    auto be = std::make_shared<FunctionBackend>([](const ChatPrompt&) -> CompletionResult {
        return Completion{R"({"distractors": ["basalt", "quartz"], "nuanced_index": 0})"};
    });
    auto ledger = std::make_shared<RunLedger>();
    auto client = mock_client(be, 4, ledger);
    CounterfactualOptions opts;
    opts.parse_retries = 2;
    auto r = generate_distractors(qa, seg, client, ledger.get(), opts);
    REQUIRE_FALSE(r.has_value());
    CHECK(r.error().qa_id == "d::s0::q1");
    CHECK(ledger->get("distract.exhausted") == 1);
}

TEST_CASE("appraisal passes an acceptable set unchanged", "[counterfactual]") {
    auto seg = make_segment("d::s0", kText);
    auto qa = make_pair("d::s0::q1", "d::s0", "Q?", "granite");
    auto client = mock_client(std::make_shared<GenerativeMockBackend>(3));
    DistractorSet set{{"basalt", "quartz", "sediment"}, 1};
    auto r = ensure_acceptable_distractors(qa, set, seg, client);
    REQUIRE(r.has_value());
    CHECK(r->texts == set.texts);
    CHECK(r->nuanced_index == 1);
}

TEST_CASE("one regenerate verdict causes exactly one replacement call", "[counterfactual]") {
    auto seg = make_segment("d::s0", kText);
    auto qa = make_pair("d::s0::q1", "d::s0", "Q?", "granite");
    std::atomic<int> appraisals{0};
    std::atomic<int> replacements{0};
    auto be = std::make_shared<FunctionBackend>([&](const ChatPrompt& p) -> CompletionResult {
        if (p.user.find(kTaskAppraise) != std::string::npos) {
            int n = ++appraisals;
            if (n == 1)
                return Completion{R"({"appraisals": [
                    {"verdict": "acceptable", "reason": ""},
                    {"verdict": "regenerate", "reason": "too easy"},
                    {"verdict": "acceptable", "reason": ""}]})"};
            return Completion{R"({"appraisals": [
                {"verdict": "acceptable", "reason": ""},
                {"verdict": "acceptable", "reason": ""},
                {"verdict": "acceptable", "reason": ""}]})"};
        }
        if (p.user.find(kTaskReplace) != std::string::npos) {
            ++replacements;
            return Completion{R"({"distractor": "shale"})"};
        }
        return make_unexpected(BackendError{BackendErrorKind::BadRequest, "unexpected prompt"});
    });
    auto ledger = std::make_shared<RunLedger>();
    auto client = mock_client(be, 4, ledger);
    DistractorSet set{{"basalt", "mica", "quartz"}, 0};
    auto r = ensure_acceptable_distractors(qa, set, seg, client, ledger.get());
    REQUIRE(r.has_value());
    CHECK(appraisals == 2);
    CHECK(replacements == 1);
    CHECK(r->texts[1] == "shale");
    CHECK(ledger->get("distract.replaced") == 1);
}

TEST_CASE("persistent regenerate verdicts fail the item over to QA-only", "[counterfactual]") {
    auto seg = make_segment("d::s0", kText);
    auto qa = make_pair("d::s0::q1", "d::s0", "Q?", "granite");
    std::atomic<int> replacements{0};
    auto be = std::make_shared<FunctionBackend>([&](const ChatPrompt& p) -> CompletionResult {
        if (p.user.find(kTaskAppraise) != std::string::npos)
            return Completion{R"({"appraisals": [
                {"verdict": "regenerate", "reason": "bad"},
                {"verdict": "regenerate", "reason": "bad"},
                {"verdict": "regenerate", "reason": "bad"}]})"};
        if (p.user.find(kTaskReplace) != std::string::npos) {
            int n = ++replacements;
            return Completion{"{\"distractor\": \"replacement " + std::to_string(n) + "\"}"};
        }
        return make_unexpected(BackendError{BackendErrorKind::BadRequest, "unexpected prompt"});
    });
    auto ledger = std::make_shared<RunLedger>();
    auto client = mock_client(be, 4, ledger);
    CounterfactualOptions opts;
    opts.appraisal_rounds = 2;
    auto r = ensure_acceptable_distractors(qa, DistractorSet{{"a", "b", "c"}, 0}, seg, client,
                                           ledger.get(), opts);
    REQUIRE_FALSE(r.has_value());
    CHECK(replacements == 3);  // one cycle of replacements before the final appraisal
    CHECK(ledger->get("distract.exhausted") == 1);
}

TEST_CASE("unparseable appraisal distrusts all three distractors", "[counterfactual]") {
    auto seg = make_segment("d::s0", kText);
    auto qa = make_pair("d::s0::q1", "d::s0", "Q?", "granite");
    std::atomic<int> appraisals{0};
    std::atomic<int> replacements{0};
    auto be = std::make_shared<FunctionBackend>([&](const ChatPrompt& p) -> CompletionResult {
        if (p.user.find(kTaskAppraise) != std::string::npos) {
            int n = ++appraisals;
            if (n <= 3) return Completion{"they all look fine to me"};  // parse retries burn 3
            return Completion{R"({"appraisals": [
                {"verdict": "acceptable", "reason": ""},
                {"verdict": "acceptable", "reason": ""},
                {"verdict": "acceptable", "reason": ""}]})"};
        }
        if (p.user.find(kTaskReplace) != std::string::npos) {
            int n = ++replacements;
            return Completion{"{\"distractor\": \"fresh option " + std::to_string(n) + "\"}"};
        }
        return make_unexpected(BackendError{BackendErrorKind::BadRequest, "unexpected prompt"});
    });
    auto client = mock_client(be);
    auto r = ensure_acceptable_distractors(qa, DistractorSet{{"a", "b", "c"}, 2}, seg, client);
    REQUIRE(r.has_value());
    CHECK(replacements == 3);
    for (const auto& t : r->texts) CHECK(t.find("fresh option") == 0);
}

TEST_CASE("no-appraisal mode skips the judge entirely", "[counterfactual]") {
    auto seg = make_segment("d::s0", kText);
    auto qa = make_pair("d::s0::q1", "d::s0", "Q?", "granite");
    std::atomic<int> calls{0};
    auto be = std::make_shared<FunctionBackend>([&](const ChatPrompt&) -> CompletionResult {
        ++calls;
        return Completion{"should never be called"};
    });
    auto client = mock_client(be);
    CounterfactualOptions opts;
    opts.appraise = false;
    auto r = ensure_acceptable_distractors(qa, DistractorSet{{"a", "b", "c"}, 0}, seg, client,
                                           nullptr, opts);
    REQUIRE(r.has_value());
    CHECK(calls == 0);
}

TEST_CASE("assembly places the answer exactly once at the seeded slot", "[counterfactual]") {
    auto qa = make_pair("d::s0::q1", "d::s0", "Which rock forms the cliffs?", "granite");
    DistractorSet set{{"basalt", "quartz", "shale"}, 1};
    auto item = assemble_mcq(qa, set, 7);

    CHECK(item.qa_id == qa.qa_id);
    CHECK(item.stem == qa.question);
    REQUIRE(item.options.size() == 4);
    int answer_count = 0;
    for (const auto& o : item.options) answer_count += o == "granite" ? 1 : 0;
    CHECK(answer_count == 1);
    CHECK(item.options[static_cast<std::size_t>(item.correct_index)] == "granite");
    CHECK(item.rng_seed_used == 7);

    Rng oracle(7, qa.qa_id);
    CHECK(item.correct_index == static_cast<int>(oracle.bounded(4)));

    CHECK(item.nuanced_index != item.correct_index);
    CHECK(item.options[static_cast<std::size_t>(item.nuanced_index)] == "quartz");

    auto again = assemble_mcq(qa, set, 7);
    CHECK(again.correct_index == item.correct_index);
    CHECK(again.options == item.options);

    auto other_seed = assemble_mcq(qa, set, 8);
    auto other_id = assemble_mcq(make_pair("d::s0::q2", "d::s0", "Q?", "granite"), set, 7);
    // Different keys draw independently; over these two plus the original,
    // at least two distinct positions should appear for this fixture.
    std::set<int> positions{item.correct_index, other_seed.correct_index,
                            other_id.correct_index};
    CHECK(positions.size() >= 2);
}

TEST_CASE("assembly rejects duplicate options", "[counterfactual]") {
    auto qa = make_pair("d::s0::q1", "d::s0", "Q?", "granite");
    CHECK_THROWS_AS(assemble_mcq(qa, DistractorSet{{"granite", "b", "c"}, 0}, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(assemble_mcq(qa, DistractorSet{{"b", "B ", "c"}, 0}, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(assemble_mcq(qa, DistractorSet{{"b", "c"}, 0}, 1), std::invalid_argument);
}

TEST_CASE("correct positions spread over all four slots", "[counterfactual]") {
    DistractorSet set{{"w1", "w2", "w3"}, 0};
    int counts[4] = {0, 0, 0, 0};
    for (int i = 0; i < 2000; ++i) {
        auto qa = make_pair("d::s" + std::to_string(i) + "::q1", "d::s0", "Q?", "ans");
        counts[assemble_mcq(qa, set, 7).correct_index] += 1;
    }
    for (int c : counts) {
        CHECK(c > 400);  // expected 500 under uniformity
        CHECK(c < 600);
    }
}

TEST_CASE("stage assembles items in input order and isolates failures", "[counterfactual]") {
    std::vector<Segment> segments = {
        make_segment("a::s0", kText),
        make_segment("b::s0",
                     "POISON harbor records show whaling vessels departed before dawn carrying "
                     "fresh provisions."),
    };
    std::vector<QAPair> pairs = {
        make_pair("a::s0::q1", "a::s0", "Q1?", "granite"),
        make_pair("b::s0::q1", "b::s0", "Q2?", "provisions"),
        make_pair("a::s0::q2", "a::s0", "Q3?", "quartz"),
    };
    GenerativeMockBackend inner(5);
    auto be = std::make_shared<FunctionBackend>([&](const ChatPrompt& p) -> CompletionResult {
        if (p.user.find(kTaskDistract) != std::string::npos &&
            p.user.find("POISON") != std::string::npos)
            return Completion{"cannot help with that"};
        return inner.complete_once(p);
    });
    auto ledger = std::make_shared<RunLedger>();
    auto client = mock_client(be, 3, ledger);
    CounterfactualOptions opts;
    opts.parse_retries = 2;
    auto result = distract_stage(segments, pairs, client, 7, ledger.get(), opts);

    REQUIRE(result.items.size() == 2);
    CHECK(result.items[0].qa_id == "a::s0::q1");
    CHECK(result.items[1].qa_id == "a::s0::q2");
    REQUIRE(result.qa_only.size() == 1);
    CHECK(result.qa_only[0].qa_id == "b::s0::q1");
    CHECK(ledger->get("distract.items") == 2);

    for (const auto& item : result.items) {
        REQUIRE(item.options.size() == 4);
        CHECK(item.nuanced_index != item.correct_index);
        std::set<std::string> norm;
        for (const auto& o : item.options) norm.insert(detail::option_norm(o));
        CHECK(norm.size() == 4);
    }
}

TEST_CASE("stage rejects pairs referencing unknown segments", "[counterfactual]") {
    std::vector<Segment> segments = {make_segment("a::s0", kText)};
    std::vector<QAPair> pairs = {make_pair("x::s0::q1", "x::s0", "Q?", "a")};
    auto client = mock_client(std::make_shared<GenerativeMockBackend>(1));
    CHECK_THROWS_AS(distract_stage(segments, pairs, client, 7), std::invalid_argument);
}
