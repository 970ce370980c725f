#include "catch2/catch_amalgamated.hpp"

#include <atomic>

#include "dscore/generation.hpp"
#include "dscore/mock_backend.hpp"

using namespace dscore;

namespace {

Segment make_segment(const std::string& id, int index, const std::string& text) {
    Segment s;
    s.doc_id = id.substr(0, id.find(':'));
    s.segment_id = id;
    s.index = index;
    s.text = text;
    s.token_count = static_cast<int>(count_tokens(text));
    return s;
}

const std::string kText =
    "Researchers measured coastal erosion along granite cliffs during winter storms. "
    "Sediment samples revealed quartz deposits beneath older basalt layers.";

BackendClient mock_client(std::shared_ptr<Backend> be, int max_parallel = 4,
                          std::shared_ptr<RunLedger> ledger = nullptr) {
    BackendConfig cfg;
    cfg.max_parallel = max_parallel;
    cfg.retry.max_attempts = 1;
    return BackendClient(std::move(be), cfg, std::move(ledger));
}

}  // namespace

TEST_CASE("well-formed array parses into pairs with sequential ids", "[generation]") {
    std::string raw = R"([
        {"question": "Q1?", "answer": "A1", "type": "explicit", "reasoning": null},
        {"question": "Q2?", "answer": "A2", "type": "Explicit"},
        {"question": "Q3?", "answer": "A3", "type": "implicit", "reasoning": "because"}
    ])";
    auto r = parse_generation_output(raw, "d::s0");
    REQUIRE(r.has_value());
    REQUIRE(r->size() == 3);
    CHECK((*r)[0].qa_id == "d::s0::q1");
    CHECK((*r)[1].qa_id == "d::s0::q2");
    CHECK((*r)[2].qa_id == "d::s0::q3");
    CHECK((*r)[0].qtype == QType::Explicit);
    CHECK((*r)[1].qtype == QType::Explicit);
    CHECK((*r)[2].qtype == QType::Implicit);
    CHECK((*r)[2].reasoning == "because");
    CHECK_FALSE((*r)[0].reasoning.has_value());
    for (const auto& qa : *r) {
        CHECK(qa.segment_id == "d::s0");
        CHECK(qa.provenance == Provenance::Generated);
    }
}

TEST_CASE("leading chatter and fences are tolerated", "[generation]") {
    std::string raw =
        "Here are the questions you asked for:\n```json\n"
        R"([{"question": "Q?", "answer": "A", "type": "explicit", "reasoning": null}])"
        "\n```\nLet me know if you need more!";
    auto r = parse_generation_output(raw, "d::s0");
    REQUIRE(r.has_value());
    CHECK(r->size() == 1);
    CHECK((*r)[0].question == "Q?");
}

TEST_CASE("schema violations name the offending field", "[generation]") {
    auto missing_reasoning = parse_generation_output(
        R"([{"question": "Q?", "answer": "A", "type": "implicit"}])", "d::s0");
    REQUIRE_FALSE(missing_reasoning.has_value());
    CHECK(missing_reasoning.error().message == "[0].reasoning: required for implicit pairs");

    auto empty_q = parse_generation_output(
        R"([{"question": "", "answer": "A", "type": "explicit"}])", "d::s0");
    REQUIRE_FALSE(empty_q.has_value());
    CHECK(empty_q.error().message.find("[0].question") == 0);

    auto bad_type = parse_generation_output(
        R"([{"question": "Q?", "answer": "A", "type": "rhetorical"}])", "d::s0");
    REQUIRE_FALSE(bad_type.has_value());
    CHECK(bad_type.error().message.find("[0].type") == 0);

    auto no_json = parse_generation_output("I'd rather not.", "d::s0");
    REQUIRE_FALSE(no_json.has_value());
    CHECK(no_json.error().message == "no JSON array found in reply");
    CHECK(no_json.error().raw == "I'd rather not.");
}

TEST_CASE("generative mock yields full per-type counts", "[generation]") {
    auto seg = make_segment("doc::s0", 0, kText);
    auto client = mock_client(std::make_shared<GenerativeMockBackend>(3));
    auto r = generate_for_segment(seg, GenerationSpec{3, 3}, client);
    REQUIRE(r.has_value());
    REQUIRE(r->size() == 6);
    CHECK(detail::count_type(*r, QType::Explicit) == 3);
    CHECK(detail::count_type(*r, QType::Implicit) == 3);
    for (std::size_t i = 0; i < r->size(); ++i) {
        CHECK((*r)[i].qa_id == "doc::s0::q" + std::to_string(i + 1));
        CHECK((*r)[i].segment_id == "doc::s0");
    }
}

TEST_CASE("scripted reply with exact schema maps to 2 explicit + 1 implicit", "[generation]") {
    auto seg = make_segment("doc::s0", 0, kText);
    auto be = std::make_shared<FunctionBackend>([](const ChatPrompt&) -> CompletionResult {
        return Completion{R"([
            {"question": "Qa?", "answer": "granite", "type": "explicit", "reasoning": null},
            {"question": "Qb?", "answer": "quartz", "type": "explicit", "reasoning": null},
            {"question": "Qc?", "answer": "weathering", "type": "implicit", "reasoning": "inferred"}
        ])"};
    });
    auto client = mock_client(be);
    auto r = generate_for_segment(seg, GenerationSpec{2, 1}, client);
    REQUIRE(r.has_value());
    REQUIRE(r->size() == 3);
    CHECK(detail::count_type(*r, QType::Explicit) == 2);
    CHECK(detail::count_type(*r, QType::Implicit) == 1);
}

TEST_CASE("persistent prose exhausts the generation budget", "[generation]") {
    auto seg = make_segment("doc::s0", 0, kText);
    std::atomic<int> calls{0};
    auto be = std::make_shared<FunctionBackend>([&](const ChatPrompt&) -> CompletionResult {
        ++calls;
        return Completion{"I cannot produce structured output today."};
    });
    auto client = mock_client(be);
    GenerationOptions opts;
    opts.parse_retries = 3;
    auto r = generate_for_segment(seg, GenerationSpec{2, 1}, client, nullptr, opts);
    REQUIRE_FALSE(r.has_value());
    CHECK(r.error().kind == GenErrorKind::GenerationExhausted);
    CHECK(calls == 3);
}

TEST_CASE("a parse failure triggers one corrective re-prompt, then succeeds", "[generation]") {
    auto seg = make_segment("doc::s0", 0, kText);
    std::atomic<int> calls{0};
    auto be = std::make_shared<FunctionBackend>([&](const ChatPrompt& p) -> CompletionResult {
        ++calls;
        if (p.user.find("previous reply was rejected") == std::string::npos)
            return Completion{"Hmm, let me think about that."};
        return Completion{
            R"([{"question": "Q?", "answer": "granite", "type": "explicit", "reasoning": null}])"};
    });
    auto ledger = std::make_shared<RunLedger>();
    auto client = mock_client(be, 4, ledger);
    auto r = generate_for_segment(seg, GenerationSpec{1, 0}, client, ledger.get());
    REQUIRE(r.has_value());
    CHECK(r->size() == 1);
    CHECK(calls == 2);
    CHECK(ledger->get("generation.parse_retries") == 1);
}

TEST_CASE("over-delivery is truncated to the requested counts", "[generation]") {
    auto seg = make_segment("doc::s0", 0, kText);
    auto be = std::make_shared<FunctionBackend>([](const ChatPrompt&) -> CompletionResult {
        return Completion{R"([
            {"question": "Q1?", "answer": "a", "type": "explicit"},
            {"question": "Q2?", "answer": "b", "type": "explicit"},
            {"question": "Q3?", "answer": "c", "type": "explicit"},
            {"question": "Q4?", "answer": "d", "type": "implicit", "reasoning": "r"},
            {"question": "Q5?", "answer": "e", "type": "implicit", "reasoning": "r"}
        ])"};
    });
    auto client = mock_client(be);
    auto r = generate_for_segment(seg, GenerationSpec{2, 1}, client);
    REQUIRE(r.has_value());
    REQUIRE(r->size() == 3);
    CHECK((*r)[0].question == "Q1?");
    CHECK((*r)[1].question == "Q2?");
    CHECK((*r)[2].question == "Q4?");
    CHECK((*r)[2].qa_id == "doc::s0::q3");
}

TEST_CASE("persistent shortfall returns best effort and is ledgered", "[generation]") {
    auto seg = make_segment("doc::s0", 0, kText);
    auto be = std::make_shared<FunctionBackend>([](const ChatPrompt&) -> CompletionResult {
        return Completion{R"([{"question": "Q?", "answer": "a", "type": "explicit"}])"};
    });
    auto ledger = std::make_shared<RunLedger>();
    auto client = mock_client(be, 4, ledger);
    GenerationOptions opts;
    opts.parse_retries = 2;
    auto r = generate_for_segment(seg, GenerationSpec{2, 1}, client, ledger.get(), opts);
    REQUIRE(r.has_value());
    CHECK(r->size() == 1);
    CHECK(ledger->get("generation.shortfall_pairs") == 2);
    bool noted = false;
    for (const auto& n : ledger->notes()) noted = noted || contains(n, "shortfall");
    CHECK(noted);
}

TEST_CASE("stage fans out, keeps input order, isolates failures", "[generation]") {
    std::vector<Segment> segments;
    segments.push_back(make_segment("a::s0", 0, kText));
    segments.push_back(make_segment("a::s1", 1,
                                    "POISON marker forces this segment to fail generation."));
    segments.push_back(make_segment("b::s0", 0,
                                    "Harbor records show whaling vessels departed before dawn, "
                                    "carrying barrels of fresh water and salted provisions."));

    GenerativeMockBackend inner(9);
    auto be = std::make_shared<FunctionBackend>([&](const ChatPrompt& p) -> CompletionResult {
        if (p.user.find("POISON") != std::string::npos)
            return Completion{"no structured output for poisoned text"};
        return inner.complete_once(p);
    });
    auto ledger = std::make_shared<RunLedger>();
    auto client = mock_client(be, 3, ledger);
    GenerationOptions opts;
    opts.parse_retries = 2;
    auto result = generate_stage(segments, GenerationSpec{2, 1}, client, ledger.get(), opts);

    REQUIRE(result.failures.size() == 1);
    CHECK(result.failures[0].segment_id == "a::s1");
    REQUIRE(result.pairs.size() == 6);
    for (int i = 0; i < 3; ++i) CHECK(result.pairs[static_cast<std::size_t>(i)].segment_id == "a::s0");
    for (int i = 3; i < 6; ++i) CHECK(result.pairs[static_cast<std::size_t>(i)].segment_id == "b::s0");
    CHECK(ledger->get("generation.failed_segments") == 1);
    CHECK(ledger->get("generation.pairs") == 6);

    bool versioned = false;
    for (const auto& n : ledger->notes()) versioned = versioned || contains(n, "template v1");
    CHECK(versioned);
}
