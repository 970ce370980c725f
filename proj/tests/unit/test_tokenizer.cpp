#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "dscore/tokenizer.hpp"

using namespace dscore;

TEST_CASE("empty and whitespace-only input", "[tokenizer]") {
    CHECK(count_tokens("") == 0);
    CHECK(count_tokens("   \t\n") == 0);
}

TEST_CASE("plain whitespace split", "[tokenizer]") {
    CHECK(count_tokens("hello world") == 2);
    CHECK(tokenize("hello world") == std::vector<std::string>{"hello", "world"});
}

TEST_CASE("punctuation detachment", "[tokenizer]") {
    // "don't" -> [don]['t]: the apostrophe opens a token and absorbs "t".
    CHECK(tokenize("don't stop") == std::vector<std::string>{"don", "'t", "stop"});
    CHECK(count_tokens("don't stop") == 3);

    CHECK(tokenize("paris.") == std::vector<std::string>{"paris", "."});
    // Each punctuation codepoint opens its own token: [.][.][.]
    CHECK(count_tokens("...") == 3);
    // "e.g." -> [e][.g][.]
    CHECK(tokenize("e.g. bye") == std::vector<std::string>{"e", ".g", ".", "bye"});
}

TEST_CASE("unicode whitespace and word characters", "[tokenizer]") {
    CHECK(count_tokens("héllo wörld") == 2);
    CHECK(count_tokens("a b") == 2);   // NBSP separates
    CHECK(count_tokens("a b") == 2);   // EM SPACE separates
    // Guillemets are punctuation: ["«quoted"]["»"]
    CHECK(count_tokens("«quoted»") == 2);
    // Ideographic full stop detaches.
    CHECK(count_tokens("一二。") == 2);
}

TEST_CASE("token spans index into the source text", "[tokenizer]") {
    std::string text = "  don't  go";
    auto spans = tokenize_spans(text);
    REQUIRE(spans.size() == 3);
    CHECK(text.substr(spans[0].begin, spans[0].end - spans[0].begin) == "don");
    CHECK(text.substr(spans[1].begin, spans[1].end - spans[1].begin) == "'t");
    CHECK(text.substr(spans[2].begin, spans[2].end - spans[2].begin) == "go");
}

namespace {

std::string random_text(std::uint64_t seed, std::size_t len) {
    // Mix of word chars, punctuation, and whitespace, including multibyte.
    static const std::vector<std::string> atoms = {
        "a", "b", "z", "9", "é", "中", ".", ",", "'", "!", " ", "\t", "\n", " "};
    Rng rng(seed);
    std::string out;
    for (std::size_t i = 0; i < len; ++i) out += atoms[rng.bounded(atoms.size())];
    return out;
}

}  // namespace

TEST_CASE("monotone under concatenation", "[tokenizer]") {
    // count(a + b) >= max(count(a), count(b)): only the boundary tokens can merge.
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        std::string a = random_text(seed * 2 + 1, seed % 17);
        std::string b = random_text(seed * 2 + 2, (seed * 3) % 23);
        std::size_t ca = count_tokens(a);
        std::size_t cb = count_tokens(b);
        std::size_t cab = count_tokens(a + b);
        INFO("a=" << a << " b=" << b);
        CHECK(cab >= std::max(ca, cb));
        CHECK(cab <= ca + cb);
    }
}

TEST_CASE("deterministic", "[tokenizer]") {
    std::string t = random_text(42, 500);
    CHECK(tokenize(t) == tokenize(t));
}
