#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "dscore/backend.hpp"
#include "dscore/common.hpp"
#include "dscore/jsonl.hpp"
#include "dscore/prompts.hpp"
#include "dscore/tokenizer.hpp"
#include "dscore/types.hpp"

namespace dscore {

// Adapts a lambda into a transport; the test suite's universal double.
class FunctionBackend final : public Backend {
  public:
    using Handler = std::function<CompletionResult(const ChatPrompt&)>;
    explicit FunctionBackend(Handler fn) : fn_(std::move(fn)) {}
    std::string describe() const override { return "function"; }
    CompletionResult complete_once(const ChatPrompt& prompt) override { return fn_(prompt); }

  private:
    Handler fn_;
};

inline std::uint64_t prompt_hash(const ChatPrompt& prompt) {
    std::string key = prompt.system;
    key += '\x1f';
    key += prompt.user;
    return fnv1a64(key);
}

// Replays canned replies keyed by prompt hash, so a fixture file can pin an
// exact transcript. Identical prompts always yield identical text.
class ScriptedMockBackend final : public Backend {
  public:
    ScriptedMockBackend() = default;

    void script(const ChatPrompt& prompt, std::string reply) {
        replies_[prompt_hash(prompt)] = std::move(reply);
    }
    void script_hash(std::uint64_t hash, std::string reply) { replies_[hash] = std::move(reply); }
    void set_default(std::string reply) { default_ = std::move(reply); }

    // Fixture format: {"replies": {"<decimal hash>": "text", ...}, "default": "text"?}
    static ScriptedMockBackend from_file(const std::string& path) {
        ScriptedMockBackend be;
        Json j = Json::parse(read_text_file(path));
        for (const auto& [k, v] : j.at("replies").items())
            be.replies_[std::stoull(k)] = v.get<std::string>();
        if (j.contains("default")) be.default_ = j["default"].get<std::string>();
        return be;
    }

    std::string describe() const override { return "mock:scripted"; }

    CompletionResult complete_once(const ChatPrompt& prompt) override {
        auto it = replies_.find(prompt_hash(prompt));
        if (it != replies_.end()) return Completion{it->second};
        if (default_) return Completion{*default_};
        return make_unexpected(BackendError{
            BackendErrorKind::BadRequest,
            "scripted mock has no reply for prompt hash " + std::to_string(prompt_hash(prompt))});
    }

  private:
    std::map<std::uint64_t, std::string> replies_;
    std::optional<std::string> default_;
};

namespace mockdetail {

inline std::string between(const std::string& s, const std::string& open, const std::string& close) {
    auto a = s.find(open);
    if (a == std::string::npos) return {};
    a += open.size();
    auto b = s.find(close, a);
    if (b == std::string::npos) return {};
    return s.substr(a, b - a);
}

inline std::string line_after(const std::string& s, const std::string& label) {
    auto a = s.find(label);
    if (a == std::string::npos) return {};
    a += label.size();
    auto b = s.find('\n', a);
    return s.substr(a, b == std::string::npos ? std::string::npos : b - a);
}

inline int directive_count(const std::string& user, const std::string& kind) {
    std::regex re("exactly (\\d+) " + kind);
    std::smatch m;
    if (std::regex_search(user, m, re)) return std::stoi(m[1].str());
    return 0;
}

// Alphabetic tokens of length >= 4, deduplicated in order of appearance;
// raw material for questions and distractors.
inline std::vector<std::string> content_words(const std::string& text) {
    std::vector<std::string> out;
    for (const auto& tok : tokenize(text)) {
        if (tok.size() < 4) continue;
        bool alpha = true;
        for (unsigned char c : tok)
            if (!std::isalnum(c)) { alpha = false; break; }
        if (!alpha) continue;
        bool seen = false;
        for (const auto& w : out)
            if (w == tok) { seen = true; break; }
        if (!seen) out.push_back(tok);
    }
    if (out.empty())
        for (const auto& tok : tokenize(text))
            if (!tok.empty()) { out.push_back(tok); break; }
    if (out.empty()) out.push_back("text");
    return out;
}

}  // namespace mockdetail

// Deterministic simulator of an instruction-following model: replies are a
// pure function of (prompt, seed) and are syntactically valid for whichever
// pipeline stage the prompt belongs to. Explicit answers are verbatim
// substrings of the fenced segment text, so generated pairs survive grounding
// checks end to end.
class GenerativeMockBackend final : public Backend {
  public:
    explicit GenerativeMockBackend(std::uint64_t seed = 0) : seed_(seed) {}

    std::string describe() const override {
        return "mock:generative seed=" + std::to_string(seed_);
    }

    CompletionResult complete_once(const ChatPrompt& prompt) override {
        const std::string& u = prompt.user;
        std::string text;
        if (contains(u, kTaskGenerate))
            text = generate_reply(u);
        else if (contains(u, kTaskAdjudicate))
            text = adjudicate_reply(u);
        else if (contains(u, kTaskDistract))
            text = distractor_reply(u);
        else if (contains(u, kTaskAppraise))
            text = appraisal_reply(u);
        else if (contains(u, kTaskReplace))
            text = replacement_reply(u);
        else if (contains(u, kTaskBackfill))
            text = R"({"reasoning": "The source text states the relevant facts directly; reading them in order yields the answer."})";
        else if (contains(u, kTaskRepair))
            text = "I cannot reconstruct that content.";
        else
            return make_unexpected(BackendError{BackendErrorKind::BadRequest,
                                                "generative mock: unrecognized task prompt"});
        Completion c;
        c.text = std::move(text);
        c.prompt_tokens = static_cast<int>(u.size() / 4);
        c.completion_tokens = static_cast<int>(c.text.size() / 4);
        return c;
    }

  private:
    std::string segment_of(const std::string& u) const {
        return mockdetail::between(u, kTextOpen, kTextClose);
    }

    std::uint64_t mix(const std::string& u) const { return splitmix64(seed_ ^ fnv1a64(u)); }

    std::string generate_reply(const std::string& u) const {
        int n_explicit = mockdetail::directive_count(u, "explicit");
        int n_implicit = mockdetail::directive_count(u, "implicit");
        std::string seg = segment_of(u);
        auto words = mockdetail::content_words(seg);
        const std::size_t W = words.size();
        std::size_t cursor = static_cast<std::size_t>(mix(u) % W);
        auto next_word = [&] {
            const std::string& w = words[cursor % W];
            ++cursor;
            return w;
        };
        static const char* kForms[] = {
            "What does the passage mention alongside \"%\"?",
            "Which term is connected with \"%\" in the passage?",
            "In the passage, what stands in relation to \"%\"?",
        };
        Json arr = Json::array();
        for (int i = 0; i < n_explicit; ++i) {
            std::string topic = next_word();
            std::string answer = next_word();
            std::string q = replace_all(kForms[i % 3], "%", topic);
            if (i >= 3) q += " (item " + std::to_string(i + 1) + ")";
            arr.push_back({{"question", q},
                           {"answer", answer},
                           {"type", "explicit"},
                           {"reasoning", nullptr}});
        }
        for (int i = 0; i < n_implicit; ++i) {
            std::string a = next_word();
            std::string b = next_word();
            std::string q = "What connects \"" + a + "\" and \"" + b + "\" in the passage";
            if (i > 0) q += " (reading " + std::to_string(i + 1) + ")";
            q += "?";
            std::string ans = "Both belong to the situation the passage describes around \"" + a + "\".";
            std::string why = "The passage mentions \"" + a + "\" and separately mentions \"" + b +
                              "\". Since both occur in the same account, they are connected through it.";
            arr.push_back({{"question", q},
                           {"answer", ans},
                           {"type", "implicit"},
                           {"reasoning", why}});
        }
        return arr.dump();
    }

    std::string adjudicate_reply(const std::string& u) const {
        if (contains(u, kGroundingWarning))
            return R"({"directive": "DELETE", "corrected_type": null, "rationale": "the stated answer is not supported by the source text"})";
        std::string seg = segment_of(u);
        std::string answer = mockdetail::line_after(u, "answer: ");
        std::string type = trim(mockdetail::line_after(u, "labeled type: "));
        if (type == "implicit" && !answer.empty() && contains(seg, trim(answer)))
            return R"({"directive": "TYPEFIX", "corrected_type": "explicit", "rationale": "the answer is directly retrievable from the source text"})";
        return R"({"directive": "KEEP", "corrected_type": null, "rationale": "supported by the source text"})";
    }

    std::string distractor_reply(const std::string& u) const {
        std::string seg = segment_of(u);
        std::string answer = trim(mockdetail::line_after(u, "Correct answer: "));
        auto words = mockdetail::content_words(seg);
        std::uint64_t h = mix(u);
        auto norm = [](const std::string& s) { return casefold(trim(s)); };
        std::vector<std::string> opts;
        opts.push_back("nearly " + answer);
        std::size_t cursor = static_cast<std::size_t>(h % words.size());
        while (opts.size() < 3) {
            const std::string& w = words[cursor % words.size()];
            ++cursor;
            bool clash = norm(w) == norm(answer);
            for (const auto& o : opts) clash = clash || norm(o) == norm(w);
            if (!clash) {
                opts.push_back(w);
            } else if (cursor > words.size() * 2) {
                opts.push_back("alternative " + std::to_string((h + opts.size()) % 9973));
            }
        }
        int nuanced = static_cast<int>(h % 3);
        std::swap(opts[0], opts[static_cast<std::size_t>(nuanced)]);
        Json j;
        j["distractors"] = opts;
        j["nuanced_index"] = nuanced;
        return j.dump();
    }

    std::string appraisal_reply(const std::string& u) const {
        int n = 0;
        for (int i = 0; i < 8; ++i)
            if (u.find("\n" + std::to_string(i) + ": ") != std::string::npos) ++n;
        if (n == 0) n = 3;
        Json arr = Json::array();
        for (int i = 0; i < n; ++i)
            arr.push_back({{"verdict", "acceptable"}, {"reason", "distinct and text-anchored"}});
        Json j;
        j["appraisals"] = arr;
        return j.dump();
    }

    std::string replacement_reply(const std::string& u) const {
        std::uint64_t h = mix(u);
        return Json{{"distractor", "a nearby variant (form " + std::to_string(h % 4096) + ")"}}.dump();
    }

    std::uint64_t seed_;
};

}  // namespace dscore
