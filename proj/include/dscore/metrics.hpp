#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dscore/common.hpp"
#include "dscore/tokenizer.hpp"
#include "dscore/types.hpp"

namespace dscore {

namespace detail {

// SQuAD-style answer normalization: casefold, delete punctuation, drop
// English articles, collapse whitespace.
inline std::vector<std::string> answer_tokens(std::string_view s) {
    std::string folded = casefold(s);
    std::string depunct;
    std::size_t i = 0;
    while (i < folded.size()) {
        std::size_t start = i;
        char32_t cp = utf8_next(folded, i);
        if (!is_punct_cp(cp)) depunct.append(folded, start, i - start);
    }
    std::vector<std::string> out;
    for (auto& tok : split(collapse_whitespace(depunct), ' ')) {
        if (tok.empty() || tok == "a" || tok == "an" || tok == "the") continue;
        out.push_back(std::move(tok));
    }
    return out;
}

inline std::string normalize_answer(std::string_view s) {
    return join(answer_tokens(s), " ");
}

// ROUGE/BLEU operate on casefolded pipeline tokens, articles intact.
inline std::vector<std::string> metric_tokens(std::string_view s) {
    return tokenize(casefold(s));
}

inline double f_measure(double matches, double n_pred, double n_gold) {
    if (matches <= 0.0 || n_pred <= 0.0 || n_gold <= 0.0) return 0.0;
    double p = matches / n_pred;
    double r = matches / n_gold;
    return 200.0 * p * r / (p + r);
}

inline std::size_t lcs_length(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            if (a[i - 1] == b[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline std::map<std::vector<std::string>, std::size_t> ngram_counts(
    const std::vector<std::string>& toks, std::size_t n) {
    std::map<std::vector<std::string>, std::size_t> counts;
    if (toks.size() < n) return counts;
    for (std::size_t i = 0; i + n <= toks.size(); ++i)
        ++counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                          toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
    return counts;
}

inline std::size_t clipped_matches(const std::map<std::vector<std::string>, std::size_t>& pred,
                                   const std::map<std::vector<std::string>, std::size_t>& gold) {
    std::size_t m = 0;
    for (const auto& [gram, c] : pred) {
        auto at = gold.find(gram);
        if (at != gold.end()) m += std::min(c, at->second);
    }
    return m;
}

}  // namespace detail

inline double token_f1(std::string_view pred, std::string_view gold) {
    auto p = detail::answer_tokens(pred);
    auto g = detail::answer_tokens(gold);
    if (p.empty() && g.empty()) return 100.0;
    if (p.empty() || g.empty()) return 0.0;
    std::map<std::string, std::size_t> gold_counts;
    for (const auto& t : g) ++gold_counts[t];
    std::size_t overlap = 0;
    for (const auto& t : p) {
        auto at = gold_counts.find(t);
        if (at != gold_counts.end() && at->second > 0) {
            ++overlap;
            --at->second;
        }
    }
    return detail::f_measure(static_cast<double>(overlap), static_cast<double>(p.size()),
                             static_cast<double>(g.size()));
}

inline double exact_match(std::string_view pred, std::string_view gold) {
    return detail::normalize_answer(pred) == detail::normalize_answer(gold) ? 100.0 : 0.0;
}

inline double rouge_l(std::string_view pred, std::string_view gold) {
    auto p = detail::metric_tokens(pred);
    auto g = detail::metric_tokens(gold);
    if (p.empty() && g.empty()) return 100.0;
    auto lcs = detail::lcs_length(p, g);
    return detail::f_measure(static_cast<double>(lcs), static_cast<double>(p.size()),
                             static_cast<double>(g.size()));
}

inline double rouge_n(std::string_view pred, std::string_view gold, std::size_t n = 2) {
    if (n < 1) throw std::invalid_argument("rouge_n: n must be >= 1");
    auto p = detail::metric_tokens(pred);
    auto g = detail::metric_tokens(gold);
    auto pc = detail::ngram_counts(p, n);
    auto gc = detail::ngram_counts(g, n);
    std::size_t n_pred = p.size() < n ? 0 : p.size() - n + 1;
    std::size_t n_gold = g.size() < n ? 0 : g.size() - n + 1;
    // Neither side has any n-grams (both shorter than n): score degenerates
    // to token-sequence equality so that identity still yields 100.
    if (n_pred == 0 && n_gold == 0) return p == g ? 100.0 : 0.0;
    return detail::f_measure(static_cast<double>(detail::clipped_matches(pc, gc)),
                             static_cast<double>(n_pred), static_cast<double>(n_gold));
}

// Corpus BLEU. Modified n-gram precisions are pooled across the corpus;
// a zero or empty count at any order is smoothed to (m+1)/(c+1) so the
// geometric mean stays finite. Brevity penalty uses total lengths.
inline double bleu(const std::vector<std::string>& preds, const std::vector<std::string>& golds,
                   std::size_t max_n = 4) {
    if (preds.size() != golds.size())
        throw std::invalid_argument("bleu: prediction and reference counts differ");
    if (preds.empty() || max_n < 1) return 0.0;

    std::vector<std::size_t> matches(max_n, 0), totals(max_n, 0);
    std::size_t pred_len = 0, gold_len = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        auto p = detail::metric_tokens(preds[i]);
        auto g = detail::metric_tokens(golds[i]);
        pred_len += p.size();
        gold_len += g.size();
        for (std::size_t n = 1; n <= max_n; ++n) {
            auto pc = detail::ngram_counts(p, n);
            auto gc = detail::ngram_counts(g, n);
            matches[n - 1] += detail::clipped_matches(pc, gc);
            totals[n - 1] += p.size() < n ? 0 : p.size() - n + 1;
        }
    }
    if (pred_len == 0) return 0.0;

    double log_sum = 0.0;
    for (std::size_t n = 0; n < max_n; ++n) {
        double m = static_cast<double>(matches[n]);
        double c = static_cast<double>(totals[n]);
        double pn = (matches[n] == 0 || totals[n] == 0) ? (m + 1.0) / (c + 1.0) : m / c;
        log_sum += std::log(pn);
    }
    double geo = std::exp(log_sum / static_cast<double>(max_n));
    double bp = pred_len >= gold_len
                    ? 1.0
                    : std::exp(1.0 - static_cast<double>(gold_len) / static_cast<double>(pred_len));
    return 100.0 * bp * geo;
}

// Embedding backend for semantic similarity. Implementations may call a
// remote endpoint; tests plug in fixed vectors.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual Expected<std::vector<double>, std::string> embed(const std::string& text) = 0;
};

// Cosine similarity mapped affinely from [-1, 1] to [0, 100]. Absent or
// failing embedder yields nullopt so callers omit the metric.
inline std::optional<double> semsim(std::string_view pred, std::string_view gold,
                                    Embedder* embedder) {
    if (embedder == nullptr) return std::nullopt;
    auto a = embedder->embed(std::string(pred));
    auto b = embedder->embed(std::string(gold));
    if (!a.has_value() || !b.has_value()) return std::nullopt;
    const auto& va = a.value();
    const auto& vb = b.value();
    if (va.size() != vb.size() || va.empty()) return std::nullopt;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) {
        dot += va[i] * vb[i];
        na += va[i] * va[i];
        nb += vb[i] * vb[i];
    }
    if (na == 0.0 || nb == 0.0) return std::nullopt;
    double cos = dot / (std::sqrt(na) * std::sqrt(nb));
    cos = std::clamp(cos, -1.0, 1.0);
    return (1.0 + cos) * 50.0;
}

struct ScoreReport {
    double f1 = 0.0;
    double em = 0.0;
    double bleu = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
    std::optional<double> semsim;
    std::int64_t n = 0;
};

inline Json to_json(const ScoreReport& r) {
    Json j{{"f1", r.f1},         {"em", r.em},         {"bleu", r.bleu},
           {"rouge2", r.rouge2}, {"rougeL", r.rougeL}, {"n", r.n}};
    j["semsim"] = r.semsim.has_value() ? Json(*r.semsim) : Json(nullptr);
    return j;
}

inline ScoreReport score_corpus(const std::vector<std::string>& preds,
                                const std::vector<std::string>& golds,
                                Embedder* embedder = nullptr) {
    if (preds.size() != golds.size())
        throw std::invalid_argument("score_corpus: prediction and reference counts differ");
    ScoreReport r;
    r.n = static_cast<std::int64_t>(preds.size());
    if (preds.empty()) return r;

    double sim_sum = 0.0;
    std::int64_t sim_n = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        r.f1 += token_f1(preds[i], golds[i]);
        r.em += exact_match(preds[i], golds[i]);
        r.rouge2 += rouge_n(preds[i], golds[i], 2);
        r.rougeL += rouge_l(preds[i], golds[i]);
        auto s = semsim(preds[i], golds[i], embedder);
        if (s) {
            sim_sum += *s;
            ++sim_n;
        }
    }
    double n = static_cast<double>(preds.size());
    r.f1 /= n;
    r.em /= n;
    r.rouge2 /= n;
    r.rougeL /= n;
    r.bleu = bleu(preds, golds);
    if (sim_n > 0) r.semsim = sim_sum / static_cast<double>(sim_n);
    return r;
}

struct PositionAudit {
    std::array<std::int64_t, 4> counts{0, 0, 0, 0};
    double chi_square = 0.0;
    double p_value = 1.0;
};

inline Json to_json(const PositionAudit& a) {
    return Json{{"counts", a.counts}, {"chi_square", a.chi_square}, {"p_value", a.p_value}};
}

namespace detail {

// Survival function of the chi-square distribution with 3 degrees of
// freedom: P(X > x) = erfc(sqrt(a)) + 2/sqrt(pi) * sqrt(a) * exp(-a),
// where a = x/2.
inline double chi_square_3df_p(double x) {
    if (x <= 0.0) return 1.0;
    double a = x / 2.0;
    double p = std::erfc(std::sqrt(a)) +
               (2.0 / std::sqrt(std::numbers::pi)) * std::sqrt(a) * std::exp(-a);
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace detail

// Goodness-of-fit of answer positions against the uniform law over the
// four option slots.
inline PositionAudit position_bias_audit(const std::vector<MCQItem>& items) {
    if (items.empty()) throw std::invalid_argument("position_bias_audit: no items");
    PositionAudit a;
    for (const auto& it : items) {
        if (it.correct_index < 0 || it.correct_index > 3)
            throw std::invalid_argument("position_bias_audit: correct_index out of range");
        ++a.counts[static_cast<std::size_t>(it.correct_index)];
    }
    double expected = static_cast<double>(items.size()) / 4.0;
    for (auto c : a.counts) {
        double d = static_cast<double>(c) - expected;
        a.chi_square += d * d / expected;
    }
    a.p_value = detail::chi_square_3df_p(a.chi_square);
    return a;
}

}  // namespace dscore
