#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dscore/common.hpp"
#include "dscore/types.hpp"

namespace dscore {

struct CompositionConfig {
    double implicit_fraction = 1.0;
    double explicit_fraction = 1.0;
    std::uint64_t seed = 0;
    bool shuffle = false;
    bool per_segment = false;  // stratify sampling within each segment
};

struct CompositionReport {
    std::int64_t n_implicit_pool = 0;
    std::int64_t n_explicit_pool = 0;
    std::int64_t n_implicit_sampled = 0;
    std::int64_t n_explicit_sampled = 0;
    std::int64_t n_total = 0;
    std::map<std::string, std::int64_t> per_document_histogram;
};

inline Json to_json(const CompositionReport& r) {
    Json h = Json::object();
    for (const auto& [k, v] : r.per_document_histogram) h[k] = v;
    return Json{{"n_implicit_pool", r.n_implicit_pool},
                {"n_explicit_pool", r.n_explicit_pool},
                {"n_implicit_sampled", r.n_implicit_sampled},
                {"n_explicit_sampled", r.n_explicit_sampled},
                {"n_total", r.n_total},
                {"per_document_histogram", h}};
}

namespace detail {

// floor(frac * n) with a tie-free epsilon: 0.7 * 10 evaluates to 6.999...,
// and the intended count is 7. 1e-9 cannot flip a genuine non-tie because
// frac has at most a few decimal digits in practice.
inline std::size_t sample_count(double frac, std::size_t n) {
    return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9));
}

inline std::string doc_of(const QAPair& qa) {
    auto at = qa.segment_id.find("::s");
    return at == std::string::npos ? qa.segment_id : qa.segment_id.substr(0, at);
}

// Uniform k-subset of `indices` without replacement via partial Fisher-Yates,
// returned in ascending (pool) order.
inline std::vector<std::size_t> sample_subset(std::vector<std::size_t> indices, std::size_t k,
                                              Rng& rng) {
    if (k > indices.size()) k = indices.size();
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(
                                rng.bounded(static_cast<std::uint64_t>(indices.size() - i)));
        std::swap(indices[i], indices[j]);
    }
    indices.resize(k);
    std::sort(indices.begin(), indices.end());
    return indices;
}

}  // namespace detail

inline CompositionReport report(const std::vector<QAPair>& dataset) {
    CompositionReport r;
    for (const auto& qa : dataset) {
        if (qa.qtype == QType::Implicit)
            ++r.n_implicit_sampled;
        else
            ++r.n_explicit_sampled;
        ++r.per_document_histogram[detail::doc_of(qa)];
    }
    r.n_implicit_pool = r.n_implicit_sampled;
    r.n_explicit_pool = r.n_explicit_sampled;
    r.n_total = r.n_implicit_sampled + r.n_explicit_sampled;
    return r;
}

struct MixResult {
    std::vector<QAPair> dataset;
    CompositionReport report;
};

// Ratio-controlled composition: keeps floor(fraction * pool size) pairs of
// each type, sampled uniformly without replacement by a seeded generator.
// Output preserves pool order unless cfg.shuffle asks for a seeded shuffle.
inline Expected<MixResult, std::string> mix(const std::vector<QAPair>& pool,
                                            const CompositionConfig& cfg) {
    auto bad_fraction = [](double f) { return !(f >= 0.0 && f <= 1.0); };
    if (bad_fraction(cfg.implicit_fraction) || bad_fraction(cfg.explicit_fraction))
        throw std::invalid_argument("mix: fractions must lie in [0, 1]");
    if (cfg.implicit_fraction == 0.0 && cfg.explicit_fraction == 0.0)
        throw std::invalid_argument("mix: at least one fraction must be > 0");

    // Group indices by type, optionally within each segment.
    std::vector<std::pair<std::string, std::vector<std::size_t>>> implicit_groups;
    std::vector<std::pair<std::string, std::vector<std::size_t>>> explicit_groups;
    auto group_for = [&](auto& groups, const std::string& key) -> std::vector<std::size_t>& {
        for (auto& [k, v] : groups)
            if (k == key) return v;
        groups.emplace_back(key, std::vector<std::size_t>{});
        return groups.back().second;
    };
    for (std::size_t i = 0; i < pool.size(); ++i) {
        std::string key = cfg.per_segment ? pool[i].segment_id : std::string();
        auto& groups = pool[i].qtype == QType::Implicit ? implicit_groups : explicit_groups;
        group_for(groups, key).push_back(i);
    }

    MixResult out;
    std::vector<std::size_t> chosen;
    auto sample_groups = [&](auto& groups, double frac, const char* salt) {
        std::size_t total = 0;
        for (auto& [key, indices] : groups) {
            Rng rng(cfg.seed, std::string(salt) + "|" + key);
            auto picked = detail::sample_subset(indices, detail::sample_count(frac, indices.size()),
                                                rng);
            total += picked.size();
            chosen.insert(chosen.end(), picked.begin(), picked.end());
        }
        return total;
    };
    out.report.n_implicit_sampled =
        static_cast<std::int64_t>(sample_groups(implicit_groups, cfg.implicit_fraction, "implicit"));
    out.report.n_explicit_sampled =
        static_cast<std::int64_t>(sample_groups(explicit_groups, cfg.explicit_fraction, "explicit"));
    for (const auto& [key, v] : implicit_groups)
        out.report.n_implicit_pool += static_cast<std::int64_t>(v.size());
    for (const auto& [key, v] : explicit_groups)
        out.report.n_explicit_pool += static_cast<std::int64_t>(v.size());

    std::sort(chosen.begin(), chosen.end());
    out.dataset.reserve(chosen.size());
    for (auto i : chosen) out.dataset.push_back(pool[i]);

    if (cfg.shuffle && out.dataset.size() > 1) {
        Rng rng(cfg.seed, "shuffle");
        for (std::size_t i = out.dataset.size() - 1; i > 0; --i) {
            std::size_t j =
                static_cast<std::size_t>(rng.bounded(static_cast<std::uint64_t>(i + 1)));
            std::swap(out.dataset[i], out.dataset[j]);
        }
    }

    out.report.n_total = static_cast<std::int64_t>(out.dataset.size());
    for (const auto& qa : out.dataset) ++out.report.per_document_histogram[detail::doc_of(qa)];
    if (out.dataset.empty())
        return make_unexpected(std::string("composition produced an empty dataset"));
    return out;
}

}  // namespace dscore
