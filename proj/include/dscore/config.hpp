#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dscore/common.hpp"
#include "dscore/exporter.hpp"

namespace dscore {

inline constexpr const char* kStageNames[] = {"ingest",   "generate", "qc",
                                              "distract", "compose",  "export"};

inline bool is_stage_name(const std::string& s) {
    for (const char* name : kStageNames)
        if (s == name) return true;
    return false;
}

inline int stage_rank(const std::string& s) {
    for (int i = 0; i < 6; ++i)
        if (s == kStageNames[i]) return i;
    return -1;
}

inline std::string valid_stage_list() {
    std::string out;
    for (const char* name : kStageNames) {
        if (!out.empty()) out += ", ";
        out += name;
    }
    return out;
}

// Transport selection plus connection knobs; one base [backend] section,
// optionally refined per stage by [backend.<stage>] sections.
struct BackendSettings {
    std::string kind = "http";  // http | mock | scripted
    std::string base_url = "http://localhost:11434/v1";
    std::string api_key;
    std::string model;
    int max_parallel = 4;
    double timeout_s = 120.0;
    int retry_attempts = 3;
    double backoff_ms = 500.0;
    std::uint64_t mock_seed = 0;  // generative mock
    std::string script;           // scripted mock fixture path
};

struct ConfigError {
    std::string path;     // e.g. "ingest.max_tokens"
    std::string message;  // e.g. "must be >= 16"
};

inline std::string to_string(const ConfigError& e) { return e.path + ": " + e.message; }

struct PipelineConfig {
    // [run]
    std::string run_id = "run";
    std::string out_dir = "out";
    std::uint64_t seed = 7;
    std::vector<std::string> stages = {"ingest", "generate", "qc",
                                       "distract", "compose", "export"};
    // [ingest]
    std::vector<std::string> inputs;
    int max_tokens = 200;
    std::string corpus_format = "plain";  // plain | jsonl
    std::string text_field = "text";
    std::string segmenter = "budget";  // budget | structural
    // [generate]
    int n_explicit = 3;
    int n_implicit = 3;
    int gen_parse_retries = 3;
    // [qc]
    int qc_parse_retries = 3;
    int floor_attempts = 3;
    // [distract]
    bool appraise = true;
    int appraisal_rounds = 2;
    int distract_parse_retries = 3;
    // [compose]
    double implicit_fraction = 1.0;
    double explicit_fraction = 1.0;
    bool shuffle = false;
    bool per_segment = false;
    // [export]
    ExportFormat format = ExportFormat::QaCot;
    bool include_context = false;
    bool dedup = true;

    BackendSettings backend;
    // raw per-stage overrides, applied over `backend` when a stage client is built
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> backend_overrides;

    bool stage_enabled(const std::string& name) const {
        return std::find(stages.begin(), stages.end(), name) != stages.end();
    }
};

namespace detail {

inline std::optional<std::int64_t> parse_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<std::uint64_t> parse_uint(const std::string& s) {
    if (s.empty() || s[0] == '-') return std::nullopt;
    char* end = nullptr;
    unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<bool> parse_bool(const std::string& s) {
    std::string v = casefold(s);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    return std::nullopt;
}

inline std::vector<std::string> parse_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto& part : split(s, ',')) {
        std::string t = trim(part);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

}  // namespace detail

// One key under a backend section; shared by [backend] and [backend.<stage>].
inline std::optional<ConfigError> apply_backend_kv(BackendSettings& b, const std::string& path,
                                                   const std::string& key,
                                                   const std::string& value) {
    auto err = [&](const std::string& msg) { return ConfigError{path + "." + key, msg}; };
    if (key == "kind") {
        if (value != "http" && value != "mock" && value != "scripted")
            return err("must be one of http, mock, scripted");
        b.kind = value;
    } else if (key == "base_url") {
        b.base_url = value;
    } else if (key == "api_key") {
        b.api_key = value;
    } else if (key == "model") {
        b.model = value;
    } else if (key == "max_parallel") {
        auto v = detail::parse_int(value);
        if (!v || *v < 1) return err("must be an integer >= 1");
        b.max_parallel = static_cast<int>(*v);
    } else if (key == "timeout_s") {
        auto v = detail::parse_double(value);
        if (!v || *v <= 0) return err("must be a positive number of seconds");
        b.timeout_s = *v;
    } else if (key == "retry_attempts") {
        auto v = detail::parse_int(value);
        if (!v || *v < 1) return err("must be an integer >= 1");
        b.retry_attempts = static_cast<int>(*v);
    } else if (key == "backoff_ms") {
        auto v = detail::parse_double(value);
        if (!v || *v < 0) return err("must be a non-negative number");
        b.backoff_ms = *v;
    } else if (key == "mock_seed") {
        auto v = detail::parse_uint(value);
        if (!v) return err("must be a non-negative integer");
        b.mock_seed = *v;
    } else if (key == "script") {
        b.script = value;
    } else {
        return err("unknown key");
    }
    return std::nullopt;
}

// Applies one "section.key = value" setting. Used by the file loader and by
// CLI --set overrides, so both share one precedence mechanism.
inline std::optional<ConfigError> apply_setting(PipelineConfig& cfg, const std::string& section,
                                                const std::string& key, const std::string& value) {
    auto path = section + "." + key;
    auto err = [&](const std::string& msg) { return ConfigError{path, msg}; };

    if (section == "run") {
        if (key == "run_id") {
            if (value.empty() || value.find('/') != std::string::npos)
                return err("must be non-empty and contain no '/'");
            cfg.run_id = value;
        } else if (key == "out_dir") {
            if (value.empty()) return err("must be non-empty");
            cfg.out_dir = value;
        } else if (key == "seed") {
            auto v = detail::parse_uint(value);
            if (!v) return err("must be a non-negative integer");
            cfg.seed = *v;
        } else if (key == "stages") {
            cfg.stages = detail::parse_list(value);
        } else {
            return err("unknown key");
        }
        return std::nullopt;
    }
    if (section == "ingest") {
        if (key == "inputs") {
            cfg.inputs = detail::parse_list(value);
        } else if (key == "max_tokens") {
            auto v = detail::parse_int(value);
            if (!v) return err("must be an integer");
            cfg.max_tokens = static_cast<int>(*v);
        } else if (key == "format") {
            if (value != "plain" && value != "text" && value != "jsonl")
                return err("must be plain or jsonl");
            cfg.corpus_format = value == "text" ? "plain" : value;
        } else if (key == "text_field") {
            if (value.empty()) return err("must be non-empty");
            cfg.text_field = value;
        } else if (key == "segmenter") {
            if (value != "budget" && value != "structural")
                return err("must be budget or structural");
            cfg.segmenter = value;
        } else {
            return err("unknown key");
        }
        return std::nullopt;
    }
    if (section == "generate") {
        auto v = detail::parse_int(value);
        if (key == "n_explicit" || key == "n_implicit" || key == "parse_retries") {
            if (!v || *v < 0) return err("must be a non-negative integer");
            if (key == "n_explicit")
                cfg.n_explicit = static_cast<int>(*v);
            else if (key == "n_implicit")
                cfg.n_implicit = static_cast<int>(*v);
            else
                cfg.gen_parse_retries = static_cast<int>(*v);
            return std::nullopt;
        }
        return err("unknown key");
    }
    if (section == "qc") {
        auto v = detail::parse_int(value);
        if (key == "parse_retries" || key == "floor_attempts") {
            if (!v || *v < 1) return err("must be an integer >= 1");
            (key == "parse_retries" ? cfg.qc_parse_retries : cfg.floor_attempts) =
                static_cast<int>(*v);
            return std::nullopt;
        }
        return err("unknown key");
    }
    if (section == "distract") {
        if (key == "appraise") {
            auto v = detail::parse_bool(value);
            if (!v) return err("must be a boolean");
            cfg.appraise = *v;
        } else if (key == "appraisal_rounds" || key == "parse_retries") {
            auto v = detail::parse_int(value);
            if (!v || *v < 1) return err("must be an integer >= 1");
            (key == "appraisal_rounds" ? cfg.appraisal_rounds : cfg.distract_parse_retries) =
                static_cast<int>(*v);
        } else {
            return err("unknown key");
        }
        return std::nullopt;
    }
    if (section == "compose") {
        if (key == "implicit_fraction" || key == "explicit_fraction") {
            auto v = detail::parse_double(value);
            if (!v || *v < 0.0 || *v > 1.0) return err("must be a number in [0, 1]");
            (key == "implicit_fraction" ? cfg.implicit_fraction : cfg.explicit_fraction) = *v;
        } else if (key == "shuffle" || key == "per_segment") {
            auto v = detail::parse_bool(value);
            if (!v) return err("must be a boolean");
            (key == "shuffle" ? cfg.shuffle : cfg.per_segment) = *v;
        } else {
            return err("unknown key");
        }
        return std::nullopt;
    }
    if (section == "export") {
        if (key == "format") {
            try {
                cfg.format = export_format_from_string(value);
            } catch (const std::invalid_argument& e) {
                return err(e.what());
            }
        } else if (key == "include_context" || key == "dedup") {
            auto v = detail::parse_bool(value);
            if (!v) return err("must be a boolean");
            (key == "include_context" ? cfg.include_context : cfg.dedup) = *v;
        } else {
            return err("unknown key");
        }
        return std::nullopt;
    }
    if (section == "backend") return apply_backend_kv(cfg.backend, section, key, value);
    if (section.rfind("backend.", 0) == 0) {
        std::string stage = section.substr(8);
        if (stage_rank(stage) < 1 || stage == "compose")  // only model-calling stages
            return ConfigError{section, "no per-stage backend for '" + stage +
                                            "'; valid: generate, qc, distract, export"};
        BackendSettings probe = cfg.backend;  // validate the value eagerly
        if (auto e = apply_backend_kv(probe, section, key, value)) return e;
        cfg.backend_overrides[stage].emplace_back(key, value);
        return std::nullopt;
    }
    return ConfigError{section, "unknown section"};
}

// INI-style text: [section] headers, key = value lines, # or ; comments.
inline std::vector<ConfigError> load_config_text(PipelineConfig& cfg, const std::string& text) {
    std::vector<ConfigError> errors;
    std::string section;
    std::size_t line_no = 0;
    for (auto& raw_line : split(text, '\n')) {
        ++line_no;
        std::string line = trim(raw_line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                errors.push_back({"line " + std::to_string(line_no), "unterminated section header"});
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back({"line " + std::to_string(line_no), "expected key = value"});
            continue;
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (section.empty()) {
            errors.push_back({"line " + std::to_string(line_no), "key outside any [section]"});
            continue;
        }
        if (auto e = apply_setting(cfg, section, key, value)) errors.push_back(*e);
    }
    return errors;
}

// Environment defaults, below file and CLI in precedence: call before
// loading the file.
inline void apply_env_settings(PipelineConfig& cfg) {
    if (const char* v = std::getenv("DSCORE_API_BASE")) cfg.backend.base_url = v;
    if (const char* v = std::getenv("DSCORE_API_KEY")) cfg.backend.api_key = v;
    if (const char* v = std::getenv("DSCORE_MODEL")) cfg.backend.model = v;
}

inline std::vector<ConfigError> validate_config(const PipelineConfig& cfg) {
    std::vector<ConfigError> errors;
    if (cfg.max_tokens < 16) errors.push_back({"ingest.max_tokens", "must be >= 16"});
    if (cfg.n_explicit + cfg.n_implicit < 1)
        errors.push_back({"generate.n_explicit", "n_explicit + n_implicit must be >= 1"});
    if (cfg.gen_parse_retries < 1)
        errors.push_back({"generate.parse_retries", "must be an integer >= 1"});

    std::vector<std::string> seen;
    for (const auto& s : cfg.stages) {
        if (!is_stage_name(s)) {
            errors.push_back({"run.stages",
                              "unknown stage '" + s + "'; valid stages: " + valid_stage_list()});
            continue;
        }
        if (std::find(seen.begin(), seen.end(), s) != seen.end())
            errors.push_back({"run.stages", "stage '" + s + "' listed twice"});
        seen.push_back(s);
    }
    for (std::size_t i = 1; i < seen.size(); ++i)
        if (stage_rank(seen[i]) <= stage_rank(seen[i - 1]))
            errors.push_back({"run.stages", "stages must appear in pipeline order: ingest, "
                                            "generate, qc, distract, compose, export"});
    if (cfg.stages.empty()) errors.push_back({"run.stages", "at least one stage required"});

    if (cfg.stage_enabled("compose") && cfg.implicit_fraction == 0.0 &&
        cfg.explicit_fraction == 0.0)
        errors.push_back(
            {"compose.implicit_fraction", "implicit_fraction and explicit_fraction are both 0"});
    if (cfg.stage_enabled("export") && cfg.format == ExportFormat::Mcq &&
        cfg.stage_enabled("compose"))
        errors.push_back({"export.format", "mcq export reads stage3 items; disable the compose "
                                           "stage or choose a qa format"});
    if (cfg.stage_enabled("export") && cfg.format == ExportFormat::Mcq &&
        !cfg.stage_enabled("distract") && cfg.stage_enabled("generate"))
        errors.push_back({"export.format", "mcq requires the distract stage"});
    if (cfg.backend.kind == "scripted" && cfg.backend.script.empty())
        errors.push_back({"backend.script", "scripted backend requires a fixture path"});
    return errors;
}

// Canonical serialization: every resolved field in a fixed order, so the
// hash pins exactly what a run used regardless of how values arrived.
// api_key is deliberately left out; secrets never reach manifests, and
// rotating one must not invalidate resumable state.
inline Json canonical_config_json(const PipelineConfig& cfg) {
    Json overrides = Json::object();
    for (const auto& [stage, kvs] : cfg.backend_overrides) {
        auto sorted = kvs;
        std::sort(sorted.begin(), sorted.end());
        Json sec = Json::object();
        for (const auto& [k, v] : sorted) sec[k] = v;  // later duplicates win, as applied
        overrides[stage] = sec;
    }
    // out_dir is deliberately absent: it decides where artifacts land, not
    // what they contain, and identical runs into different directories must
    // produce identical bytes (config_hash is embedded in the export manifest).
    return Json{
        {"run", Json{{"run_id", cfg.run_id},
                     {"seed", cfg.seed},
                     {"stages", cfg.stages}}},
        {"ingest", Json{{"inputs", cfg.inputs},
                        {"max_tokens", cfg.max_tokens},
                        {"format", cfg.corpus_format},
                        {"text_field", cfg.text_field},
                        {"segmenter", cfg.segmenter}}},
        {"generate", Json{{"n_explicit", cfg.n_explicit},
                          {"n_implicit", cfg.n_implicit},
                          {"parse_retries", cfg.gen_parse_retries}}},
        {"qc",
         Json{{"parse_retries", cfg.qc_parse_retries}, {"floor_attempts", cfg.floor_attempts}}},
        {"distract", Json{{"appraise", cfg.appraise},
                          {"appraisal_rounds", cfg.appraisal_rounds},
                          {"parse_retries", cfg.distract_parse_retries}}},
        {"compose", Json{{"implicit_fraction", cfg.implicit_fraction},
                         {"explicit_fraction", cfg.explicit_fraction},
                         {"shuffle", cfg.shuffle},
                         {"per_segment", cfg.per_segment}}},
        {"export", Json{{"format", to_string(cfg.format)},
                        {"include_context", cfg.include_context},
                        {"dedup", cfg.dedup}}},
        {"backend", Json{{"kind", cfg.backend.kind},
                         {"base_url", cfg.backend.base_url},
                         {"model", cfg.backend.model},
                         {"max_parallel", cfg.backend.max_parallel},
                         {"timeout_s", cfg.backend.timeout_s},
                         {"retry_attempts", cfg.backend.retry_attempts},
                         {"backoff_ms", cfg.backend.backoff_ms},
                         {"mock_seed", cfg.backend.mock_seed},
                         {"script", cfg.backend.script}}},
        {"backend_overrides", overrides}};
}

inline std::string config_hash(const PipelineConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_config_json(cfg).dump())));
    return buf;
}

// Per-stage backend settings: the base section with that stage's overrides
// applied on top.
inline BackendSettings resolve_backend(const PipelineConfig& cfg, const std::string& stage) {
    BackendSettings b = cfg.backend;
    auto at = cfg.backend_overrides.find(stage);
    if (at != cfg.backend_overrides.end())
        for (const auto& [k, v] : at->second)
            apply_backend_kv(b, "backend." + stage, k, v);  // validated at load time
    return b;
}

}  // namespace dscore
