#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dscore/backend.hpp"
#include "dscore/compose.hpp"
#include "dscore/config.hpp"
#include "dscore/counterfactual.hpp"
#include "dscore/exporter.hpp"
#include "dscore/generation.hpp"
#include "dscore/http_backend.hpp"
#include "dscore/ingest.hpp"
#include "dscore/jsonl.hpp"
#include "dscore/manifest.hpp"
#include "dscore/mock_backend.hpp"
#include "dscore/quality_control.hpp"

namespace dscore {

// Exit codes shared by run() and the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitStageFailure = 2;
inline constexpr int kExitPartial = 3;

struct RunPaths {
    std::filesystem::path dir;

    std::string segments() const { return (dir / "segments.jsonl").string(); }
    std::string stage1() const { return (dir / "stage1.jsonl").string(); }
    std::string stage2() const { return (dir / "stage2.jsonl").string(); }
    std::string verdicts() const { return (dir / "verdicts.jsonl").string(); }
    std::string stage3() const { return (dir / "stage3.jsonl").string(); }
    std::string qa_only() const { return (dir / "stage3_qa_only.jsonl").string(); }
    std::string train() const { return (dir / "train.jsonl").string(); }
    std::string report() const { return (dir / "report.json").string(); }
    std::string sft() const { return (dir / "sft.jsonl").string(); }
    std::string quarantine() const { return (dir / "quarantine.jsonl").string(); }
    std::string export_manifest() const { return (dir / "export_manifest.json").string(); }
    std::string manifest() const { return (dir / "manifest.json").string(); }
    std::string ledger() const { return (dir / "ledger.json").string(); }
};

inline std::shared_ptr<Backend> make_transport(const BackendSettings& s) {
    if (s.kind == "mock") return std::make_shared<GenerativeMockBackend>(s.mock_seed);
    if (s.kind == "scripted")
        return std::make_shared<ScriptedMockBackend>(ScriptedMockBackend::from_file(s.script));
    BackendConfig cfg;
    cfg.base_url = s.base_url;
    return std::make_shared<HttpBackend>(cfg);
}

inline BackendConfig to_backend_config(const BackendSettings& s) {
    BackendConfig cfg;
    cfg.base_url = s.base_url;
    cfg.api_key = s.api_key;
    cfg.model_name = s.model;
    cfg.max_parallel = s.max_parallel;
    cfg.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(s.timeout_s * 1000.0));
    cfg.retry.max_attempts = s.retry_attempts;
    cfg.retry.backoff_base =
        std::chrono::milliseconds(static_cast<std::int64_t>(s.backoff_ms));
    return cfg;
}

inline std::unique_ptr<BackendClient> make_stage_client(const PipelineConfig& cfg,
                                                        const std::string& stage,
                                                        std::shared_ptr<RunLedger> ledger) {
    BackendSettings s = resolve_backend(cfg, stage);
    return std::make_unique<BackendClient>(make_transport(s), to_backend_config(s),
                                           std::move(ledger));
}

struct RunOptions {
    std::string stop_after;  // test hook: halt cleanly after this stage completes
};

struct RunResult {
    int exit_code = kExitOk;
    RunManifest manifest;
    std::vector<std::string> errors;
    std::shared_ptr<RunLedger> ledger;
};

namespace detail {

inline std::vector<std::string> read_lines(const std::string& path) {
    std::vector<std::string> lines = split(read_text_file(path), '\n');
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::string body;
    for (const auto& l : lines) {
        body += l;
        body += '\n';
    }
    write_text_file(path, body);
}

inline const char* counter_prefix(const std::string& stage) {
    if (stage == "ingest") return "ingest.";
    if (stage == "generate") return "generation.";
    if (stage == "qc") return "qc.";
    if (stage == "distract") return "distract.";
    if (stage == "compose") return "compose.";
    return "export.";
}

inline Json counters_for(const RunLedger& ledger, const std::string& stage) {
    Json out = Json::object();
    std::string prefix = counter_prefix(stage);
    for (const auto& [key, value] : ledger.counters())
        if (key.rfind(prefix, 0) == 0) out[key] = value;
    return out;
}

inline std::vector<std::string> stage_artifacts(const RunPaths& p, const std::string& stage) {
    if (stage == "ingest") return {p.segments()};
    if (stage == "generate") return {p.stage1()};
    if (stage == "qc") return {p.stage2(), p.verdicts()};
    if (stage == "distract") return {p.stage3(), p.qa_only()};
    if (stage == "compose") return {p.train(), p.report()};
    return {p.sft(), p.quarantine(), p.export_manifest()};
}

inline bool artifacts_present(const RunPaths& p, const std::string& stage) {
    for (const auto& f : stage_artifacts(p, stage))
        if (!std::filesystem::exists(f)) return false;
    return true;
}

}  // namespace detail

inline void run_ingest_stage(const PipelineConfig& cfg, const RunPaths& paths,
                             RunLedger* ledger) {
    LoadOptions lopt;
    lopt.format =
        cfg.corpus_format == "jsonl" ? CorpusFormat::JsonlWithTextField : CorpusFormat::PlainText;
    lopt.text_field = cfg.text_field;
    auto loaded = load_corpus(cfg.inputs, lopt);

    std::vector<Segment> segments;
    for (const auto& doc : loaded.documents) {
        std::vector<Segment> segs;
        if (cfg.segmenter == "structural") {
            StructuralOptions sopt;
            sopt.max_tokens = cfg.max_tokens;
            segs = segment_structural(doc, sopt);
        } else {
            segs = segment_by_budget(doc, cfg.max_tokens);
        }
        segments.insert(segments.end(), segs.begin(), segs.end());
    }
    write_jsonl(paths.segments(), segments);
    if (ledger) {
        ledger->add("ingest.documents", static_cast<std::int64_t>(loaded.documents.size()));
        ledger->add("ingest.segments", static_cast<std::int64_t>(segments.size()));
    }
}

inline void run_generate_stage(const PipelineConfig& cfg, const RunPaths& paths,
                               std::shared_ptr<RunLedger> ledger) {
    auto segments = load_segments(paths.segments());
    auto client = make_stage_client(cfg, "generate", ledger);
    GenerationSpec spec;
    spec.n_explicit = cfg.n_explicit;
    spec.n_implicit = cfg.n_implicit;
    GenerationOptions opts;
    opts.parse_retries = cfg.gen_parse_retries;
    auto res = generate_stage(segments, spec, *client, ledger.get(), opts);
    write_jsonl(paths.stage1(), res.pairs);
}

inline void run_qc_stage(const PipelineConfig& cfg, const RunPaths& paths,
                         std::shared_ptr<RunLedger> ledger) {
    auto segments = load_segments(paths.segments());
    auto pairs = load_qa_pairs(paths.stage1());
    auto client = make_stage_client(cfg, "qc", ledger);
    QCOptions opts;
    opts.parse_retries = cfg.qc_parse_retries;
    opts.floor_attempts = cfg.floor_attempts;
    opts.regen.parse_retries = cfg.gen_parse_retries;
    auto res = qc_stage(segments, pairs, *client, ledger.get(), opts);
    write_jsonl(paths.stage2(), res.pairs);
    write_jsonl(paths.verdicts(), res.verdicts);
}

inline void run_distract_stage(const PipelineConfig& cfg, const RunPaths& paths,
                               std::shared_ptr<RunLedger> ledger) {
    auto segments = load_segments(paths.segments());
    auto pairs = load_qa_pairs(paths.stage2());
    auto client = make_stage_client(cfg, "distract", ledger);
    CounterfactualOptions opts;
    opts.parse_retries = cfg.distract_parse_retries;
    opts.appraisal_rounds = cfg.appraisal_rounds;
    opts.appraise = cfg.appraise;
    auto res = distract_stage(segments, pairs, *client, cfg.seed, ledger.get(), opts);
    write_jsonl(paths.stage3(), res.items);

    JsonlWriter qa_only(paths.qa_only());
    for (const auto& f : res.qa_only)
        qa_only.write(Json{{"qa_id", f.qa_id}, {"message", f.message}});
    qa_only.flush();
}

inline void run_compose_stage(const PipelineConfig& cfg, const RunPaths& paths,
                              RunLedger* ledger) {
    auto pool = load_qa_pairs(paths.stage2());
    CompositionConfig ccfg;
    ccfg.implicit_fraction = cfg.implicit_fraction;
    ccfg.explicit_fraction = cfg.explicit_fraction;
    ccfg.seed = cfg.seed;
    ccfg.shuffle = cfg.shuffle;
    ccfg.per_segment = cfg.per_segment;
    auto mixed = mix(pool, ccfg);
    if (!mixed.has_value()) throw std::runtime_error("compose: " + mixed.error());
    write_jsonl(paths.train(), mixed.value().dataset);
    write_file_atomic(paths.report(), to_json(mixed.value().report).dump(2) + "\n");
    if (ledger) ledger->add("compose.sampled", mixed.value().report.n_total);
}

inline void run_export_stage(const PipelineConfig& cfg, const RunPaths& paths,
                             const std::string& hash, const Json& template_versions,
                             const Json& seeds, std::shared_ptr<RunLedger> ledger) {
    ExportOptions opts;
    opts.format = cfg.format;
    opts.include_context = cfg.include_context;
    opts.dedup = cfg.dedup;
    opts.config_hash = hash;
    opts.template_versions = template_versions;
    opts.seeds = seeds;

    std::string source;
    if (cfg.format == ExportFormat::Mcq)
        source = paths.stage3();
    else if (cfg.stage_enabled("compose"))
        source = paths.train();
    else
        source = paths.stage2();
    auto lines = detail::read_lines(source);

    std::map<std::string, std::string> segment_text;
    const std::map<std::string, std::string>* segment_ptr = nullptr;
    if (opts.include_context) {
        for (const auto& s : load_segments(paths.segments())) segment_text[s.segment_id] = s.text;
        segment_ptr = &segment_text;
    }

    auto client = make_stage_client(cfg, "export", ledger);
    auto res = export_lines(lines, opts, client.get(), segment_ptr, ledger.get());
    detail::write_lines(paths.sft(), res.lines);
    detail::write_lines(paths.quarantine(), res.quarantined);
    write_file_atomic(paths.export_manifest(), res.manifest.dump(2) + "\n");
}

// Executes the enabled stages in pipeline order, checkpointing the manifest
// at every stage boundary. A rerun against the same out_dir with an
// unchanged config hash skips completed stages and continues from the first
// pending one; any config change restarts the run from scratch.
inline RunResult run(const PipelineConfig& cfg, const RunOptions& run_opts = {}) {
    RunResult result;
    result.ledger = std::make_shared<RunLedger>();

    auto config_errors = validate_config(cfg);
    if (cfg.stage_enabled("ingest") && cfg.inputs.empty())
        config_errors.push_back({"ingest.inputs", "at least one input path required"});
    if (!config_errors.empty()) {
        for (const auto& e : config_errors) result.errors.push_back(to_string(e));
        result.exit_code = kExitConfigError;
        return result;
    }
    if (!run_opts.stop_after.empty() && !cfg.stage_enabled(run_opts.stop_after)) {
        result.errors.push_back("stop_after names a stage that is not enabled: " +
                                run_opts.stop_after);
        result.exit_code = kExitConfigError;
        return result;
    }

    const std::string hash = config_hash(cfg);
    RunPaths paths{cfg.out_dir};
    std::filesystem::create_directories(paths.dir);

    Json seeds{{"run_seed", cfg.seed}};
    if (cfg.backend.kind == "mock") seeds["mock_seed"] = cfg.backend.mock_seed;
    Json templates{{"prompts", kPromptTemplateVersion}};

    bool resuming = false;
    if (auto prior = load_manifest(paths.manifest());
        prior && prior->config_hash == hash && prior->run_id == cfg.run_id) {
        result.manifest = *prior;
        resuming = true;
    } else {
        result.manifest.run_id = cfg.run_id;
        result.manifest.config_hash = hash;
        result.manifest.seeds = seeds;
        result.manifest.template_versions = templates;
        for (const auto& stage : cfg.stages) result.manifest.stages.emplace_back(stage, StageRecord{});
    }

    for (const auto& stage : cfg.stages) {
        StageRecord* rec = result.manifest.find(stage);
        if (rec == nullptr) {
            result.manifest.stages.emplace_back(stage, StageRecord{});
            rec = &result.manifest.stages.back().second;
        }
        if (resuming && rec->status == StageStatus::Done &&
            detail::artifacts_present(paths, stage)) {
            result.ledger->note("resume: skipped completed stage " + stage);
            continue;
        }

        auto started = std::chrono::steady_clock::now();
        try {
            if (stage == "ingest")
                run_ingest_stage(cfg, paths, result.ledger.get());
            else if (stage == "generate")
                run_generate_stage(cfg, paths, result.ledger);
            else if (stage == "qc")
                run_qc_stage(cfg, paths, result.ledger);
            else if (stage == "distract")
                run_distract_stage(cfg, paths, result.ledger);
            else if (stage == "compose")
                run_compose_stage(cfg, paths, result.ledger.get());
            else
                run_export_stage(cfg, paths, hash, templates, seeds, result.ledger);
        } catch (const std::exception& e) {
            rec->status = StageStatus::Failed;
            rec->error = e.what();
            rec->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                         started)
                               .count();
            save_manifest(result.manifest, paths.manifest());
            result.errors.push_back(stage + ": " + e.what());
            result.exit_code = kExitStageFailure;
            return result;
        }
        rec->status = StageStatus::Done;
        rec->error.clear();
        rec->seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        rec->counters = detail::counters_for(*result.ledger, stage);
        save_manifest(result.manifest, paths.manifest());
        if (run_opts.stop_after == stage) break;
    }

    write_file_atomic(paths.ledger(), result.ledger->to_json().dump(2) + "\n");

    static const char* kPartialCounters[] = {
        "generation.failed_segments", "generation.shortfall_pairs", "qc.floor_unsatisfied",
        "qc.backfill_failed",         "distract.exhausted",         "export.quarantined"};
    for (const char* key : kPartialCounters) {
        if (result.ledger->get(key) > 0) {
            result.exit_code = kExitPartial;
            break;
        }
    }
    return result;
}

}  // namespace dscore
