// Command-line front end for the dataset pipeline: standalone stage
// commands, scoring/audit utilities, and the all-in-one `run` driver.

#include <fnmatch.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dscore/http_embedder.hpp"
#include "dscore/metrics.hpp"
#include "dscore/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dscore;

namespace {

// Shell-style expansion for --input arguments: literal paths pass through,
// patterns match within their parent directory (sorted for determinism).
std::vector<std::string> expand_inputs(const std::vector<std::string>& patterns) {
    std::vector<std::string> out;
    for (const auto& pattern : patterns) {
        if (pattern.find_first_of("*?[") == std::string::npos) {
            out.push_back(pattern);
            continue;
        }
        fs::path p(pattern);
        fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
        std::string name = p.filename().string();
        std::vector<std::string> matches;
        std::error_code ec;
        for (const auto& entry : fs::directory_iterator(dir, ec)) {
            if (!entry.is_regular_file()) continue;
            std::string candidate = entry.path().filename().string();
            if (fnmatch(name.c_str(), candidate.c_str(), 0) == 0)
                matches.push_back(entry.path().string());
        }
        std::sort(matches.begin(), matches.end());
        if (matches.empty()) {
            std::cerr << "warning: pattern matched no files: " << pattern << "\n";
        }
        out.insert(out.end(), matches.begin(), matches.end());
    }
    return out;
}

// Backend selection shared by every model-calling subcommand. Defaults come
// from BackendSettings, then DSCORE_* environment variables, then flags.
struct BackendFlags {
    BackendSettings settings;

    void attach(CLI::App* cmd) {
        if (const char* v = std::getenv("DSCORE_API_BASE")) settings.base_url = v;
        if (const char* v = std::getenv("DSCORE_API_KEY")) settings.api_key = v;
        if (const char* v = std::getenv("DSCORE_MODEL")) settings.model = v;

        cmd->add_option("--backend", settings.kind, "Transport: http, mock, or scripted")
            ->check(CLI::IsMember({"http", "mock", "scripted"}))
            ->capture_default_str();
        cmd->add_option("--api-base", settings.base_url,
                        "Chat-completions base URL (env DSCORE_API_BASE)")
            ->capture_default_str();
        cmd->add_option("--api-key", settings.api_key, "Bearer token (env DSCORE_API_KEY)");
        cmd->add_option("--model", settings.model, "Model name (env DSCORE_MODEL)");
        cmd->add_option("--max-parallel", settings.max_parallel, "In-flight request cap")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--timeout", settings.timeout_s, "Request timeout, seconds")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--retries", settings.retry_attempts,
                        "Attempts per request, counting the first")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--mock-seed", settings.mock_seed, "Seed for --backend mock");
        cmd->add_option("--script", settings.script, "Reply fixture for --backend scripted");
    }

    std::unique_ptr<BackendClient> client(std::shared_ptr<RunLedger> ledger) const {
        return std::make_unique<BackendClient>(make_transport(settings),
                                               to_backend_config(settings), std::move(ledger));
    }
};

void print_counters(const RunLedger& ledger) {
    for (const auto& [key, value] : ledger.counters())
        std::cerr << "  " << key << " = " << value << "\n";
}

// Reads prediction/reference lines: bare JSON strings, or objects holding
// the text under `field`.
std::vector<std::string> load_score_lines(const std::string& path, const std::string& field) {
    std::vector<std::string> out;
    auto diags = read_jsonl(path, [&](Json&& j, std::size_t line_no) {
        if (j.is_string()) {
            out.push_back(j.get<std::string>());
            return;
        }
        if (j.is_object() && j.contains(field) && j[field].is_string()) {
            out.push_back(j[field].get<std::string>());
            return;
        }
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": expected a JSON string or an object with a \"" + field +
                                 "\" string field");
    });
    if (!diags.empty()) throw std::runtime_error(to_string(diags.front()));
    return out;
}

int exit_code_for(const RunLedger& ledger) {
    static const char* kPartialCounters[] = {
        "generation.failed_segments", "generation.shortfall_pairs", "qc.floor_unsatisfied",
        "qc.backfill_failed",         "distract.exhausted",         "export.quarantined"};
    for (const char* key : kPartialCounters)
        if (ledger.get(key) > 0) return kExitPartial;
    return kExitOk;
}

int cmd_ingest(const std::vector<std::string>& inputs, const std::string& format,
               const std::string& text_field, int max_tokens, const std::string& segmenter,
               const std::string& out) {
    LoadOptions opt;
    opt.format = format == "jsonl" ? CorpusFormat::JsonlWithTextField : CorpusFormat::PlainText;
    opt.text_field = text_field;
    auto files = expand_inputs(inputs);
    if (files.empty()) {
        std::cerr << "error: no input files\n";
        return kExitConfigError;
    }
    auto loaded = load_corpus(files, opt);

    std::vector<Segment> segments;
    for (const auto& doc : loaded.documents) {
        std::vector<Segment> segs;
        if (segmenter == "structural") {
            StructuralOptions sopt;
            sopt.max_tokens = max_tokens;
            segs = segment_structural(doc, sopt);
        } else {
            segs = segment_by_budget(doc, max_tokens);
        }
        segments.insert(segments.end(), segs.begin(), segs.end());
    }
    write_jsonl(out, segments);
    std::cerr << "ingest: " << loaded.documents.size() << " documents, " << segments.size()
              << " segments -> " << out << "\n";
    return kExitOk;
}

int cmd_generate(const BackendFlags& be, const std::string& segments_path, int n_explicit,
                 int n_implicit, int parse_retries, const std::string& out) {
    auto ledger = std::make_shared<RunLedger>();
    auto segments = load_segments(segments_path);
    auto client = be.client(ledger);
    GenerationSpec spec;
    spec.n_explicit = n_explicit;
    spec.n_implicit = n_implicit;
    GenerationOptions opts;
    opts.parse_retries = parse_retries;
    auto res = generate_stage(segments, spec, *client, ledger.get(), opts);
    write_jsonl(out, res.pairs);
    std::cerr << "generate: " << res.pairs.size() << " pairs from " << segments.size()
              << " segments -> " << out << "\n";
    for (const auto& f : res.failures)
        std::cerr << "  failed segment " << f.segment_id << ": " << f.message << "\n";
    print_counters(*ledger);
    if (res.pairs.empty() && !segments.empty()) return kExitStageFailure;
    return exit_code_for(*ledger);
}

int cmd_qc(const BackendFlags& be, const std::string& stage1, const std::string& segments_path,
           const std::string& out, const std::string& verdicts_out, int parse_retries,
           int floor_attempts) {
    auto ledger = std::make_shared<RunLedger>();
    auto segments = load_segments(segments_path);
    auto pairs = load_qa_pairs(stage1);
    auto client = be.client(ledger);
    QCOptions opts;
    opts.parse_retries = parse_retries;
    opts.floor_attempts = floor_attempts;
    auto res = qc_stage(segments, pairs, *client, ledger.get(), opts);
    write_jsonl(out, res.pairs);
    if (!verdicts_out.empty()) write_jsonl(verdicts_out, res.verdicts);
    std::cerr << "qc: " << pairs.size() << " pairs in, " << res.pairs.size() << " out -> " << out
              << "\n";
    for (const auto& f : res.excluded_segments)
        std::cerr << "  segment without explicit pair: " << f.segment_id << " (" << f.message
                  << ")\n";
    print_counters(*ledger);
    return exit_code_for(*ledger);
}

int cmd_distract(const BackendFlags& be, const std::string& stage2,
                 const std::string& segments_path, std::uint64_t seed, bool no_appraisal,
                 int rounds, const std::string& out, const std::string& qa_only_out) {
    auto ledger = std::make_shared<RunLedger>();
    auto segments = load_segments(segments_path);
    auto pairs = load_qa_pairs(stage2);
    auto client = be.client(ledger);
    CounterfactualOptions opts;
    opts.appraise = !no_appraisal;
    opts.appraisal_rounds = rounds;
    auto res = distract_stage(segments, pairs, *client, seed, ledger.get(), opts);
    write_jsonl(out, res.items);
    if (!qa_only_out.empty()) {
        JsonlWriter w(qa_only_out);
        for (const auto& f : res.qa_only) w.write(Json{{"qa_id", f.qa_id}, {"message", f.message}});
        w.flush();
    }
    std::cerr << "distract: " << res.items.size() << " items, " << res.qa_only.size()
              << " qa-only fallbacks -> " << out << "\n";
    print_counters(*ledger);
    return exit_code_for(*ledger);
}

int cmd_compose(const std::string& pool_path, double implicit_frac, double explicit_frac,
                std::uint64_t seed, bool shuffle, bool per_segment, const std::string& out,
                const std::string& report_out) {
    auto pool = load_qa_pairs(pool_path);
    CompositionConfig cfg;
    cfg.implicit_fraction = implicit_frac;
    cfg.explicit_fraction = explicit_frac;
    cfg.seed = seed;
    cfg.shuffle = shuffle;
    cfg.per_segment = per_segment;
    auto mixed = mix(pool, cfg);
    if (!mixed.has_value()) {
        std::cerr << "error: " << mixed.error() << "\n";
        return kExitStageFailure;
    }
    write_jsonl(out, mixed.value().dataset);
    if (!report_out.empty())
        write_file_atomic(report_out, to_json(mixed.value().report).dump(2) + "\n");
    const auto& rep = mixed.value().report;
    std::cerr << "compose: " << rep.n_implicit_sampled << " implicit + " << rep.n_explicit_sampled
              << " explicit = " << rep.n_total << " -> " << out << "\n";
    return kExitOk;
}

int cmd_export(const BackendFlags& be, const std::string& in, const std::string& format_name,
               bool include_context, const std::string& segments_path, bool no_dedup,
               bool llm_repair, const std::string& out, const std::string& quarantine_out,
               const std::string& manifest_out) {
    auto ledger = std::make_shared<RunLedger>();
    ExportOptions opts;
    opts.format = export_format_from_string(format_name);
    opts.include_context = include_context;
    opts.dedup = !no_dedup;

    std::map<std::string, std::string> segment_text;
    const std::map<std::string, std::string>* segment_ptr = nullptr;
    if (include_context) {
        if (segments_path.empty()) {
            std::cerr << "error: --include-context requires --segments\n";
            return kExitConfigError;
        }
        for (const auto& s : load_segments(segments_path)) segment_text[s.segment_id] = s.text;
        segment_ptr = &segment_text;
    }

    std::unique_ptr<BackendClient> client;
    if (llm_repair) client = be.client(ledger);

    auto lines = detail::read_lines(in);
    auto res = export_lines(lines, opts, client.get(), segment_ptr, ledger.get());
    detail::write_lines(out, res.lines);
    if (!quarantine_out.empty()) detail::write_lines(quarantine_out, res.quarantined);
    if (!manifest_out.empty()) write_file_atomic(manifest_out, res.manifest.dump(2) + "\n");
    std::cerr << "export: " << res.n_exported << " exported, " << res.n_deduped << " deduped, "
              << res.n_quarantined << " quarantined of " << res.n_input << " -> " << out << "\n";
    print_counters(*ledger);
    return exit_code_for(*ledger);
}

int cmd_score(const std::string& preds_path, const std::string& refs_path,
              const std::string& pred_field, const std::string& ref_field,
              const std::string& embed_endpoint, const std::string& embed_model,
              const std::string& api_key, const std::string& out) {
    auto preds = load_score_lines(preds_path, pred_field);
    auto golds = load_score_lines(refs_path, ref_field);
    if (preds.size() != golds.size()) {
        std::cerr << "error: " << preds.size() << " predictions vs " << golds.size()
                  << " references\n";
        return kExitConfigError;
    }

    std::unique_ptr<HttpEmbedder> embedder;
    if (!embed_endpoint.empty()) embedder = std::make_unique<HttpEmbedder>(
            embed_endpoint, embed_model, api_key);

    auto report = score_corpus(preds, golds, embedder.get());
    if (!embed_endpoint.empty() && !report.semsim.has_value())
        std::cerr << "warning: embedding endpoint produced no usable vectors; semsim omitted\n";

    Json j = to_json(report);
    if (!out.empty()) write_file_atomic(out, j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_audit(const std::string& mcq_path, const std::string& out) {
    auto items = load_mcq_items(mcq_path);
    if (items.empty()) {
        std::cerr << "error: no items in " << mcq_path << "\n";
        return kExitConfigError;
    }
    auto audit = position_bias_audit(items);
    Json j = to_json(audit);
    j["n"] = items.size();
    if (!out.empty()) write_file_atomic(out, j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& sets,
            const std::vector<std::string>& inputs, const std::string& out_dir,
            const std::string& stop_after) {
    PipelineConfig cfg;
    apply_env_settings(cfg);

    std::vector<ConfigError> errors;
    if (!config_path.empty()) {
        std::string text;
        try {
            text = read_text_file(config_path);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitConfigError;
        }
        errors = load_config_text(cfg, text);
    }
    for (const auto& s : sets) {
        auto eq = s.find('=');
        auto dot = s.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
            errors.push_back({"--set " + s, "expected section.key=value"});
            continue;
        }
        if (auto e = apply_setting(cfg, s.substr(0, dot), s.substr(dot + 1, eq - dot - 1),
                                   s.substr(eq + 1)))
            errors.push_back(*e);
    }
    if (!inputs.empty()) cfg.inputs = expand_inputs(inputs);
    if (!out_dir.empty()) cfg.out_dir = out_dir;

    if (!errors.empty()) {
        for (const auto& e : errors) std::cerr << "error: " << to_string(e) << "\n";
        return kExitConfigError;
    }

    RunOptions opts;
    opts.stop_after = stop_after;
    auto result = run(cfg, opts);
    for (const auto& e : result.errors) std::cerr << "error: " << e << "\n";
    for (const auto& [name, rec] : result.manifest.stages)
        std::cerr << "  " << name << ": " << to_string(rec.status) << "\n";
    if (result.ledger) print_counters(*result.ledger);
    if (result.exit_code == kExitOk)
        std::cerr << "run complete: " << cfg.out_dir << " (config " << result.manifest.config_hash
                  << ")\n";
    return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Text corpus to QA-CoT / multiple-choice dataset pipeline"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Split documents into token-budgeted segments");
    std::vector<std::string> in_inputs;
    std::string in_format = "plain", in_field = "text", in_segmenter = "budget";
    std::string in_out = "segments.jsonl";
    int in_max_tokens = 200;
    ingest->add_option("--input", in_inputs, "Input files or globs")->required();
    ingest->add_option("--format", in_format, "Corpus format")
        ->check(CLI::IsMember({"plain", "text", "jsonl"}));
    ingest->add_option("--text-field", in_field, "JSON field holding text (jsonl format)");
    ingest->add_option("--max-tokens", in_max_tokens, "Per-segment token budget")
        ->capture_default_str();
    ingest->add_option("--segmenter", in_segmenter, "Segmentation strategy")
        ->check(CLI::IsMember({"budget", "structural"}));
    ingest->add_option("--out", in_out, "Output segments file")->capture_default_str();

    // generate
    auto* generate = app.add_subcommand("generate", "Stage 1: QA pairs with reasoning traces");
    BackendFlags gen_be;
    gen_be.attach(generate);
    std::string gen_segments, gen_out = "stage1.jsonl";
    int gen_ne = 3, gen_ni = 3, gen_retries = 3;
    generate->add_option("--segments", gen_segments, "Segments file")->required();
    generate->add_option("--n-explicit", gen_ne, "Explicit pairs per segment")
        ->capture_default_str();
    generate->add_option("--n-implicit", gen_ni, "Implicit pairs per segment")
        ->capture_default_str();
    generate->add_option("--parse-retries", gen_retries, "Reply parse attempts")
        ->capture_default_str();
    generate->add_option("--out", gen_out, "Output pairs file")->capture_default_str();

    // qc
    auto* qc = app.add_subcommand("qc", "Stage 2: grounding checks and adjudication");
    BackendFlags qc_be;
    qc_be.attach(qc);
    std::string qc_stage1, qc_segments, qc_out = "stage2.jsonl", qc_verdicts = "verdicts.jsonl";
    int qc_retries = 3, qc_floor = 3;
    qc->add_option("--stage1", qc_stage1, "Stage 1 pairs file")->required();
    qc->add_option("--segments", qc_segments, "Segments file")->required();
    qc->add_option("--out", qc_out, "Kept pairs file")->capture_default_str();
    qc->add_option("--verdicts", qc_verdicts, "Verdicts file")->capture_default_str();
    qc->add_option("--parse-retries", qc_retries, "Adjudication parse attempts")
        ->capture_default_str();
    qc->add_option("--floor-attempts", qc_floor, "Regeneration attempts per segment")
        ->capture_default_str();

    // distract
    auto* distract = app.add_subcommand("distract", "Stage 3: four-option items");
    BackendFlags dis_be;
    dis_be.attach(distract);
    std::string dis_stage2, dis_segments, dis_out = "stage3.jsonl", dis_qa_only;
    std::uint64_t dis_seed = 7;
    bool dis_no_appraisal = false;
    int dis_rounds = 2;
    distract->add_option("--stage2", dis_stage2, "Kept pairs file")->required();
    distract->add_option("--segments", dis_segments, "Segments file")->required();
    distract->add_option("--seed", dis_seed, "Run seed for option placement")
        ->capture_default_str();
    distract->add_flag("--no-appraisal", dis_no_appraisal,
                       "Accept generated distractors without the judge pass");
    distract->add_option("--appraisal-rounds", dis_rounds, "Appraise/replace cycles")
        ->capture_default_str();
    distract->add_option("--out", dis_out, "Output items file")->capture_default_str();
    distract->add_option("--qa-only", dis_qa_only, "Where to list pairs left without options");

    // compose
    auto* compose = app.add_subcommand("compose", "Ratio-controlled dataset mixing");
    std::string comp_pool, comp_out = "train.jsonl", comp_report;
    double comp_if = 1.0, comp_ef = 1.0;
    std::uint64_t comp_seed = 7;
    bool comp_shuffle = false, comp_per_segment = false;
    compose->add_option("--pool", comp_pool, "QA pool file")->required();
    compose->add_option("--implicit-frac", comp_if, "Implicit sampling fraction")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    compose->add_option("--explicit-frac", comp_ef, "Explicit sampling fraction")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    compose->add_option("--seed", comp_seed, "Sampling seed")->capture_default_str();
    compose->add_flag("--shuffle", comp_shuffle, "Shuffle output order (seeded)");
    compose->add_flag("--per-segment", comp_per_segment, "Stratify sampling within segments");
    compose->add_option("--out", comp_out, "Output dataset file")->capture_default_str();
    compose->add_option("--report", comp_report, "Composition report path");

    // export
    auto* exp = app.add_subcommand("export", "SFT-ready serialization with quarantine");
    BackendFlags exp_be;
    exp_be.attach(exp);
    std::string exp_in, exp_format = "qa_cot", exp_segments, exp_out = "sft.jsonl";
    std::string exp_quarantine = "quarantine.jsonl", exp_manifest;
    bool exp_context = false, exp_no_dedup = false, exp_llm_repair = false;
    exp->add_option("--in", exp_in, "Input dataset file")->required();
    exp->add_option("--format", exp_format, "qa_plain, qa_cot, or mcq")
        ->check(CLI::IsMember({"qa_plain", "qa_cot", "mcq"}))
        ->capture_default_str();
    exp->add_flag("--include-context", exp_context, "Copy segment text into each record");
    exp->add_option("--segments", exp_segments, "Segments file (for --include-context)");
    exp->add_flag("--no-dedup", exp_no_dedup, "Keep normalized duplicates");
    exp->add_flag("--llm-repair", exp_llm_repair,
                  "Send mechanically unrepairable records to the backend");
    exp->add_option("--out", exp_out, "Output file")->capture_default_str();
    exp->add_option("--quarantine", exp_quarantine, "Unrepairable records file")
        ->capture_default_str();
    exp->add_option("--manifest", exp_manifest, "Sidecar manifest path");

    // score
    auto* score = app.add_subcommand("score", "Reference metrics over prediction files");
    std::string sc_preds, sc_refs, sc_pred_field = "output", sc_ref_field = "output";
    std::string sc_embed, sc_embed_model = "nomic-embed-text", sc_api_key, sc_out;
    score->add_option("--preds", sc_preds, "Predictions (JSONL)")->required();
    score->add_option("--refs", sc_refs, "References (JSONL)")->required();
    score->add_option("--pred-field", sc_pred_field, "Field holding prediction text")
        ->capture_default_str();
    score->add_option("--ref-field", sc_ref_field, "Field holding reference text")
        ->capture_default_str();
    score->add_option("--embed-endpoint", sc_embed, "Embeddings base URL enabling semsim");
    score->add_option("--embed-model", sc_embed_model, "Embedding model name")
        ->capture_default_str();
    score->add_option("--api-key", sc_api_key, "Bearer token for the embedding endpoint");
    score->add_option("--out", sc_out, "Write the score report here too");

    // audit
    auto* audit = app.add_subcommand("audit", "Answer-position uniformity check");
    std::string au_mcq, au_out;
    audit->add_option("--mcq", au_mcq, "Stage 3 items file")->required();
    audit->add_option("--out", au_out, "Audit report path");

    // run
    auto* runc = app.add_subcommand("run", "Execute the configured pipeline end to end");
    std::string run_config, run_out_dir, run_stop_after;
    std::vector<std::string> run_sets, run_inputs;
    runc->add_option("--config", run_config, "INI-style config file");
    runc->add_option("--set", run_sets, "Override: section.key=value (repeatable)");
    runc->add_option("--input", run_inputs, "Input files or globs (overrides ingest.inputs)");
    runc->add_option("--out-dir", run_out_dir, "Artifact directory (overrides run.out_dir)");
    runc->add_option("--stop-after", run_stop_after, "Halt after this stage completes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (app.got_subcommand(ingest))
            return cmd_ingest(in_inputs, in_format, in_field, in_max_tokens, in_segmenter, in_out);
        if (app.got_subcommand(generate))
            return cmd_generate(gen_be, gen_segments, gen_ne, gen_ni, gen_retries, gen_out);
        if (app.got_subcommand(qc))
            return cmd_qc(qc_be, qc_stage1, qc_segments, qc_out, qc_verdicts, qc_retries, qc_floor);
        if (app.got_subcommand(distract))
            return cmd_distract(dis_be, dis_stage2, dis_segments, dis_seed, dis_no_appraisal,
                                dis_rounds, dis_out, dis_qa_only);
        if (app.got_subcommand(compose))
            return cmd_compose(comp_pool, comp_if, comp_ef, comp_seed, comp_shuffle,
                               comp_per_segment, comp_out, comp_report);
        if (app.got_subcommand(exp))
            return cmd_export(exp_be, exp_in, exp_format, exp_context, exp_segments, exp_no_dedup,
                              exp_llm_repair, exp_out, exp_quarantine, exp_manifest);
        if (app.got_subcommand(score))
            return cmd_score(sc_preds, sc_refs, sc_pred_field, sc_ref_field, sc_embed,
                             sc_embed_model, sc_api_key, sc_out);
        if (app.got_subcommand(audit)) return cmd_audit(au_mcq, au_out);
        if (app.got_subcommand(runc))
            return cmd_run(run_config, run_sets, run_inputs, run_out_dir, run_stop_after);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStageFailure;
    }
    return kExitConfigError;
}
