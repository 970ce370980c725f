#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "dscore/pipeline.hpp"
#include "test_util.hpp"

using namespace dscore;

namespace {

std::string sample_document() {
    std::string text;
    const char* sentences[] = {
        "Granite forms deep underground as magma cools over thousands of years.",
        "The slow cooling grows large crystals of quartz, feldspar, and mica.",
        "Basalt, by contrast, erupts at the surface and cools within days.",
        "Rapid cooling traps tiny crystals, giving basalt a dense, dark body.",
        "Weathering eventually breaks both rocks into sand and clay.",
        "Rivers carry the grains to the sea, where new layers slowly stack.",
        "Heat and pressure can later fuse those layers into fresh stone.",
        "Geologists read this cycle in cliff faces like pages of a book.",
    };
    for (const char* s : sentences) {
        text += s;
        text += ' ';
    }
    return text;
}

PipelineConfig mock_config(const testutil::TempDir& dir, const std::string& out_name) {
    PipelineConfig cfg;
    cfg.inputs = {dir.join("doc.txt")};
    cfg.out_dir = dir.join(out_name);
    cfg.backend.kind = "mock";
    cfg.backend.mock_seed = 5;
    cfg.seed = 7;
    return cfg;
}

std::string slurp(const std::string& path) { return read_text_file(path); }

void check_same_artifacts(const RunPaths& a, const RunPaths& b) {
    CHECK(slurp(a.segments()) == slurp(b.segments()));
    CHECK(slurp(a.stage1()) == slurp(b.stage1()));
    CHECK(slurp(a.stage2()) == slurp(b.stage2()));
    CHECK(slurp(a.verdicts()) == slurp(b.verdicts()));
    CHECK(slurp(a.stage3()) == slurp(b.stage3()));
    CHECK(slurp(a.train()) == slurp(b.train()));
    CHECK(slurp(a.report()) == slurp(b.report()));
    CHECK(slurp(a.sft()) == slurp(b.sft()));
}

}  // namespace

TEST_CASE("full mock run writes every stage artifact", "[pipeline]") {
    testutil::TempDir dir;
    dir.file("doc.txt", sample_document());
    auto cfg = mock_config(dir, "out");

    auto result = run(cfg);
    INFO(join(result.errors, "; "));
    REQUIRE(result.exit_code == kExitOk);

    RunPaths paths{cfg.out_dir};
    for (const auto& f :
         {paths.segments(), paths.stage1(), paths.stage2(), paths.verdicts(), paths.stage3(),
          paths.train(), paths.report(), paths.sft(), paths.manifest(), paths.ledger()})
        CHECK(std::filesystem::exists(f));

    for (const auto& [name, rec] : result.manifest.stages)
        CHECK(rec.status == StageStatus::Done);

    auto segments = load_segments(paths.segments());
    REQUIRE(segments.size() == 1);
    auto stage1 = load_qa_pairs(paths.stage1());
    CHECK(stage1.size() == 6);
    auto items = load_mcq_items(paths.stage3());
    CHECK(items.size() == load_qa_pairs(paths.stage2()).size());
    for (const auto& it : items) CHECK(it.options.size() == 4);

    Json em = Json::parse(slurp(paths.export_manifest()));
    CHECK(em["n_exported"].get<int>() == static_cast<int>(load_qa_pairs(paths.train()).size()));
    CHECK(em["n_quarantined"] == 0);
    CHECK(em["config_hash"] == result.manifest.config_hash);
}

TEST_CASE("interrupted runs resume to byte-identical artifacts", "[pipeline]") {
    testutil::TempDir dir;
    dir.file("doc.txt", sample_document());

    auto uncfg = mock_config(dir, "straight");
    REQUIRE(run(uncfg).exit_code == kExitOk);

    // stop at a boundary mid-pipeline, then resume
    auto cfg = mock_config(dir, "resumed");
    RunOptions stop;
    stop.stop_after = "qc";
    auto first = run(cfg, stop);
    REQUIRE(first.exit_code == kExitOk);
    CHECK(first.manifest.find("qc")->status == StageStatus::Done);
    CHECK(first.manifest.find("distract")->status == StageStatus::Pending);
    CHECK(!std::filesystem::exists(RunPaths{cfg.out_dir}.stage3()));

    auto second = run(cfg);
    REQUIRE(second.exit_code == kExitOk);
    bool skipped = false;
    for (const auto& note : second.ledger->notes())
        if (note.find("resume: skipped completed stage generate") != std::string::npos)
            skipped = true;
    CHECK(skipped);

    check_same_artifacts(RunPaths{uncfg.out_dir}, RunPaths{cfg.out_dir});
}

TEST_CASE("config changes invalidate resume state", "[pipeline]") {
    testutil::TempDir dir;
    dir.file("doc.txt", sample_document());
    auto cfg = mock_config(dir, "out");
    RunOptions stop;
    stop.stop_after = "generate";
    REQUIRE(run(cfg, stop).exit_code == kExitOk);

    cfg.n_explicit = 2;  // different recipe, different hash
    auto rerun = run(cfg);
    REQUIRE(rerun.exit_code == kExitOk);
    for (const auto& note : rerun.ledger->notes())
        CHECK(note.find("resume:") == std::string::npos);
    CHECK(load_qa_pairs(RunPaths{cfg.out_dir}.stage1()).size() == 5);
}

TEST_CASE("invalid config is rejected before any stage runs", "[pipeline]") {
    testutil::TempDir dir;
    dir.file("doc.txt", sample_document());
    auto cfg = mock_config(dir, "out");
    cfg.max_tokens = 4;

    auto result = run(cfg);
    CHECK(result.exit_code == kExitConfigError);
    REQUIRE(!result.errors.empty());
    CHECK(result.errors[0].find("ingest.max_tokens") != std::string::npos);
    CHECK(!std::filesystem::exists(cfg.out_dir));

    auto no_inputs = mock_config(dir, "out2");
    no_inputs.inputs.clear();
    auto r2 = run(no_inputs);
    CHECK(r2.exit_code == kExitConfigError);
    CHECK(r2.errors[0].find("ingest.inputs") != std::string::npos);

    auto bad_stop = mock_config(dir, "out3");
    RunOptions opts;
    opts.stop_after = "flyswat";
    CHECK(run(bad_stop, opts).exit_code == kExitConfigError);
}

TEST_CASE("a failing stage marks the manifest and exits 2", "[pipeline]") {
    testutil::TempDir dir;
    auto cfg = mock_config(dir, "out");
    cfg.inputs = {dir.join("missing.txt")};

    auto result = run(cfg);
    CHECK(result.exit_code == kExitStageFailure);
    const StageRecord* rec = result.manifest.find("ingest");
    REQUIRE(rec != nullptr);
    CHECK(rec->status == StageStatus::Failed);
    CHECK(!rec->error.empty());

    auto persisted = load_manifest(RunPaths{cfg.out_dir}.manifest());
    REQUIRE(persisted.has_value());
    CHECK(persisted->find("ingest")->status == StageStatus::Failed);
    CHECK(persisted->find("generate")->status == StageStatus::Pending);
}

TEST_CASE("quarantined records mark the run partial", "[pipeline]") {
    testutil::TempDir dir;
    auto cfg = mock_config(dir, "out");
    cfg.stages = {"export"};
    cfg.inputs.clear();

    std::filesystem::create_directories(cfg.out_dir);
    RunPaths paths{cfg.out_dir};
    QAPair qa;
    qa.qa_id = "doc::s0::q0";
    qa.segment_id = "doc::s0";
    qa.question = "Q";
    qa.answer = "A";
    qa.qtype = QType::Explicit;
    detail::write_lines(paths.stage2(),
                        {to_json(qa).dump(), "word salad, beyond saving"});

    auto result = run(cfg);
    CHECK(result.exit_code == kExitPartial);
    CHECK(result.ledger->get("export.quarantined") == 1);
    CHECK(detail::read_lines(paths.sft()).size() == 1);
    CHECK(detail::read_lines(paths.quarantine()).size() == 1);
}

TEST_CASE("mcq export consumes stage3 items", "[pipeline]") {
    testutil::TempDir dir;
    dir.file("doc.txt", sample_document());
    auto cfg = mock_config(dir, "out");
    cfg.stages = {"ingest", "generate", "qc", "distract", "export"};
    cfg.format = ExportFormat::Mcq;

    auto result = run(cfg);
    INFO(join(result.errors, "; "));
    REQUIRE(result.exit_code == kExitOk);
    auto lines = detail::read_lines(RunPaths{cfg.out_dir}.sft());
    REQUIRE(!lines.empty());
    for (const auto& line : lines) {
        CHECK(!validate_record(line, ExportFormat::Mcq));
        Json j = Json::parse(line);
        std::string letter = j["answer_letter"].get<std::string>();
        CHECK(letter.size() == 1);
        CHECK(letter[0] >= 'A');
        CHECK(letter[0] <= 'D');
    }
}
