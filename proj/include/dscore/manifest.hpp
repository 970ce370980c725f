#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dscore/jsonl.hpp"
#include "dscore/types.hpp"

namespace dscore {

enum class StageStatus { Pending, Done, Failed };

inline std::string to_string(StageStatus s) {
    switch (s) {
        case StageStatus::Pending: return "pending";
        case StageStatus::Done: return "done";
        case StageStatus::Failed: return "failed";
    }
    return "pending";
}

inline StageStatus stage_status_from_string(const std::string& s) {
    if (s == "done") return StageStatus::Done;
    if (s == "failed") return StageStatus::Failed;
    return StageStatus::Pending;
}

struct StageRecord {
    StageStatus status = StageStatus::Pending;
    double seconds = 0.0;
    Json counters = Json::object();
    std::string error;
};

// Persisted run state: which stages completed under which config, the seeds
// and template versions in force, and per-stage conservation counters. A
// fresh copy is written atomically after every stage boundary so an
// interrupted run can resume exactly where it stopped.
struct RunManifest {
    std::string run_id;
    std::string config_hash;
    std::vector<std::pair<std::string, StageRecord>> stages;  // pipeline order
    Json seeds = Json::object();
    Json template_versions = Json::object();

    StageRecord* find(const std::string& name) {
        for (auto& [n, rec] : stages)
            if (n == name) return &rec;
        return nullptr;
    }
    const StageRecord* find(const std::string& name) const {
        for (const auto& [n, rec] : stages)
            if (n == name) return &rec;
        return nullptr;
    }
};

inline Json to_json(const RunManifest& m) {
    Json stages = Json::object();
    for (const auto& [name, rec] : m.stages) {
        Json r{{"status", to_string(rec.status)},
               {"seconds", rec.seconds},
               {"counters", rec.counters}};
        if (!rec.error.empty()) r["error"] = rec.error;
        stages[name] = r;
    }
    return Json{{"run_id", m.run_id},
                {"config_hash", m.config_hash},
                {"stages", stages},
                {"seeds", m.seeds},
                {"template_versions", m.template_versions}};
}

inline RunManifest manifest_from_json(const Json& j) {
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& [name, r] : j.at("stages").items()) {
        StageRecord rec;
        rec.status = stage_status_from_string(r.at("status").get<std::string>());
        rec.seconds = r.value("seconds", 0.0);
        rec.counters = r.value("counters", Json::object());
        rec.error = r.value("error", std::string());
        m.stages.emplace_back(name, rec);
    }
    if (j.contains("seeds")) m.seeds = j.at("seeds");
    if (j.contains("template_versions")) m.template_versions = j.at("template_versions");
    return m;
}

inline void save_manifest(const RunManifest& m, const std::string& path) {
    write_file_atomic(path, to_json(m).dump(2) + "\n");
}

inline std::optional<RunManifest> load_manifest(const std::string& path) {
    if (!std::filesystem::exists(path)) return std::nullopt;
    Json j = Json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    try {
        return manifest_from_json(j);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace dscore
