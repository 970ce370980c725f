#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "dscore/types.hpp"

namespace dscore {

// Thread-safe run accounting: named counters plus free-form notes. Every
// stage writes here (request counts, retries, shortfalls, quarantines) and
// the orchestrator folds the result into the run manifest.
class RunLedger {
  public:
    void add(const std::string& key, std::int64_t delta = 1) {
        std::lock_guard lock(mu_);
        counters_[key] += delta;
    }

    void note(std::string message) {
        std::lock_guard lock(mu_);
        notes_.push_back(std::move(message));
    }

    std::int64_t get(const std::string& key) const {
        std::lock_guard lock(mu_);
        auto it = counters_.find(key);
        return it == counters_.end() ? 0 : it->second;
    }

    std::map<std::string, std::int64_t> counters() const {
        std::lock_guard lock(mu_);
        return counters_;
    }

    std::vector<std::string> notes() const {
        std::lock_guard lock(mu_);
        return notes_;
    }

    Json to_json() const {
        std::lock_guard lock(mu_);
        Json j;
        j["counters"] = Json::object();
        for (const auto& [k, v] : counters_) j["counters"][k] = v;
        j["notes"] = notes_;
        return j;
    }

  private:
    mutable std::mutex mu_;
    std::map<std::string, std::int64_t> counters_;
    std::vector<std::string> notes_;
};

}  // namespace dscore
