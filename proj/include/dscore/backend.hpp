#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dscore/common.hpp"
#include "dscore/ledger.hpp"
#include "dscore/types.hpp"

namespace dscore {

struct GenParams {
    double temperature = 0.7;
    int max_output_tokens = 1024;
    std::vector<std::string> stop_sequences;
};

struct ChatPrompt {
    std::string system;  // may be empty
    std::string user;    // must be non-empty
    GenParams params;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds backoff_base{500};
};

struct BackendConfig {
    std::string base_url = "http://localhost:11434/v1";
    std::string api_key;  // optional bearer token
    std::string model_name;
    int max_parallel = 4;
    std::chrono::milliseconds timeout{120000};
    RetryPolicy retry;
};

enum class BackendErrorKind {
    Timeout,
    RateLimited,
    NetworkError,
    ServerError,
    BadRequest,
    MalformedResponse,
    Exhausted,
};

inline const char* to_string(BackendErrorKind k) {
    switch (k) {
        case BackendErrorKind::Timeout: return "timeout";
        case BackendErrorKind::RateLimited: return "rate_limited";
        case BackendErrorKind::NetworkError: return "network_error";
        case BackendErrorKind::ServerError: return "server_error";
        case BackendErrorKind::BadRequest: return "bad_request";
        case BackendErrorKind::MalformedResponse: return "malformed_response";
        case BackendErrorKind::Exhausted: return "exhausted";
    }
    return "unknown";
}

// Transient conditions are retried; a 4xx or an unparseable 200 body will not
// get better on its own and surfaces immediately.
inline bool retryable(BackendErrorKind k) {
    switch (k) {
        case BackendErrorKind::Timeout:
        case BackendErrorKind::RateLimited:
        case BackendErrorKind::NetworkError:
        case BackendErrorKind::ServerError:
            return true;
        default:
            return false;
    }
}

struct BackendError {
    BackendErrorKind kind = BackendErrorKind::NetworkError;
    std::string message;
    int attempts = 1;
};

struct Completion {
    std::string text;
    int prompt_tokens = -1;      // -1: endpoint did not report usage
    int completion_tokens = -1;
};

using CompletionResult = Expected<Completion, BackendError>;

// Transport with single-attempt semantics; retry, backoff, admission control
// and ledger accounting live in BackendClient.
class Backend {
  public:
    virtual ~Backend() = default;
    virtual CompletionResult complete_once(const ChatPrompt& prompt) = 0;
    virtual std::string describe() const = 0;
};

namespace detail {

class Limiter {
  public:
    explicit Limiter(int slots) : available_(slots) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return available_ > 0; });
        --available_;
    }

    void release() {
        {
            std::lock_guard lock(mu_);
            ++available_;
        }
        cv_.notify_one();
    }

  private:
    std::mutex mu_;
    std::condition_variable cv_;
    int available_;
};

struct SlotGuard {
    Limiter& limiter;
    explicit SlotGuard(Limiter& l) : limiter(l) { limiter.acquire(); }
    ~SlotGuard() { limiter.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;
};

}  // namespace detail

// Shareable client over any transport. An internal admission limiter caps
// in-flight requests at max_parallel no matter how many threads call in; all
// public operations are safe for concurrent use.
class BackendClient {
  public:
    BackendClient(std::shared_ptr<Backend> transport, BackendConfig cfg,
                  std::shared_ptr<RunLedger> ledger = nullptr)
        : transport_(std::move(transport)),
          cfg_(std::move(cfg)),
          ledger_(std::move(ledger)),
          limiter_(cfg_.max_parallel < 1 ? 1 : cfg_.max_parallel) {}

    const BackendConfig& config() const { return cfg_; }
    Backend& transport() { return *transport_; }

    CompletionResult complete(const ChatPrompt& prompt) {
        detail::SlotGuard slot(limiter_);
        const int max_attempts = cfg_.retry.max_attempts < 1 ? 1 : cfg_.retry.max_attempts;
        BackendError last;
        for (int attempt = 1; attempt <= max_attempts; ++attempt) {
            auto t0 = std::chrono::steady_clock::now();
            CompletionResult r = transport_->complete_once(prompt);
            auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
            if (ledger_) {
                ledger_->add("backend.requests");
                ledger_->add("backend.latency_ms", ms);
            }
            if (r.has_value()) {
                if (ledger_) {
                    if (r->prompt_tokens >= 0) ledger_->add("backend.prompt_tokens", r->prompt_tokens);
                    if (r->completion_tokens >= 0)
                        ledger_->add("backend.completion_tokens", r->completion_tokens);
                }
                return r;
            }
            last = r.error();
            last.attempts = attempt;
            if (ledger_) ledger_->add("backend.errors");
            if (!retryable(last.kind) || attempt == max_attempts) break;
            if (ledger_) ledger_->add("backend.retries");
            auto delay = cfg_.retry.backoff_base * (1LL << (attempt - 1));
            if (delay.count() > 0) std::this_thread::sleep_for(delay);
        }
        if (retryable(last.kind) && last.attempts >= max_attempts && max_attempts > 1) {
            last.message = std::string("all ") + std::to_string(last.attempts) +
                           " attempts failed; last: " + to_string(last.kind) +
                           (last.message.empty() ? "" : ": " + last.message);
            last.kind = BackendErrorKind::Exhausted;
        }
        return make_unexpected(last);
    }

    // Fans prompts out over worker threads. Result i always corresponds to
    // prompt i; a failing item yields its own error and never aborts the rest.
    std::vector<CompletionResult> complete_batch(const std::vector<ChatPrompt>& prompts) {
        std::vector<std::optional<CompletionResult>> slots(prompts.size());
        if (!prompts.empty()) {
            int workers = cfg_.max_parallel < 1 ? 1 : cfg_.max_parallel;
            if (static_cast<std::size_t>(workers) > prompts.size())
                workers = static_cast<int>(prompts.size());
            std::atomic<std::size_t> next{0};
            auto work = [&] {
                for (;;) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= prompts.size()) return;
                    slots[i] = complete(prompts[i]);
                }
            };
            std::vector<std::thread> pool;
            pool.reserve(static_cast<std::size_t>(workers));
            for (int w = 0; w < workers; ++w) pool.emplace_back(work);
            for (auto& t : pool) t.join();
        }
        std::vector<CompletionResult> results;
        results.reserve(slots.size());
        for (auto& s : slots) results.push_back(std::move(*s));
        return results;
    }

  private:
    std::shared_ptr<Backend> transport_;
    BackendConfig cfg_;
    std::shared_ptr<RunLedger> ledger_;
    detail::Limiter limiter_;
};

// Environment overrides shared by the CLI and the orchestrator.
inline void apply_env_overrides(BackendConfig& cfg) {
    if (const char* v = std::getenv("DSCORE_API_BASE"); v && *v) cfg.base_url = v;
    if (const char* v = std::getenv("DSCORE_API_KEY"); v && *v) cfg.api_key = v;
    if (const char* v = std::getenv("DSCORE_MODEL"); v && *v) cfg.model_name = v;
}

}  // namespace dscore
