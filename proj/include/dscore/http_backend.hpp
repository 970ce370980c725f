#pragma once

#include <chrono>
#include <memory>
#include <stdexcept>
#include <string>

#include "httplib.h"

#include "dscore/backend.hpp"
#include "dscore/types.hpp"

namespace dscore {

namespace detail {

struct ParsedUrl {
    std::string host;
    int port = 80;
    std::string path_prefix;  // no trailing slash
};

// Accepts http://host[:port][/prefix]. TLS is out of scope: the supported
// endpoints (Ollama, LM-Studio, llama.cpp server) listen on plain localhost
// HTTP.
inline Expected<ParsedUrl, std::string> parse_base_url(const std::string& url) {
    std::string rest;
    if (url.rfind("http://", 0) == 0) {
        rest = url.substr(7);
    } else if (url.rfind("https://", 0) == 0) {
        return make_unexpected(std::string("https endpoints are not supported; use http"));
    } else {
        return make_unexpected("base_url must start with http://, got: " + url);
    }
    ParsedUrl out;
    auto slash = rest.find('/');
    std::string authority = rest.substr(0, slash);
    if (slash != std::string::npos) {
        out.path_prefix = rest.substr(slash);
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
    }
    auto colon = authority.find(':');
    if (colon == std::string::npos) {
        out.host = authority;
    } else {
        out.host = authority.substr(0, colon);
        try {
            out.port = std::stoi(authority.substr(colon + 1));
        } catch (const std::exception&) {
            return make_unexpected("base_url has a malformed port: " + url);
        }
        if (out.port < 1 || out.port > 65535)
            return make_unexpected("base_url port out of range: " + url);
    }
    if (out.host.empty()) return make_unexpected("base_url has no host: " + url);
    return out;
}

}  // namespace detail

// OpenAI-compatible chat-completions transport: POST {base_url}/chat/completions.
class HttpBackend final : public Backend {
  public:
    explicit HttpBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
        auto parsed = detail::parse_base_url(cfg_.base_url);
        if (!parsed.has_value()) throw std::invalid_argument(parsed.error());
        url_ = *parsed;
    }

    std::string describe() const override {
        return "http:" + cfg_.base_url + " model=" + cfg_.model_name;
    }

    CompletionResult complete_once(const ChatPrompt& prompt) override {
        Json body;
        body["model"] = cfg_.model_name;
        body["messages"] = Json::array();
        if (!prompt.system.empty())
            body["messages"].push_back({{"role", "system"}, {"content", prompt.system}});
        body["messages"].push_back({{"role", "user"}, {"content", prompt.user}});
        body["temperature"] = prompt.params.temperature;
        body["max_tokens"] = prompt.params.max_output_tokens;
        if (!prompt.params.stop_sequences.empty()) body["stop"] = prompt.params.stop_sequences;
        body["stream"] = false;

        // A fresh connection per request sidesteps client thread-safety
        // questions; negligible next to inference latency.
        httplib::Client client(url_.host, url_.port);
        auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
        if (secs.count() < 1) secs = std::chrono::seconds(1);
        client.set_connection_timeout(secs.count(), 0);
        client.set_read_timeout(secs.count(), 0);
        client.set_write_timeout(secs.count(), 0);
        httplib::Headers headers;
        if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

        auto res = client.Post(url_.path_prefix + "/chat/completions", headers, body.dump(),
                               "application/json");
        if (!res) {
            auto err = res.error();
            BackendErrorKind kind = (err == httplib::Error::ConnectionTimeout ||
                                     err == httplib::Error::Read || err == httplib::Error::Write)
                                        ? BackendErrorKind::Timeout
                                        : BackendErrorKind::NetworkError;
            return make_unexpected(
                BackendError{kind, std::string(httplib::to_string(err)) + " (" + url_.host + ":" +
                                       std::to_string(url_.port) + ")"});
        }
        if (res->status != 200) return make_unexpected(classify_status(res->status, res->body));

        Json j = Json::parse(res->body, nullptr, false);
        if (j.is_discarded())
            return make_unexpected(BackendError{BackendErrorKind::MalformedResponse,
                                                "response body is not JSON: " + excerpt(res->body)});
        try {
            Completion out;
            out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
            if (j.contains("usage") && j["usage"].is_object()) {
                const auto& u = j["usage"];
                if (u.contains("prompt_tokens")) out.prompt_tokens = u["prompt_tokens"].get<int>();
                if (u.contains("completion_tokens"))
                    out.completion_tokens = u["completion_tokens"].get<int>();
            }
            return out;
        } catch (const Json::exception& e) {
            return make_unexpected(BackendError{
                BackendErrorKind::MalformedResponse,
                std::string("response missing choices[0].message.content: ") + e.what()});
        }
    }

  private:
    static std::string excerpt(const std::string& s) {
        return s.size() <= 200 ? s : s.substr(0, 200) + "...";
    }

    static BackendError classify_status(int status, const std::string& body) {
        BackendErrorKind kind;
        if (status == 429 || status == 503) {
            kind = BackendErrorKind::RateLimited;
        } else if (status == 408) {
            kind = BackendErrorKind::Timeout;
        } else if (status >= 500) {
            kind = BackendErrorKind::ServerError;
        } else {
            kind = BackendErrorKind::BadRequest;
        }
        return BackendError{kind, "HTTP " + std::to_string(status) + ": " + excerpt(body)};
    }

    BackendConfig cfg_;
    detail::ParsedUrl url_;
};

}  // namespace dscore
