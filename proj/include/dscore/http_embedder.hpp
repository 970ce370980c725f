#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "dscore/http_backend.hpp"
#include "dscore/metrics.hpp"

namespace dscore {

// Remote embedding backend speaking the OpenAI-compatible /embeddings wire
// shape. Failures come back as error values; the caller omits the metric.
class HttpEmbedder final : public Embedder {
  public:
    HttpEmbedder(const std::string& base_url, std::string model, std::string api_key = "",
                 std::chrono::milliseconds timeout = std::chrono::milliseconds(30000))
        : model_(std::move(model)), api_key_(std::move(api_key)), timeout_(timeout) {
        auto parsed = detail::parse_base_url(base_url);
        if (!parsed.has_value()) throw std::invalid_argument(parsed.error());
        url_ = parsed.value();
    }

    Expected<std::vector<double>, std::string> embed(const std::string& text) override {
        httplib::Client cli(url_.host, url_.port);
        cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout_));
        cli.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout_));
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

        Json body{{"model", model_}, {"input", text}};
        auto res = cli.Post(url_.path_prefix + "/embeddings", headers, body.dump(),
                            "application/json");
        if (!res) return make_unexpected(std::string("embedding request failed: ") +
                                         httplib::to_string(res.error()));
        if (res->status != 200)
            return make_unexpected("embedding endpoint returned HTTP " +
                                   std::to_string(res->status));
        Json j = Json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("data") || !j["data"].is_array() ||
            j["data"].empty() || !j["data"][0].contains("embedding"))
            return make_unexpected(std::string("embedding reply missing data[0].embedding"));
        try {
            return j["data"][0]["embedding"].get<std::vector<double>>();
        } catch (const std::exception& e) {
            return make_unexpected(std::string("embedding vector malformed: ") + e.what());
        }
    }

  private:
    detail::ParsedUrl url_;
    std::string model_;
    std::string api_key_;
    std::chrono::milliseconds timeout_;
};

}  // namespace dscore
