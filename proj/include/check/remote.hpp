#pragma once

// HTTP clients for chat-completion and embedding endpoints. Transport
// failures are retried with exponential backoff; content errors are not.
// Errors always surface as BackendError, never as empty strings.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "check/backends.hpp"

namespace check {

struct RemoteConfig {
    std::string endpoint;              // e.g. http://localhost:8000
    std::string model;
    std::string embed_model;
    std::string completion_path = "/v1/chat/completions";
    std::string embeddings_path = "/v1/embeddings";
    std::string api_key;               // optional bearer credential
    int timeout_seconds = 30;
    int max_retries = 2;               // transport errors only
    std::size_t embedding_dim = 0;     // 0 = accept whatever the server reports

    // Environment overrides: CHECK_ENDPOINT, CHECK_API_KEY.
    void apply_env_overrides() {
        if (const char* e = std::getenv("CHECK_ENDPOINT")) endpoint = e;
        if (const char* k = std::getenv("CHECK_API_KEY")) api_key = k;
    }
};

namespace remote_detail {

inline nlohmann::json post_json(const RemoteConfig& cfg, const std::string& path,
                                const nlohmann::json& body) {
    std::string last_error;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(100 * (1 << (attempt - 1))));
        httplib::Client client(cfg.endpoint);
        client.set_connection_timeout(cfg.timeout_seconds, 0);
        client.set_read_timeout(cfg.timeout_seconds, 0);
        httplib::Headers headers;
        if (!cfg.api_key.empty())
            headers.emplace("Authorization", "Bearer " + cfg.api_key);
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;  // retryable
        }
        if (res->status < 200 || res->status >= 300)
            throw BackendError("HTTP " + std::to_string(res->status) + " from " + path + ": " +
                               res->body.substr(0, 200));
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed response body: ") + e.what());
        }
    }
    throw BackendError("request to " + path + " failed after " +
                       std::to_string(cfg.max_retries + 1) + " attempts; last: " + last_error);
}

}  // namespace remote_detail

class RemoteLlm : public LlmBackend {
public:
    explicit RemoteLlm(RemoteConfig cfg) : cfg_(std::move(cfg)) {}

    std::string complete(const CompletionRequest& req) override {
        req.validate();
        nlohmann::json body{
            {"model", cfg_.model},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}})},
            {"temperature", req.temperature},
            {"max_tokens", req.max_new_tokens},
        };
        if (!req.stop_sequences.empty()) body["stop"] = req.stop_sequences;
        nlohmann::json res = remote_detail::post_json(cfg_, cfg_.completion_path, body);
        try {
            const auto& choice = res.at("choices").at(0);
            if (choice.contains("message"))
                return choice["message"].at("content").get<std::string>();
            return choice.at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("unexpected completion response shape: ") + e.what());
        }
    }

private:
    RemoteConfig cfg_;
};

class RemoteEmbedder : public EmbeddingBackend {
public:
    explicit RemoteEmbedder(RemoteConfig cfg) : cfg_(std::move(cfg)), dim_(cfg_.embedding_dim) {}

    std::vector<double> embed(const std::string& text) override {
        if (trim(text).empty()) throw BackendError("embed: empty text");
        nlohmann::json body{{"model", cfg_.embed_model.empty() ? cfg_.model : cfg_.embed_model},
                            {"input", text}};
        nlohmann::json res = remote_detail::post_json(cfg_, cfg_.embeddings_path, body);
        std::vector<double> v;
        try {
            for (const auto& x : res.at("data").at(0).at("embedding"))
                v.push_back(x.get<double>());
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("unexpected embedding response shape: ") + e.what());
        }
        if (v.empty()) throw BackendError("embedding response was empty");
        if (dim_ == 0) dim_ = v.size();
        if (v.size() != dim_)
            throw BackendError("embedding dimension changed mid-run: " +
                               std::to_string(v.size()) + " vs " + std::to_string(dim_));
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) throw BackendError("embedding response was the zero vector");
        for (double& x : v) x /= norm;
        return v;
    }

    std::size_t dimension() const override { return dim_; }

private:
    RemoteConfig cfg_;
    std::size_t dim_;
};

}  // namespace check
