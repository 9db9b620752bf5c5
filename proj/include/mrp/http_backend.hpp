#pragma once

#include "mrp/backend.hpp"
#include "mrp/errors.hpp"

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include "json.hpp"

#include <chrono>
#include <cstdlib>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace mrp {

struct HttpBackendConfig {
    /// Full chat-completions URL, e.g. "https://api.example.com/v1/chat/completions".
    std::string endpoint;
    /// Environment variable holding the API key.
    std::string api_key_env = "MRP_API_KEY";
    /// Auth header with a {key} placeholder; empty disables auth entirely.
    /// Azure-style endpoints use "api-key: {key}".
    std::string auth_header = "Authorization: Bearer {key}";
    /// Extra literal headers, each "Name: value".
    std::vector<std::string> extra_headers;
    int attempts = 3;
    int backoff_ms = 1000;
    int connect_timeout_s = 10;
    int read_timeout_s = 120;
};

namespace detail {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // /path?query
};

inline SplitUrl split_url(const std::string& url) {
    const std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error("endpoint URL must start with http:// or https://: " + url);
    }
    const std::size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline std::pair<std::string, std::string> split_header(const std::string& header) {
    const std::size_t colon = header.find(':');
    if (colon == std::string::npos) {
        throw Error("header must look like 'Name: value', got '" + header + "'");
    }
    std::string name = header.substr(0, colon);
    std::size_t value_start = colon + 1;
    while (value_start < header.size() && header[value_start] == ' ') {
        ++value_start;
    }
    return {name, header.substr(value_start)};
}

} // namespace detail

/// Live chat-completions client: one JSON POST per request, bounded retries
/// with exponential backoff and jitter on timeouts, 429 and 5xx. Other error
/// statuses surface immediately as ApiError with the body preserved.
class HttpBackend : public CompletionBackend {
public:
    explicit HttpBackend(HttpBackendConfig config)
        : config_(std::move(config)), url_(detail::split_url(config_.endpoint)) {}

    Completion complete(const CompletionRequest& request) override {
        request.validate();
        const std::string body = request_body(request);
        const httplib::Headers headers = build_headers();

        std::string last_failure;
        for (int attempt = 0; attempt < config_.attempts; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(backoff_delay(attempt - 1));
            }
            httplib::Client client(url_.base);
            client.set_connection_timeout(config_.connect_timeout_s, 0);
            client.set_read_timeout(config_.read_timeout_s, 0);
            client.set_follow_location(true);

            httplib::Result result = client.Post(url_.path, headers, body, "application/json");
            if (!result) {
                last_failure = "transport failure: " + httplib::to_string(result.error());
                continue;
            }
            const int status = result->status;
            if (status == 429 || (status >= 500 && status < 600)) {
                last_failure = "retryable status " + std::to_string(status);
                continue;
            }
            if (status != 200) {
                throw ApiError(status, result->body,
                               "completion endpoint returned status " + std::to_string(status));
            }
            return parse_response(result->body);
        }
        throw TransportError("completion failed after " + std::to_string(config_.attempts) +
                             " attempts; last: " + last_failure);
    }

private:
    std::string request_body(const CompletionRequest& request) const {
        nlohmann::json j;
        j["model"] = request.model;
        nlohmann::json messages = nlohmann::json::array();
        for (const Message& m : request.messages) {
            messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
        }
        j["messages"] = messages;
        j["temperature"] = request.temperature;
        j["max_tokens"] = request.max_tokens;
        return j.dump();
    }

    httplib::Headers build_headers() const {
        httplib::Headers headers;
        if (!config_.auth_header.empty()) {
            const char* key = std::getenv(config_.api_key_env.c_str());
            if (key == nullptr || *key == '\0') {
                throw ApiError(0, "", "environment variable " + config_.api_key_env +
                                          " is not set; cannot authenticate");
            }
            std::string line = config_.auth_header;
            const std::size_t pos = line.find("{key}");
            if (pos != std::string::npos) {
                line.replace(pos, 5, key);
            }
            headers.insert(detail::split_header(line));
        }
        for (const std::string& extra : config_.extra_headers) {
            headers.insert(detail::split_header(extra));
        }
        return headers;
    }

    static Completion parse_response(const std::string& body) {
        try {
            nlohmann::json j = nlohmann::json::parse(body);
            const nlohmann::json& choice = j.at("choices").at(0);
            Completion c;
            c.text = choice.at("message").at("content").get<std::string>();
            c.finish_reason = choice.value("finish_reason", "");
            if (j.contains("usage")) {
                c.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
                c.usage.completion_tokens = j["usage"].value("completion_tokens", 0L);
            }
            return c;
        } catch (const nlohmann::json::exception& e) {
            throw ApiError(200, body, std::string("malformed completion response: ") + e.what());
        }
    }

    std::chrono::milliseconds backoff_delay(int exhausted_attempts) const {
        double delay = static_cast<double>(config_.backoff_ms);
        for (int i = 0; i < exhausted_attempts; ++i) {
            delay *= 2.0;
        }
        thread_local std::mt19937 rng{std::random_device{}()};
        std::uniform_real_distribution<double> jitter(0.8, 1.2);
        return std::chrono::milliseconds(static_cast<long>(delay * jitter(rng)));
    }

    HttpBackendConfig config_;
    detail::SplitUrl url_;
};

} // namespace mrp
