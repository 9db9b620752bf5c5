#include "mrp/http_backend.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>

namespace {

/// Local chat-completions stand-in whose reply behavior is programmable.
class LocalServer {
public:
    explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler)
        : handler_(std::move(handler)) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                    httplib::Response& res) {
            ++requests_;
            handler_(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~LocalServer() {
        server_.stop();
        thread_.join();
    }

    std::string endpoint() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    }
    int requests() const { return requests_.load(); }

private:
    httplib::Server server_;
    std::function<void(const httplib::Request&, httplib::Response&)> handler_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<int> requests_{0};
};

std::string ok_body(const std::string& text) {
    nlohmann::json j = {
        {"choices",
         {{{"message", {{"role", "assistant"}, {"content", text}}},
           {"finish_reason", "stop"}}}},
        {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 7}}}};
    return j.dump();
}

mrp::CompletionRequest make_request(const std::string& content) {
    mrp::CompletionRequest r;
    r.model = "test-model";
    r.messages = {{mrp::Role::user, content}};
    r.max_tokens = 32;
    r.purpose = mrp::Purpose::execution;
    return r;
}

mrp::HttpBackendConfig fast_config(const std::string& endpoint) {
    mrp::HttpBackendConfig config;
    config.endpoint = endpoint;
    config.api_key_env = "MRP_TEST_KEY";
    config.backoff_ms = 1;
    return config;
}

struct KeyGuard {
    KeyGuard() { ::setenv("MRP_TEST_KEY", "sekrit", 1); }
    ~KeyGuard() { ::unsetenv("MRP_TEST_KEY"); }
};

} // namespace

TEST_CASE("http backend round-trips a completion", "[http]") {
    KeyGuard key;
    std::string seen_auth;
    std::string seen_body;
    LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        seen_body = req.body;
        res.set_content(ok_body("hello back"), "application/json");
    });

    mrp::HttpBackend backend(fast_config(server.endpoint()));
    const mrp::Completion completion = backend.complete(make_request("hello there"));
    CHECK(completion.text == "hello back");
    CHECK(completion.finish_reason == "stop");
    CHECK(completion.usage.prompt_tokens == 11);
    CHECK(completion.usage.completion_tokens == 7);
    CHECK(seen_auth == "Bearer sekrit");

    const nlohmann::json sent = nlohmann::json::parse(seen_body);
    CHECK(sent["model"] == "test-model");
    CHECK(sent["messages"][0]["content"] == "hello there");
    CHECK(sent["max_tokens"] == 32);
}

TEST_CASE("401 is not retried and preserves the body", "[http]") {
    KeyGuard key;
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
        res.status = 401;
        res.set_content("{\"error\": \"bad key\"}", "application/json");
    });
    mrp::HttpBackend backend(fast_config(server.endpoint()));
    try {
        backend.complete(make_request("x"));
        FAIL("expected ApiError");
    } catch (const mrp::ApiError& e) {
        CHECK(e.status() == 401);
        CHECK(e.body().find("bad key") != std::string::npos);
    }
    CHECK(server.requests() == 1);
}

TEST_CASE("429 retries until success", "[http]") {
    KeyGuard key;
    std::atomic<int> hits{0};
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
        if (hits.fetch_add(1) < 2) {
            res.status = 429;
            res.set_content("slow down", "text/plain");
        } else {
            res.set_content(ok_body("finally"), "application/json");
        }
    });
    mrp::HttpBackend backend(fast_config(server.endpoint()));
    CHECK(backend.complete(make_request("x")).text == "finally");
    CHECK(server.requests() == 3);
}

TEST_CASE("persistent 5xx exhausts retries into TransportError", "[http]") {
    KeyGuard key;
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
        res.status = 503;
        res.set_content("nope", "text/plain");
    });
    mrp::HttpBackend backend(fast_config(server.endpoint()));
    CHECK_THROWS_AS(backend.complete(make_request("x")), mrp::TransportError);
    CHECK(server.requests() == 3);
}

TEST_CASE("malformed 200 body is an ApiError", "[http]") {
    KeyGuard key;
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"unexpected\": true}", "application/json");
    });
    mrp::HttpBackend backend(fast_config(server.endpoint()));
    CHECK_THROWS_AS(backend.complete(make_request("x")), mrp::ApiError);
}

TEST_CASE("custom auth header and extra headers are forwarded", "[http]") {
    KeyGuard key;
    std::string api_key_header;
    std::string extra_header;
    LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
        api_key_header = req.get_header_value("api-key");
        extra_header = req.get_header_value("X-Run-Tag");
        res.set_content(ok_body("ok"), "application/json");
    });
    mrp::HttpBackendConfig config = fast_config(server.endpoint());
    config.auth_header = "api-key: {key}";
    config.extra_headers = {"X-Run-Tag: nightly"};
    mrp::HttpBackend backend(config);
    backend.complete(make_request("x"));
    CHECK(api_key_header == "sekrit");
    CHECK(extra_header == "nightly");
}

TEST_CASE("missing API key env var fails fast", "[http]") {
    ::unsetenv("MRP_TEST_KEY");
    mrp::HttpBackend backend(fast_config("http://127.0.0.1:9/v1/chat/completions"));
    CHECK_THROWS_AS(backend.complete(make_request("x")), mrp::ApiError);
}
