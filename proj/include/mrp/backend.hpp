#pragma once

#include "mrp/errors.hpp"

#include "json.hpp"

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mrp {

enum class Role { system, user, assistant };

inline std::string_view to_string(Role role) {
    switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "?";
}

inline Role role_from_string(std::string_view s) {
    if (s == "system") return Role::system;
    if (s == "user") return Role::user;
    if (s == "assistant") return Role::assistant;
    throw Error("unknown message role '" + std::string(s) + "'");
}

/// Why a completion is being requested. Excluded from cache keys; used to
/// route scripted replies and to break down call counts.
enum class Purpose { scoring, execution, judge };

inline std::string_view to_string(Purpose purpose) {
    switch (purpose) {
    case Purpose::scoring: return "scoring";
    case Purpose::execution: return "execution";
    case Purpose::judge: return "judge";
    }
    return "?";
}

inline Purpose purpose_from_string(std::string_view s) {
    if (s == "scoring") return Purpose::scoring;
    if (s == "execution") return Purpose::execution;
    if (s == "judge") return Purpose::judge;
    throw Error("unknown purpose tag '" + std::string(s) + "'");
}

struct Message {
    Role role = Role::user;
    std::string content;

    bool operator==(const Message&) const = default;
};

struct CompletionRequest {
    std::string model;
    std::vector<Message> messages;
    double temperature = 0.0;
    int max_tokens = 1024;
    Purpose purpose = Purpose::execution;

    void validate() const {
        if (messages.empty()) {
            throw Error("completion request has no messages");
        }
        if (temperature < 0.0 || temperature > 2.0) {
            throw Error("temperature must be in [0, 2]");
        }
        if (max_tokens <= 0) {
            throw Error("max_tokens must be positive");
        }
    }

    bool operator==(const CompletionRequest&) const = default;
};

struct Usage {
    long prompt_tokens = 0;
    long completion_tokens = 0;

    bool operator==(const Usage&) const = default;
};

struct Completion {
    std::string text;
    std::string finish_reason;
    Usage usage;
    bool from_cache = false;

    bool operator==(const Completion&) const = default;
};

// JSON round-trips for cache records and script files.

inline void to_json(nlohmann::json& j, const Message& m) {
    j = {{"role", to_string(m.role)}, {"content", m.content}};
}

inline void from_json(const nlohmann::json& j, Message& m) {
    m.role = role_from_string(j.at("role").get<std::string>());
    m.content = j.at("content").get<std::string>();
}

inline void to_json(nlohmann::json& j, const CompletionRequest& r) {
    j = {{"model", r.model},
         {"messages", r.messages},
         {"temperature", r.temperature},
         {"max_tokens", r.max_tokens},
         {"purpose", to_string(r.purpose)}};
}

inline void from_json(const nlohmann::json& j, CompletionRequest& r) {
    r.model = j.at("model").get<std::string>();
    r.messages = j.at("messages").get<std::vector<Message>>();
    r.temperature = j.at("temperature").get<double>();
    r.max_tokens = j.at("max_tokens").get<int>();
    r.purpose = purpose_from_string(j.at("purpose").get<std::string>());
}

inline void to_json(nlohmann::json& j, const Completion& c) {
    j = {{"text", c.text},
         {"finish_reason", c.finish_reason},
         {"usage",
          {{"prompt_tokens", c.usage.prompt_tokens},
           {"completion_tokens", c.usage.completion_tokens}}}};
}

inline void from_json(const nlohmann::json& j, Completion& c) {
    c.text = j.at("text").get<std::string>();
    c.finish_reason = j.at("finish_reason").get<std::string>();
    c.usage.prompt_tokens = j.at("usage").at("prompt_tokens").get<long>();
    c.usage.completion_tokens = j.at("usage").at("completion_tokens").get<long>();
    c.from_cache = false;
}

/// Uniform completion interface. Implementations must tolerate concurrent
/// complete() calls.
class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual Completion complete(const CompletionRequest& request) = 0;
};

/// Mock backend that replays a fixed queue of replies per purpose tag.
class ScriptedBackend : public CompletionBackend {
public:
    ScriptedBackend() = default;

    /// Script file: a JSON list of {"purpose": ..., "text": ...} consumed in
    /// order within each purpose.
    static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw Error("cannot open script file " + path.string());
        }
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw Error("malformed script file " + path.string() + ": " + e.what());
        }
        auto backend = std::make_shared<ScriptedBackend>();
        for (const nlohmann::json& entry : doc) {
            backend->push(purpose_from_string(entry.at("purpose").get<std::string>()),
                          entry.at("text").get<std::string>());
        }
        return backend;
    }

    void push(Purpose purpose, std::string text) {
        std::lock_guard<std::mutex> lock(mutex_);
        queue_for(purpose).push_back(std::move(text));
    }

    std::size_t remaining(Purpose purpose) const {
        std::lock_guard<std::mutex> lock(mutex_);
        switch (purpose) {
        case Purpose::scoring: return scoring_.size();
        case Purpose::execution: return execution_.size();
        case Purpose::judge: return judge_.size();
        }
        return 0;
    }

    Completion complete(const CompletionRequest& request) override {
        request.validate();
        std::lock_guard<std::mutex> lock(mutex_);
        std::deque<std::string>& queue = queue_for(request.purpose);
        if (queue.empty()) {
            throw ScriptExhausted("scripted backend: no reply left for purpose '" +
                                  std::string(to_string(request.purpose)) + "'");
        }
        Completion c;
        c.text = std::move(queue.front());
        queue.pop_front();
        c.finish_reason = "stop";
        return c;
    }

private:
    std::deque<std::string>& queue_for(Purpose purpose) {
        switch (purpose) {
        case Purpose::scoring: return scoring_;
        case Purpose::execution: return execution_;
        case Purpose::judge: return judge_;
        }
        return execution_;
    }

    mutable std::mutex mutex_;
    std::deque<std::string> scoring_;
    std::deque<std::string> execution_;
    std::deque<std::string> judge_;
};

/// Caps the number of requests simultaneously in flight on the wrapped
/// backend.
class ConcurrencyLimitedBackend : public CompletionBackend {
public:
    ConcurrencyLimitedBackend(std::shared_ptr<CompletionBackend> inner, int limit)
        : inner_(std::move(inner)), limit_(limit) {
        if (limit_ < 1) {
            throw Error("in-flight limit must be >= 1");
        }
    }

    Completion complete(const CompletionRequest& request) override {
        Slot slot(*this);
        return inner_->complete(request);
    }

private:
    struct Slot {
        explicit Slot(ConcurrencyLimitedBackend& owner) : owner_(owner) {
            std::unique_lock<std::mutex> lock(owner_.mutex_);
            owner_.cv_.wait(lock, [&] { return owner_.active_ < owner_.limit_; });
            ++owner_.active_;
        }
        ~Slot() {
            {
                std::lock_guard<std::mutex> lock(owner_.mutex_);
                --owner_.active_;
            }
            owner_.cv_.notify_one();
        }
        ConcurrencyLimitedBackend& owner_;
    };

    std::shared_ptr<CompletionBackend> inner_;
    int limit_;
    int active_ = 0;
    std::mutex mutex_;
    std::condition_variable cv_;
};

} // namespace mrp
