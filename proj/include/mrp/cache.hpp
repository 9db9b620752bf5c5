#pragma once

#include "mrp/backend.hpp"
#include "mrp/digest.hpp"
#include "mrp/errors.hpp"
#include "mrp/text_norm.hpp"

#include "json.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <system_error>
#include <utility>

#include <unistd.h>

namespace mrp {

/// Shortest decimal string that round-trips the double. Used wherever a
/// temperature has to be serialized canonically.
inline std::string decimal_string(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

/// Canonical serialization of a request for hashing: fixed field order,
/// message content with line endings normalized to LF, temperature as an
/// exact decimal string. The purpose tag is deliberately excluded — it cannot
/// change the reply.
inline std::string canonical_request(const CompletionRequest& request) {
    nlohmann::json j;
    j["max_tokens"] = request.max_tokens;
    nlohmann::json messages = nlohmann::json::array();
    for (const Message& m : request.messages) {
        messages.push_back({{"content", text::normalize_newlines(m.content)},
                            {"role", to_string(m.role)}});
    }
    j["messages"] = messages;
    j["model"] = request.model;
    j["temperature"] = decimal_string(request.temperature);
    return j.dump();
}

inline std::string cache_key(const CompletionRequest& request) {
    return sha256_hex(canonical_request(request));
}

struct CacheRecord {
    std::string key;
    CompletionRequest request;
    Completion response;
    std::string created_at;
};

inline void to_json(nlohmann::json& j, const CacheRecord& r) {
    j = {{"key", r.key},
         {"request", r.request},
         {"response", r.response},
         {"created_at", r.created_at}};
}

inline void from_json(const nlohmann::json& j, CacheRecord& r) {
    r.key = j.at("key").get<std::string>();
    r.request = j.at("request").get<CompletionRequest>();
    r.response = j.at("response").get<Completion>();
    r.created_at = j.at("created_at").get<std::string>();
}

inline std::string utc_timestamp() {
    std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

enum class CacheMode { record, replay };

/// Content-addressed record/replay store, layout cache/<first-2-hex>/<key>.json.
/// Record mode memoizes the inner backend; replay mode never touches it and
/// treats misses as errors. Writes go to a temp file first and are renamed
/// into place, so a killed run never leaves a partial record under its final
/// name.
class CachingBackend : public CompletionBackend {
public:
    CachingBackend(std::filesystem::path dir, CacheMode mode,
                   std::shared_ptr<CompletionBackend> inner)
        : dir_(std::move(dir)), mode_(mode), inner_(std::move(inner)) {
        if (mode_ == CacheMode::record && inner_ == nullptr) {
            throw CacheIoError("record mode needs an inner backend");
        }
    }

    Completion complete(const CompletionRequest& request) override {
        const std::string key = cache_key(request);
        const std::filesystem::path path = record_path(key);

        std::error_code ec;
        if (std::filesystem::exists(path, ec)) {
            CacheRecord record = load_record(path);
            record.response.from_cache = true;
            ++hits_;
            return record.response;
        }
        if (mode_ == CacheMode::replay) {
            throw ReplayMiss("replay cache has no record for key " + key);
        }
        Completion response = inner_->complete(request);
        CacheRecord record{key, request, response, utc_timestamp()};
        store_record(path, record);
        ++misses_;
        return response;
    }

    long hits() const { return hits_.load(); }
    long misses() const { return misses_.load(); }

private:
    std::filesystem::path record_path(const std::string& key) const {
        return dir_ / key.substr(0, 2) / (key + ".json");
    }

    static CacheRecord load_record(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw CacheIoError("cannot open cache record " + path.string());
        }
        try {
            return nlohmann::json::parse(in).get<CacheRecord>();
        } catch (const nlohmann::json::exception& e) {
            throw CacheIoError("corrupt cache record " + path.string() + ": " + e.what());
        }
    }

    void store_record(const std::filesystem::path& path, const CacheRecord& record) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw CacheIoError("cannot create cache directory " +
                               path.parent_path().string() + ": " + ec.message());
        }
        static std::atomic<unsigned> counter{0};
        std::filesystem::path tmp =
            path.string() + ".tmp." + std::to_string(::getpid()) + "." +
            std::to_string(counter.fetch_add(1));
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) {
                throw CacheIoError("cannot write cache record " + tmp.string());
            }
            out << nlohmann::json(record).dump(2) << '\n';
        }
        std::filesystem::rename(tmp, path, ec);
        if (ec) {
            std::filesystem::remove(tmp, ec);
            throw CacheIoError("cannot publish cache record " + path.string());
        }
    }

    std::filesystem::path dir_;
    CacheMode mode_;
    std::shared_ptr<CompletionBackend> inner_;
    std::atomic<long> hits_{0};
    std::atomic<long> misses_{0};
};

} // namespace mrp
