#pragma once

#include "mrp/errors.hpp"
#include "mrp/harness.hpp"
#include "mrp/text_norm.hpp"

#include "json.hpp"

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace mrp {

namespace toml_mini {

/// Minimal TOML reader covering what run configs need: comments, [tables],
/// [[arrays of tables]], bare keys, strings with basic escapes, integers,
/// floats, booleans and single-line arrays. Parsed into a JSON tree.
inline nlohmann::json parse(const std::string& source, const std::string& origin = "config") {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* current = &root;

    std::size_t line_no = 0;
    auto fail = [&](const std::string& reason) -> void {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + reason);
    };

    auto strip_comment = [](const std::string& line) {
        bool in_string = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) {
                in_string = !in_string;
            } else if (line[i] == '#' && !in_string) {
                return line.substr(0, i);
            }
        }
        return line;
    };

    std::function<nlohmann::json(const std::string&)> parse_value =
        [&](const std::string& raw) -> nlohmann::json {
        const std::string v = text::trim(raw);
        if (v.empty()) {
            fail("missing value");
        }
        if (v.front() == '"') {
            std::string out;
            bool closed = false;
            std::size_t i = 1;
            for (; i < v.size(); ++i) {
                if (v[i] == '\\') {
                    if (i + 1 >= v.size()) {
                        fail("dangling escape in string");
                    }
                    const char esc = v[++i];
                    switch (esc) {
                    case '"': out.push_back('"'); break;
                    case '\\': out.push_back('\\'); break;
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    case 'r': out.push_back('\r'); break;
                    default: fail(std::string("unsupported escape \\") + esc);
                    }
                } else if (v[i] == '"') {
                    closed = true;
                    ++i;
                    break;
                } else {
                    out.push_back(v[i]);
                }
            }
            if (!closed || !text::trim(v.substr(i)).empty()) {
                fail("malformed string value: " + v);
            }
            return out;
        }
        if (v == "true") {
            return true;
        }
        if (v == "false") {
            return false;
        }
        if (v.front() == '[') {
            if (v.back() != ']') {
                fail("arrays must open and close on one line: " + v);
            }
            nlohmann::json array = nlohmann::json::array();
            std::string body = v.substr(1, v.size() - 2);
            std::vector<std::string> elements;
            bool in_string = false;
            int depth = 0;
            std::string element;
            for (std::size_t i = 0; i < body.size(); ++i) {
                const char c = body[i];
                if (c == '"' && (i == 0 || body[i - 1] != '\\')) {
                    in_string = !in_string;
                }
                if (!in_string) {
                    if (c == '[') {
                        ++depth;
                    } else if (c == ']') {
                        --depth;
                    } else if (c == ',' && depth == 0) {
                        elements.push_back(element);
                        element.clear();
                        continue;
                    }
                }
                element.push_back(c);
            }
            if (!text::trim(element).empty()) {
                elements.push_back(element);
            }
            for (const std::string& e : elements) {
                array.push_back(parse_value(e));
            }
            return array;
        }
        // number
        bool looks_float = v.find('.') != std::string::npos ||
                           v.find('e') != std::string::npos ||
                           v.find('E') != std::string::npos;
        try {
            std::size_t consumed = 0;
            if (looks_float) {
                const double d = std::stod(v, &consumed);
                if (consumed != v.size()) {
                    fail("malformed number: " + v);
                }
                return d;
            }
            const std::int64_t i = std::stoll(v, &consumed);
            if (consumed != v.size()) {
                fail("malformed number: " + v);
            }
            return i;
        } catch (const std::exception&) {
            fail("unrecognized value: " + v);
        }
        return nullptr;
    };

    auto navigate = [&](const std::string& dotted, bool array_of_tables) {
        std::vector<std::string> parts;
        std::string part;
        std::istringstream stream(dotted);
        while (std::getline(stream, part, '.')) {
            const std::string key = text::trim(part);
            if (key.empty()) {
                fail("empty table name component in [" + dotted + "]");
            }
            parts.push_back(key);
        }
        nlohmann::json* node = &root;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            const bool last = i + 1 == parts.size();
            nlohmann::json& slot = (*node)[parts[i]];
            if (last && array_of_tables) {
                if (slot.is_null()) {
                    slot = nlohmann::json::array();
                } else if (!slot.is_array()) {
                    fail("[" + dotted + "] conflicts with an existing value");
                }
                slot.push_back(nlohmann::json::object());
                node = &slot.back();
            } else {
                if (slot.is_null()) {
                    slot = nlohmann::json::object();
                } else if (slot.is_array() && !slot.empty()) {
                    node = &slot.back();
                    continue;
                } else if (!slot.is_object()) {
                    fail("[" + dotted + "] conflicts with an existing value");
                }
                node = &slot;
            }
        }
        current = node;
    };

    std::istringstream stream(source);
    std::string raw_line;
    while (std::getline(stream, raw_line)) {
        ++line_no;
        const std::string line = text::trim(strip_comment(raw_line));
        if (line.empty()) {
            continue;
        }
        if (line.size() >= 4 && line.rfind("[[", 0) == 0 && line.substr(line.size() - 2) == "]]") {
            navigate(line.substr(2, line.size() - 4), true);
            continue;
        }
        if (line.front() == '[' && line.back() == ']') {
            navigate(line.substr(1, line.size() - 2), false);
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            fail("expected key = value, got: " + line);
        }
        const std::string key = text::trim(line.substr(0, eq));
        if (key.empty()) {
            fail("empty key");
        }
        for (char c : key) {
            const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
            if (!ok) {
                fail("unsupported key '" + key + "' (bare keys only)");
            }
        }
        if (current->contains(key)) {
            fail("duplicate key '" + key + "'");
        }
        (*current)[key] = parse_value(line.substr(eq + 1));
    }
    return root;
}

} // namespace toml_mini

namespace detail {

template <typename T>
T config_get(const nlohmann::json& table, const std::string& section, const std::string& key,
             T fallback) {
    if (!table.contains(key)) {
        return fallback;
    }
    try {
        return table.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key " + section + "." + key + " has the wrong type");
    }
}

inline void reject_unknown_keys(const nlohmann::json& table, const std::string& section,
                                std::initializer_list<const char*> known) {
    for (const auto& [key, value] : table.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (key == k) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw ConfigError("unknown config key " + section + "." + key);
        }
    }
}

} // namespace detail

/// Loads a TOML run config. See the README for the schema; unknown keys are
/// rejected so typos fail loudly.
inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const nlohmann::json doc = toml_mini::parse(buffer.str(), path.string());

    detail::reject_unknown_keys(doc, "(top level)", {"backend", "pool", "cache", "run", "tasks"});
    RunConfig config;

    if (doc.contains("backend")) {
        const nlohmann::json& b = doc["backend"];
        detail::reject_unknown_keys(
            b, "backend",
            {"kind", "model", "endpoint", "api_key_env", "auth_header", "extra_headers",
             "temperature", "scoring_temperature", "max_tokens", "max_in_flight",
             "retry_attempts", "retry_backoff_ms", "script"});
        BackendSettings& s = config.backend;
        s.kind = detail::config_get<std::string>(b, "backend", "kind", s.kind);
        if (s.kind != "scripted" && s.kind != "http") {
            throw ConfigError("backend.kind must be 'scripted' or 'http'");
        }
        s.model = detail::config_get<std::string>(b, "backend", "model", s.model);
        s.endpoint = detail::config_get<std::string>(b, "backend", "endpoint", s.endpoint);
        s.api_key_env = detail::config_get<std::string>(b, "backend", "api_key_env", s.api_key_env);
        s.auth_header = detail::config_get<std::string>(b, "backend", "auth_header", s.auth_header);
        s.extra_headers = detail::config_get<std::vector<std::string>>(b, "backend",
                                                                       "extra_headers", {});
        s.temperature = detail::config_get<double>(b, "backend", "temperature", s.temperature);
        s.scoring_temperature =
            detail::config_get<double>(b, "backend", "scoring_temperature", s.scoring_temperature);
        s.max_tokens = detail::config_get<int>(b, "backend", "max_tokens", s.max_tokens);
        s.max_in_flight = detail::config_get<int>(b, "backend", "max_in_flight", s.max_in_flight);
        s.retry_attempts =
            detail::config_get<int>(b, "backend", "retry_attempts", s.retry_attempts);
        s.retry_backoff_ms =
            detail::config_get<int>(b, "backend", "retry_backoff_ms", s.retry_backoff_ms);
        s.script = detail::config_get<std::string>(b, "backend", "script", s.script);
    }
    if (doc.contains("pool")) {
        detail::reject_unknown_keys(doc["pool"], "pool", {"dir"});
        config.pool_dir = detail::config_get<std::string>(doc["pool"], "pool", "dir",
                                                          config.pool_dir);
    }
    if (doc.contains("cache")) {
        detail::reject_unknown_keys(doc["cache"], "cache", {"mode", "dir"});
        config.cache_mode = cache_mode_from_string(
            detail::config_get<std::string>(doc["cache"], "cache", "mode", "off"));
        config.cache_dir = detail::config_get<std::string>(doc["cache"], "cache", "dir",
                                                           config.cache_dir);
    }
    if (doc.contains("run")) {
        const nlohmann::json& r = doc["run"];
        detail::reject_unknown_keys(
            r, "run", {"policy", "parallelism", "output_dir", "seed_note", "replay_from"});
        config.policy = parse_policy(detail::config_get<std::string>(r, "run", "policy", "mrp"));
        const std::int64_t parallelism =
            detail::config_get<std::int64_t>(r, "run", "parallelism", 1);
        if (parallelism < 1) {
            throw ConfigError("run.parallelism must be >= 1");
        }
        config.parallelism = static_cast<std::size_t>(parallelism);
        config.output_dir = detail::config_get<std::string>(r, "run", "output_dir",
                                                            config.output_dir);
        config.seed_note = detail::config_get<std::string>(r, "run", "seed_note", "");
        config.replay_from = detail::config_get<std::string>(r, "run", "replay_from", "");
    }
    if (doc.contains("tasks")) {
        if (!doc["tasks"].is_array()) {
            throw ConfigError("tasks must be listed as [[tasks]] tables");
        }
        for (const nlohmann::json& t : doc["tasks"]) {
            detail::reject_unknown_keys(t, "tasks", {"kind", "path", "limit"});
            TaskSpec spec;
            if (!t.contains("kind") || !t.contains("path")) {
                throw ConfigError("every [[tasks]] entry needs kind and path");
            }
            try {
                spec.kind = task_kind_from_string(t["kind"].get<std::string>());
            } catch (const DatasetError& e) {
                throw ConfigError(e.what());
            }
            spec.path = t["path"].get<std::string>();
            if (t.contains("limit")) {
                const std::int64_t limit = t["limit"].get<std::int64_t>();
                if (limit < 1) {
                    throw ConfigError("tasks.limit must be >= 1");
                }
                spec.limit = static_cast<std::size_t>(limit);
            }
            config.tasks.push_back(std::move(spec));
        }
    }
    config.validate();
    return config;
}

} // namespace mrp
