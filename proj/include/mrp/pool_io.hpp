#pragma once

#include "mrp/digest.hpp"
#include "mrp/errors.hpp"
#include "mrp/method.hpp"
#include "mrp/text_norm.hpp"

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace mrp {

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingPromptFile("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Loads a pool from a prompt data directory:
///   pool.manifest.json  — method ids in order, file names, sha256 checksums
///   meta.txt            — the meta-reasoning prompt
///   <id>.desc.txt / <id>.exec.txt per method
/// Checksum mismatches are reported as warnings, not errors, so the files
/// stay editable; missing files are errors.
inline Pool load_pool(const std::filesystem::path& dir,
                      std::vector<std::string>* warnings = nullptr) {
    namespace fs = std::filesystem;
    const fs::path manifest_path = dir / "pool.manifest.json";
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw MissingPromptFile("unreadable pool manifest " + manifest_path.string() + ": " +
                                e.what());
    }

    auto warn = [&](const std::string& message) {
        if (warnings != nullptr) {
            warnings->push_back(message);
        }
    };
    auto load_checked = [&](const fs::path& path, const std::string& expected_sha) {
        std::string raw = read_file(path);
        if (!expected_sha.empty() && sha256_hex(raw) != expected_sha) {
            warn("checksum mismatch for " + path.string() + " (file was edited)");
        }
        return text::rstrip(raw);
    };

    const std::string meta_file = manifest.value("meta", "meta.txt");
    Pool pool(load_checked(dir / meta_file, manifest.value("meta_sha256", "")));

    if (!manifest.contains("methods") || !manifest["methods"].is_array()) {
        throw MissingPromptFile("pool manifest " + manifest_path.string() +
                                " has no 'methods' array");
    }
    for (const nlohmann::json& entry : manifest["methods"]) {
        MethodDescriptor d;
        d.id = entry.at("id").get<std::string>();
        d.display_name = entry.value("display_name", d.id);
        d.source_citation = entry.value("source", "");
        const std::string desc_file = entry.value("desc", d.id + ".desc.txt");
        const std::string exec_file = entry.value("exec", d.id + ".exec.txt");
        d.description_prompt = load_checked(dir / desc_file, entry.value("desc_sha256", ""));
        d.execution_template = load_checked(dir / exec_file, entry.value("exec_sha256", ""));
        pool = register_method(std::move(pool), std::move(d));
    }
    return pool;
}

/// Directory holding the shipped prompt files: $MRP_POOL_DIR if set, else
/// ./prompts.
inline std::filesystem::path default_pool_dir() {
    if (const char* env = std::getenv("MRP_POOL_DIR")) {
        return env;
    }
    return "prompts";
}

/// The stock seven-method pool, read from a prompt data directory.
inline Pool default_pool(const std::filesystem::path& dir,
                         std::vector<std::string>* warnings = nullptr) {
    return load_pool(dir, warnings);
}

inline Pool default_pool() { return default_pool(default_pool_dir()); }

/// Checksum of the manifest file itself, recorded in run manifests so a run
/// pins the exact prompt set it used. Empty when the manifest is absent.
inline std::string pool_manifest_checksum(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::exists(dir / "pool.manifest.json", ec)) {
        return "";
    }
    return sha256_hex(read_file(dir / "pool.manifest.json"));
}

} // namespace mrp
