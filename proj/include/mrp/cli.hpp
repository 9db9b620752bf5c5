#pragma once

#include "mrp/config.hpp"
#include "mrp/errors.hpp"
#include "mrp/harness.hpp"
#include "mrp/http_backend.hpp"
#include "mrp/pool_io.hpp"
#include "mrp/selector.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace mrp::cli {

struct RouteCmd {
    std::string config_path;
    std::optional<std::string> input;
    std::optional<std::string> input_file;
    bool json = false;
};

struct BenchCmd {
    std::string config_path;
    std::optional<std::string> policy;
    std::optional<std::string> cache;
    bool json = false;
};

struct PoolListCmd {
    std::string pool_dir;
};

struct PoolShowCmd {
    std::string pool_dir;
    std::string id;
};

struct ReplayCmd {
    std::string run_dir;
    bool json = false;
};

struct HelpCmd {
    std::string text;
};

using Command = std::variant<RouteCmd, BenchCmd, PoolListCmd, PoolShowCmd, ReplayCmd, HelpCmd>;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

namespace detail {

inline std::unique_ptr<CLI::App> build_app(RouteCmd& route, BenchCmd& bench,
                                           PoolListCmd& pool_list, PoolShowCmd& pool_show,
                                           ReplayCmd& replay) {
    auto app = std::make_unique<CLI::App>(
        "mrp: score a pool of reasoning-method prompts against a task, run the best one, and "
        "benchmark the whole policy");
    app->name("mrp");
    app->require_subcommand(1);

    CLI::App* route_cmd =
        app->add_subcommand("route", "Pick and run the best reasoning method for one input");
    route_cmd->add_option("--config", route.config_path, "TOML run config")->required();
    CLI::Option* inline_input = route_cmd->add_option("--input", route.input, "Task input text");
    route_cmd->add_option("--input-file", route.input_file, "File holding the task input")
        ->excludes(inline_input);
    route_cmd->add_flag("--json", route.json, "Machine-readable output");

    CLI::App* bench_cmd = app->add_subcommand("bench", "Run the configured benchmark tasks");
    bench_cmd->add_option("--config", bench.config_path, "TOML run config")->required();
    bench_cmd->add_option("--policy", bench.policy,
                          "Override policy: mrp, fixed:<id> or oracle_replay")
        ->expected(1);
    bench_cmd->add_option("--cache", bench.cache, "Override cache mode: off, record or replay")
        ->expected(1);
    bench_cmd->add_flag("--json", bench.json, "Print report.json to stdout");

    CLI::App* pool_cmd = app->add_subcommand("pool", "Inspect the reasoning pool");
    pool_cmd->require_subcommand(1);
    CLI::App* list_cmd = pool_cmd->add_subcommand("list", "List registered methods in order");
    list_cmd->add_option("--pool-dir", pool_list.pool_dir, "Prompt data directory");
    CLI::App* show_cmd = pool_cmd->add_subcommand("show", "Show one method's prompts");
    show_cmd->add_option("id", pool_show.id, "Method id")->required();
    show_cmd->add_option("--pool-dir", pool_show.pool_dir, "Prompt data directory");

    CLI::App* replay_cmd =
        app->add_subcommand("replay", "Re-grade a stored run offline and rewrite its reports");
    replay_cmd->add_option("run_dir", replay.run_dir, "Run directory with run.json")->required();
    replay_cmd->add_flag("--json", replay.json, "Print report.json to stdout");

    return app;
}

} // namespace detail

/// argv (without the program name) to a Command. Throws UsageError on bad
/// grammar; --help comes back as HelpCmd.
inline Command parse_args(const std::vector<std::string>& args) {
    RouteCmd route;
    BenchCmd bench;
    PoolListCmd pool_list{std::string(default_pool_dir())};
    PoolShowCmd pool_show{std::string(default_pool_dir()), ""};
    ReplayCmd replay;
    std::unique_ptr<CLI::App> app = detail::build_app(route, bench, pool_list, pool_show, replay);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app->parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::ostringstream help;
        help << app->help();
        return HelpCmd{help.str()};
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }

    if (app->got_subcommand("route")) {
        if (!route.input && !route.input_file) {
            throw UsageError("route needs --input or --input-file");
        }
        return route;
    }
    if (app->got_subcommand("bench")) {
        if (bench.policy) {
            parse_policy(*bench.policy); // validate grammar early
        }
        if (bench.cache) {
            cache_mode_from_string(*bench.cache);
        }
        return bench;
    }
    if (app->got_subcommand("pool")) {
        CLI::App* pool_cmd = app->get_subcommand("pool");
        if (pool_cmd->got_subcommand("show")) {
            return pool_show;
        }
        return pool_list;
    }
    if (app->got_subcommand("replay")) {
        return replay;
    }
    throw UsageError("no subcommand given");
}

namespace detail {

inline std::shared_ptr<CompletionBackend> make_backend(const RunConfig& config) {
    if (config.backend.kind == "scripted") {
        if (config.backend.script.empty()) {
            if (config.cache_mode == CacheModeOpt::replay) {
                return nullptr; // replay never consults the inner backend
            }
            throw ConfigError("scripted backend needs backend.script");
        }
        return ScriptedBackend::from_file(config.backend.script);
    }
    if (config.backend.endpoint.empty()) {
        if (config.cache_mode == CacheModeOpt::replay) {
            return nullptr;
        }
        throw ConfigError("http backend needs backend.endpoint");
    }
    HttpBackendConfig http;
    http.endpoint = config.backend.endpoint;
    http.api_key_env = config.backend.api_key_env;
    http.auth_header = config.backend.auth_header;
    http.extra_headers = config.backend.extra_headers;
    http.attempts = config.backend.retry_attempts;
    http.backoff_ms = config.backend.retry_backoff_ms;
    return std::make_shared<ConcurrencyLimitedBackend>(std::make_shared<HttpBackend>(http),
                                                       config.backend.max_in_flight);
}

inline std::shared_ptr<CompletionBackend> wrap_cache(const RunConfig& config,
                                                     std::shared_ptr<CompletionBackend> inner) {
    switch (config.cache_mode) {
    case CacheModeOpt::off: return inner;
    case CacheModeOpt::record:
        return std::make_shared<CachingBackend>(config.cache_dir, CacheMode::record, inner);
    case CacheModeOpt::replay:
        return std::make_shared<CachingBackend>(config.cache_dir, CacheMode::replay, inner);
    }
    return inner;
}

inline void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
    for (const std::string& w : warnings) {
        err << "warning: " << w << "\n";
    }
}

inline int run_route(const RouteCmd& cmd, std::ostream& out, std::ostream& err) {
    RunConfig config = load_run_config(cmd.config_path);
    std::vector<std::string> warnings;
    const Pool pool = load_pool(config.pool_dir, &warnings);
    print_warnings(warnings, err);

    std::string input;
    if (cmd.input) {
        input = *cmd.input;
    } else {
        std::ifstream in(*cmd.input_file, std::ios::binary);
        if (!in) {
            throw Error("cannot open input file " + *cmd.input_file);
        }
        std::ostringstream buffer;
        buffer << in.rdbuf();
        input = text::rstrip(buffer.str());
    }

    std::shared_ptr<CompletionBackend> backend = wrap_cache(config, make_backend(config));
    if (backend == nullptr) {
        throw ConfigError("no backend available");
    }
    const Transcript transcript = route_and_solve(*backend, pool, input, call_settings(config));

    const std::string rel_path =
        "transcripts/" + sha256_hex(input) + ".transcript.json";
    nlohmann::json doc = transcript_to_json(transcript);
    doc["policy"] = "mrp";
    mrp::detail::write_text_file(std::filesystem::path(config.output_dir) / rel_path,
                                 doc.dump(2) + "\n");

    if (cmd.json) {
        nlohmann::json scores = nlohmann::json::array();
        for (const MethodScore& s : transcript.decision.scores) {
            scores.push_back({{"method_id", s.method_id},
                              {"value", format_fixed(s.value)},
                              {"parse_status", to_string(s.parse_status)}});
        }
        out << nlohmann::json{{"chosen", transcript.decision.chosen_method_id},
                              {"chosen_index", transcript.decision.chosen_index},
                              {"tie_broken", transcript.decision.tie_broken},
                              {"scores", scores},
                              {"final_output", transcript.final_output},
                              {"transcript", rel_path}}
                   .dump(2)
            << "\n";
    } else {
        out << "chosen: " << transcript.decision.chosen_method_id << "\n";
        out << "scores:\n";
        for (const MethodScore& s : transcript.decision.scores) {
            out << "  " << s.method_id << " " << format_fixed(s.value) << " "
                << to_string(s.parse_status) << "\n";
        }
        out << "output:\n" << transcript.final_output << "\n";
        err << "transcript: " << (std::filesystem::path(config.output_dir) / rel_path).string()
            << "\n";
    }
    return kExitOk;
}

inline int run_bench(const BenchCmd& cmd, std::ostream& out, std::ostream& err) {
    RunConfig config = load_run_config(cmd.config_path);
    if (cmd.policy) {
        config.policy = parse_policy(*cmd.policy);
    }
    if (cmd.cache) {
        config.cache_mode = cache_mode_from_string(*cmd.cache);
    }
    std::vector<std::string> warnings;
    const Pool pool = load_pool(config.pool_dir, &warnings);
    print_warnings(warnings, err);

    const BenchmarkRun run = run_benchmark(config, make_backend(config), pool);
    write_reports(run, config.output_dir);
    print_warnings(run.warnings, err);

    if (cmd.json) {
        out << emit_report({report_from_run(run)}, ReportFormat::json);
    } else {
        out << emit_report({report_from_run(run)}, ReportFormat::markdown);
        err << "run manifest: "
            << (std::filesystem::path(config.output_dir) / "run.json").string() << "\n";
    }
    return kExitOk;
}

inline int run_pool_list(const PoolListCmd& cmd, std::ostream& out, std::ostream& err) {
    std::vector<std::string> warnings;
    const Pool pool = load_pool(cmd.pool_dir, &warnings);
    print_warnings(warnings, err);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const MethodDescriptor& m = pool.at(i);
        out << i << "  " << m.id << "  " << m.display_name << "\n";
    }
    return kExitOk;
}

inline int run_pool_show(const PoolShowCmd& cmd, std::ostream& out, std::ostream& err) {
    std::vector<std::string> warnings;
    const Pool pool = load_pool(cmd.pool_dir, &warnings);
    print_warnings(warnings, err);
    const MethodDescriptor* method = pool.find(cmd.id);
    if (method == nullptr) {
        throw Error("no method with id '" + cmd.id + "'");
    }
    out << "id: " << method->id << "\n";
    out << "display_name: " << method->display_name << "\n";
    out << "source: " << method->source_citation << "\n";
    out << "description:\n" << method->description_prompt << "\n\n";
    out << "execution template:\n" << method->execution_template << "\n";
    return kExitOk;
}

inline int run_replay(const ReplayCmd& cmd, std::ostream& out, std::ostream& err) {
    const std::filesystem::path run_dir = cmd.run_dir;
    if (!std::filesystem::exists(run_dir / "run.json")) {
        throw Error("no run.json under " + run_dir.string());
    }
    const BenchmarkRun run = replay_run(run_dir);
    write_run_manifest(run, run_dir);
    write_reports(run, run_dir);
    if (cmd.json) {
        out << emit_report({report_from_run(run)}, ReportFormat::json);
    } else {
        out << emit_report({report_from_run(run)}, ReportFormat::markdown);
        err << "re-graded " << run.tasks.size() << " task(s) offline\n";
    }
    return kExitOk;
}

} // namespace detail

inline int dispatch(const Command& command, std::ostream& out, std::ostream& err) {
    return std::visit(
        [&](const auto& cmd) -> int {
            using T = std::decay_t<decltype(cmd)>;
            if constexpr (std::is_same_v<T, HelpCmd>) {
                out << cmd.text;
                return kExitOk;
            } else if constexpr (std::is_same_v<T, RouteCmd>) {
                return detail::run_route(cmd, out, err);
            } else if constexpr (std::is_same_v<T, BenchCmd>) {
                return detail::run_bench(cmd, out, err);
            } else if constexpr (std::is_same_v<T, PoolListCmd>) {
                return detail::run_pool_list(cmd, out, err);
            } else if constexpr (std::is_same_v<T, PoolShowCmd>) {
                return detail::run_pool_show(cmd, out, err);
            } else {
                return detail::run_replay(cmd, out, err);
            }
        },
        command);
}

/// Full CLI entry: parse, dispatch, map errors to exit codes (1 usage, 2
/// runtime).
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return dispatch(parse_args(args), out, err);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

} // namespace mrp::cli
