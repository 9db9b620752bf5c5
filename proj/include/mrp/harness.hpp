#pragma once

#include "mrp/backend.hpp"
#include "mrp/cache.hpp"
#include "mrp/digest.hpp"
#include "mrp/errors.hpp"
#include "mrp/metrics.hpp"
#include "mrp/method.hpp"
#include "mrp/pool_io.hpp"
#include "mrp/selector.hpp"
#include "mrp/tasks.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace mrp {

enum class PolicyKind { mrp, fixed, oracle_replay };

struct PolicySpec {
    PolicyKind kind = PolicyKind::mrp;
    std::string fixed_method_id;
};

inline PolicySpec parse_policy(const std::string& s) {
    if (s == "mrp") {
        return {PolicyKind::mrp, ""};
    }
    if (s == "oracle_replay") {
        return {PolicyKind::oracle_replay, ""};
    }
    if (s.rfind("fixed:", 0) == 0 && s.size() > 6) {
        return {PolicyKind::fixed, s.substr(6)};
    }
    throw ConfigError("unknown policy '" + s + "' (want mrp, fixed:<id> or oracle_replay)");
}

inline std::string to_string(const PolicySpec& policy) {
    switch (policy.kind) {
    case PolicyKind::mrp: return "mrp";
    case PolicyKind::fixed: return "fixed:" + policy.fixed_method_id;
    case PolicyKind::oracle_replay: return "oracle_replay";
    }
    return "?";
}

enum class CacheModeOpt { off, record, replay };

inline CacheModeOpt cache_mode_from_string(const std::string& s) {
    if (s == "off") return CacheModeOpt::off;
    if (s == "record") return CacheModeOpt::record;
    if (s == "replay") return CacheModeOpt::replay;
    throw ConfigError("unknown cache mode '" + s + "' (want off, record or replay)");
}

inline std::string_view to_string(CacheModeOpt mode) {
    switch (mode) {
    case CacheModeOpt::off: return "off";
    case CacheModeOpt::record: return "record";
    case CacheModeOpt::replay: return "replay";
    }
    return "?";
}

struct TaskSpec {
    TaskKind kind = TaskKind::gsm8k;
    std::string path;
    std::size_t limit = std::numeric_limits<std::size_t>::max();
};

struct BackendSettings {
    std::string kind = "scripted"; // scripted | http
    std::string model = "gpt-4";
    std::string endpoint;
    std::string api_key_env = "MRP_API_KEY";
    std::string auth_header = "Authorization: Bearer {key}";
    std::vector<std::string> extra_headers;
    double temperature = 0.0; // execution calls
    double scoring_temperature = 0.0;
    int max_tokens = 1024;
    int max_in_flight = 4;
    int retry_attempts = 3;
    int retry_backoff_ms = 1000;
    std::string script; // scripted replies file
};

struct RunConfig {
    std::string pool_dir = "prompts";
    BackendSettings backend;
    CacheModeOpt cache_mode = CacheModeOpt::off;
    std::string cache_dir = "cache";
    PolicySpec policy;
    std::size_t parallelism = 1;
    std::string output_dir = "out";
    std::string seed_note;
    std::string replay_from;
    std::vector<TaskSpec> tasks;

    void validate() const {
        if (parallelism < 1) {
            throw ConfigError("parallelism must be >= 1");
        }
        for (const TaskSpec& t : tasks) {
            if (t.limit < 1) {
                throw ConfigError("task limit must be >= 1");
            }
            if (t.path.empty()) {
                throw ConfigError("task has no dataset path");
            }
        }
        if (policy.kind == PolicyKind::oracle_replay && replay_from.empty()) {
            throw ConfigError("oracle_replay policy needs run.replay_from");
        }
    }
};

inline CallSettings call_settings(const RunConfig& config) {
    CallSettings s;
    s.model = config.backend.model;
    s.scoring_temperature = config.backend.scoring_temperature;
    s.execution_temperature = config.backend.temperature;
    s.max_tokens = config.backend.max_tokens;
    return s;
}

inline nlohmann::json config_snapshot(const RunConfig& c) {
    nlohmann::json tasks = nlohmann::json::array();
    for (const TaskSpec& t : c.tasks) {
        nlohmann::json task{{"kind", to_string(t.kind)}, {"path", t.path}};
        if (t.limit != std::numeric_limits<std::size_t>::max()) {
            task["limit"] = t.limit;
        }
        tasks.push_back(task);
    }
    return {{"pool_dir", c.pool_dir},
            {"backend",
             {{"kind", c.backend.kind},
              {"model", c.backend.model},
              {"endpoint", c.backend.endpoint},
              {"temperature", c.backend.temperature},
              {"scoring_temperature", c.backend.scoring_temperature},
              {"max_tokens", c.backend.max_tokens},
              {"max_in_flight", c.backend.max_in_flight},
              {"script", c.backend.script}}},
            {"cache", {{"mode", to_string(c.cache_mode)}, {"dir", c.cache_dir}}},
            {"policy", to_string(c.policy)},
            {"parallelism", c.parallelism},
            {"output_dir", c.output_dir},
            {"seed_note", c.seed_note},
            {"replay_from", c.replay_from},
            {"tasks", tasks}};
}

struct CallCounts {
    long scoring = 0;
    long execution = 0;
    long judge = 0;
    long scoring_retries = 0;
    long judge_retries = 0;
    long cache_hits = 0;

    void add(const CallLogEntry& e) {
        if (e.cached) {
            ++cache_hits;
        }
        switch (e.purpose) {
        case Purpose::scoring: e.retry ? ++scoring_retries : ++scoring; break;
        case Purpose::execution: ++execution; break;
        case Purpose::judge: e.retry ? ++judge_retries : ++judge; break;
        }
    }

    long total_primary() const { return scoring + execution + judge; }
};

struct ExampleRecord {
    std::string example_id;
    std::string transcript_path; // relative to the run directory
    Rational score;
    std::string detail;
};

struct TaskResult {
    TaskKind kind = TaskKind::gsm8k;
    std::string dataset_path;
    std::vector<ExampleRecord> records;
    Rational accuracy;
    bool complete = true;
};

struct BenchmarkRun {
    nlohmann::json config;
    std::string policy_label;
    std::string pool_checksum;
    std::vector<TaskResult> tasks;
    CallCounts counts;
    std::vector<std::string> warnings;
    std::string started_at;
    std::string finished_at;
    bool complete = true;
    std::string abort_reason;
};

namespace detail {

inline Rational mean_score(const std::vector<ExampleRecord>& records) {
    Rational sum = 0;
    for (const ExampleRecord& r : records) {
        sum += r.score;
    }
    return records.empty() ? Rational(0) : sum / static_cast<int>(records.size());
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << content;
}

inline nlohmann::json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed JSON in " + path.string() + ": " + e.what());
    }
}

struct ExampleOutcome {
    Verdict verdict;
    std::string transcript_rel_path;
    std::vector<CallLogEntry> calls;
};

} // namespace detail

inline nlohmann::json run_to_manifest(const BenchmarkRun& run) {
    nlohmann::json tasks = nlohmann::json::array();
    std::vector<Rational> accuracies;
    for (const TaskResult& task : run.tasks) {
        nlohmann::json examples = nlohmann::json::array();
        for (const ExampleRecord& r : task.records) {
            examples.push_back({{"id", r.example_id},
                                {"transcript", r.transcript_path},
                                {"score", to_fraction_string(r.score)},
                                {"score_display", format_fixed(r.score)},
                                {"detail", r.detail}});
        }
        tasks.push_back({{"kind", to_string(task.kind)},
                         {"path", task.dataset_path},
                         {"count", task.records.size()},
                         {"accuracy", format_fixed(task.accuracy)},
                         {"accuracy_exact", to_fraction_string(task.accuracy)},
                         {"complete", task.complete},
                         {"examples", examples}});
        accuracies.push_back(task.accuracy);
    }
    nlohmann::json j{{"schema", "mrp.run/1"},
                     {"status", run.complete ? "complete" : "incomplete"},
                     {"policy", run.policy_label},
                     {"config", run.config},
                     {"pool_manifest_checksum", run.pool_checksum},
                     {"started_at", run.started_at},
                     {"finished_at", run.finished_at},
                     {"warnings", run.warnings},
                     {"call_counts",
                      {{"scoring", run.counts.scoring},
                       {"execution", run.counts.execution},
                       {"judge", run.counts.judge},
                       {"scoring_retries", run.counts.scoring_retries},
                       {"judge_retries", run.counts.judge_retries},
                       {"cache_hits", run.counts.cache_hits},
                       {"total_primary", run.counts.total_primary()}}},
                     {"tasks", tasks}};
    if (!run.complete) {
        j["abort_reason"] = run.abort_reason;
    }
    if (run.complete && !accuracies.empty()) {
        j["macro_arithmetic"] = format_fixed(arithmetic_macro(accuracies));
        const std::optional<Rational> harmonic = harmonic_macro(accuracies);
        j["macro_harmonic"] = harmonic ? nlohmann::json(format_fixed(*harmonic))
                                       : nlohmann::json("undefined");
    }
    return j;
}

inline void write_run_manifest(const BenchmarkRun& run, const std::filesystem::path& dir) {
    detail::write_text_file(dir / "run.json", run_to_manifest(run).dump(2) + "\n");
}

/// One table row summarizing a run: task columns in run order.
inline MetricReport report_from_run(const BenchmarkRun& run) {
    std::vector<std::string> columns;
    std::vector<Rational> accuracies;
    for (const TaskResult& task : run.tasks) {
        columns.emplace_back(to_string(task.kind));
        accuracies.push_back(task.accuracy);
    }
    return make_metric_report(run.policy_label, std::move(columns), std::move(accuracies));
}

inline void write_reports(const BenchmarkRun& run, const std::filesystem::path& dir) {
    const std::vector<MetricReport> reports{report_from_run(run)};
    detail::write_text_file(dir / "report.md", emit_report(reports, ReportFormat::markdown));
    detail::write_text_file(dir / "report.csv", emit_report(reports, ReportFormat::csv));
    detail::write_text_file(dir / "report.json", emit_report(reports, ReportFormat::json));
}

/// Re-grades a stored run from its manifest and transcripts, with no backend
/// calls at all. Deterministic scorers run afresh; judge-graded scores are
/// taken from the stored records since recomputing them would need a model.
inline BenchmarkRun replay_run(const std::filesystem::path& run_dir) {
    const nlohmann::json manifest = detail::load_json_file(run_dir / "run.json");

    BenchmarkRun run;
    run.config = manifest.at("config");
    run.policy_label = manifest.value("policy", "mrp");
    run.pool_checksum = manifest.value("pool_manifest_checksum", "");
    run.started_at = utc_timestamp();

    for (const nlohmann::json& stored_task : manifest.at("tasks")) {
        const TaskKind kind = task_kind_from_string(stored_task.at("kind").get<std::string>());
        const std::string dataset_path = stored_task.at("path").get<std::string>();
        std::vector<Example> examples = load_dataset(dataset_path, kind);
        std::map<std::string, const Example*> by_id;
        for (const Example& ex : examples) {
            by_id[ex.id] = &ex;
        }

        TaskResult result;
        result.kind = kind;
        result.dataset_path = dataset_path;
        result.complete = stored_task.value("complete", true);
        for (const nlohmann::json& record : stored_task.at("examples")) {
            const std::string id = record.at("id").get<std::string>();
            auto it = by_id.find(id);
            if (it == by_id.end()) {
                throw DatasetError("example '" + id + "' from the stored run is not in " +
                                   dataset_path);
            }
            ExampleRecord out;
            out.example_id = id;
            out.transcript_path = record.at("transcript").get<std::string>();

            if (kind == TaskKind::code_readability) {
                // judged task: reuse the stored verdict
                const std::string fraction = record.at("score").get<std::string>();
                const std::size_t slash = fraction.find('/');
                out.score = slash == std::string::npos
                                ? rational_from_decimal(fraction)
                                : Rational(BigInt(fraction.substr(0, slash)),
                                           BigInt(fraction.substr(slash + 1)));
                out.detail = "reused stored judge verdict";
            } else {
                const nlohmann::json transcript =
                    detail::load_json_file(run_dir / out.transcript_path);
                const std::string output = transcript.at("final_output").get<std::string>();
                Verdict v = grade(*it->second, output, nullptr, CallSettings{});
                out.score = v.score;
                out.detail = v.detail;
            }
            result.records.push_back(std::move(out));
        }
        std::sort(result.records.begin(), result.records.end(),
                  [](const ExampleRecord& a, const ExampleRecord& b) {
                      return a.example_id < b.example_id;
                  });
        result.accuracy = detail::mean_score(result.records);
        run.tasks.push_back(std::move(result));
    }
    run.finished_at = utc_timestamp();
    return run;
}

/// Runs the configured policy over every configured task and persists the
/// run: transcripts as it goes, then the run manifest. A backend failure
/// aborts the run, writes an incomplete manifest, and rethrows.
inline BenchmarkRun run_benchmark(const RunConfig& config,
                                  std::shared_ptr<CompletionBackend> inner, const Pool& pool) {
    config.validate();
    if (config.policy.kind == PolicyKind::oracle_replay) {
        BenchmarkRun run = replay_run(config.replay_from);
        write_run_manifest(run, config.output_dir);
        return run;
    }
    if (config.policy.kind == PolicyKind::fixed && !pool.contains(config.policy.fixed_method_id)) {
        throw ConfigError("fixed policy references unknown method '" +
                          config.policy.fixed_method_id + "'");
    }

    std::shared_ptr<CompletionBackend> backend = inner;
    if (config.cache_mode == CacheModeOpt::record) {
        backend = std::make_shared<CachingBackend>(config.cache_dir, CacheMode::record, inner);
    } else if (config.cache_mode == CacheModeOpt::replay) {
        backend = std::make_shared<CachingBackend>(config.cache_dir, CacheMode::replay, inner);
    }
    if (backend == nullptr) {
        throw ConfigError("no backend available (cache off needs a live or scripted backend)");
    }

    BenchmarkRun run;
    run.config = config_snapshot(config);
    run.policy_label = to_string(config.policy);
    run.pool_checksum = pool_manifest_checksum(config.pool_dir);
    run.started_at = utc_timestamp();

    // fail fast: all datasets load before any model call
    std::vector<std::vector<Example>> datasets;
    for (const TaskSpec& spec : config.tasks) {
        std::string warning;
        std::vector<Example> examples = load_dataset(spec.path, spec.kind, &warning);
        if (!warning.empty()) {
            run.warnings.push_back(warning);
        }
        if (examples.size() > spec.limit) {
            examples.resize(spec.limit);
        }
        datasets.push_back(std::move(examples));
    }

    const CallSettings settings = call_settings(config);
    const std::filesystem::path out_dir = config.output_dir;

    auto process_example = [&](const Example& example) {
        detail::ExampleOutcome outcome;
        nlohmann::json transcript_json;

        std::string output;
        if (config.policy.kind == PolicyKind::mrp) {
            Transcript t = route_and_solve(*backend, pool, example.input, settings);
            output = t.final_output;
            outcome.calls = t.call_log;
            transcript_json = transcript_to_json(t);
            transcript_json["policy"] = run.policy_label;
        } else { // fixed
            const MethodDescriptor& method = *pool.find(config.policy.fixed_method_id);
            const PromptText prompt = assemble_execution_prompt(method, example.input);
            CompletionRequest request;
            request.model = settings.model;
            request.messages = {{Role::user, prompt.text()}};
            request.temperature = settings.execution_temperature;
            request.max_tokens = settings.max_tokens;
            request.purpose = Purpose::execution;
            Completion completion = backend->complete(request);
            outcome.calls.push_back(
                {Purpose::execution, cache_key(request), completion.from_cache, false});
            output = completion.text;
            transcript_json = {{"schema", "mrp.transcript/1"},
                               {"input", example.input},
                               {"policy", run.policy_label},
                               {"method_id", method.id},
                               {"execution_prompt", to_json_value(prompt)},
                               {"final_output", output},
                               {"error_labels", nlohmann::json::array()}};
        }

        Verdict verdict;
        try {
            verdict = grade(example, output, backend.get(), settings, &outcome.calls);
        } catch (const JudgeUnparseable& e) {
            // one bad judge reply must not sink a whole run
            verdict.example_id = example.id;
            verdict.score = 0;
            verdict.detail = e.what();
        }
        transcript_json["verdict"] = {{"score", to_fraction_string(verdict.score)},
                                      {"extracted", verdict.extracted},
                                      {"detail", verdict.detail}};
        if (config.policy.kind == PolicyKind::fixed) {
            nlohmann::json call_log = nlohmann::json::array();
            for (const CallLogEntry& entry : outcome.calls) {
                call_log.push_back({{"purpose", to_string(entry.purpose)},
                                    {"request_digest", entry.request_digest},
                                    {"cached", entry.cached},
                                    {"retry", entry.retry}});
            }
            transcript_json["call_log"] = call_log;
        }

        outcome.transcript_rel_path = std::string("transcripts/") +
                                      std::string(to_string(example.kind)) + "/" +
                                      sha256_hex(example.input) + ".transcript.json";
        detail::write_text_file(out_dir / outcome.transcript_rel_path,
                                transcript_json.dump(2) + "\n");
        outcome.verdict = verdict;
        return outcome;
    };

    std::exception_ptr abort_error;
    for (std::size_t task_index = 0; task_index < config.tasks.size(); ++task_index) {
        const std::vector<Example>& examples = datasets[task_index];
        std::vector<std::optional<detail::ExampleOutcome>> outcomes(examples.size());

        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        std::mutex error_mutex;
        auto worker = [&] {
            while (!failed.load()) {
                const std::size_t i = next.fetch_add(1);
                if (i >= examples.size()) {
                    return;
                }
                try {
                    outcomes[i] = process_example(examples[i]);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!abort_error) {
                        abort_error = std::current_exception();
                    }
                    failed.store(true);
                    return;
                }
            }
        };
        const std::size_t worker_count =
            std::min<std::size_t>(config.parallelism, std::max<std::size_t>(examples.size(), 1));
        if (worker_count <= 1) {
            worker();
        } else {
            std::vector<std::thread> threads;
            for (std::size_t i = 0; i < worker_count; ++i) {
                threads.emplace_back(worker);
            }
            for (std::thread& t : threads) {
                t.join();
            }
        }

        TaskResult result;
        result.kind = config.tasks[task_index].kind;
        result.dataset_path = config.tasks[task_index].path;
        for (std::size_t i = 0; i < examples.size(); ++i) {
            if (!outcomes[i]) {
                result.complete = false;
                continue;
            }
            for (const CallLogEntry& entry : outcomes[i]->calls) {
                run.counts.add(entry);
            }
            result.records.push_back({examples[i].id, outcomes[i]->transcript_rel_path,
                                      outcomes[i]->verdict.score, outcomes[i]->verdict.detail});
        }
        std::sort(result.records.begin(), result.records.end(),
                  [](const ExampleRecord& a, const ExampleRecord& b) {
                      return a.example_id < b.example_id;
                  });
        result.accuracy = detail::mean_score(result.records);
        run.tasks.push_back(std::move(result));

        if (abort_error) {
            run.complete = false;
            try {
                std::rethrow_exception(abort_error);
            } catch (const std::exception& e) {
                run.abort_reason = e.what();
            }
            run.finished_at = utc_timestamp();
            write_run_manifest(run, out_dir);
            std::rethrow_exception(abort_error);
        }
    }

    run.finished_at = utc_timestamp();
    write_run_manifest(run, out_dir);
    return run;
}

} // namespace mrp
