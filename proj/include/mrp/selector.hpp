#pragma once

#include "mrp/backend.hpp"
#include "mrp/cache.hpp"
#include "mrp/errors.hpp"
#include "mrp/method.hpp"
#include "mrp/rational.hpp"
#include "mrp/text_norm.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace mrp {

/// Appended to a scoring prompt when the first reply had no readable score.
inline constexpr std::string_view kScoreFormatReminder =
    "\n\nYour previous reply did not contain a readable score. Reply again and make sure the "
    "last line has exactly the form:\nSCORE: <integer from 0 to 10>";

enum class ParseStatus { parsed, defaulted_after_retry };

inline std::string_view to_string(ParseStatus status) {
    return status == ParseStatus::parsed ? "parsed" : "defaulted-after-retry";
}

/// One method's suitability score. `value` is exact (i/10 for a parsed
/// integer i); a reply that stayed unparseable after the retry is recorded as
/// 0 with the defaulted flag.
struct MethodScore {
    std::string method_id;
    std::string raw_completion;
    Rational value;
    ParseStatus parse_status = ParseStatus::parsed;
};

struct SelectionDecision {
    std::vector<MethodScore> scores; // pool order
    std::size_t chosen_index = 0;
    std::string chosen_method_id;
    bool tie_broken = false;
};

struct CallLogEntry {
    Purpose purpose = Purpose::scoring;
    std::string request_digest;
    bool cached = false;
    bool retry = false;
};

inline constexpr std::array<std::string_view, 4> kErrorLabelTaxonomy = {
    "scoring_error", "self_opinion", "factual_error", "reasoning_error"};

/// Full audit record of one routed input.
struct Transcript {
    std::string task_input;
    SelectionDecision decision;
    PromptText execution_prompt;
    std::string final_output;
    std::vector<CallLogEntry> call_log;
    std::vector<std::string> error_labels;

    /// Labels come from the fixed error taxonomy; anything else is rejected.
    void add_error_label(std::string_view label) {
        if (std::find(kErrorLabelTaxonomy.begin(), kErrorLabelTaxonomy.end(), label) ==
            kErrorLabelTaxonomy.end()) {
            throw std::invalid_argument("unknown error label '" + std::string(label) + "'");
        }
        if (std::find(error_labels.begin(), error_labels.end(), label) == error_labels.end()) {
            error_labels.emplace_back(label);
        }
    }
};

/// Model/temperature settings applied to the calls one routed input makes.
/// Scoring (and judging) default to temperature 0 so selection is as
/// deterministic as the backend allows.
struct CallSettings {
    std::string model = "scripted";
    double scoring_temperature = 0.0;
    double execution_temperature = 0.0;
    int max_tokens = 1024;
};

/// Extracts the score from a scoring reply: the last line of the form
/// "SCORE: <integer>" (keyword case-insensitive, optional surrounding
/// whitespace) with the integer in 0..10, normalized to integer/10.
inline Rational parse_score(const std::string& raw) {
    std::optional<long long> last;
    bool last_overflowed = false;
    for (const std::string& line : text::split_lines(raw)) {
        std::size_t i = 0;
        auto skip_ws = [&] {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
                ++i;
            }
        };
        skip_ws();
        static constexpr std::string_view keyword = "score";
        if (line.size() - i < keyword.size()) {
            continue;
        }
        bool keyword_ok = true;
        for (std::size_t k = 0; k < keyword.size(); ++k) {
            if (std::tolower(static_cast<unsigned char>(line[i + k])) != keyword[k]) {
                keyword_ok = false;
                break;
            }
        }
        if (!keyword_ok) {
            continue;
        }
        i += keyword.size();
        skip_ws();
        if (i >= line.size() || line[i] != ':') {
            continue;
        }
        ++i;
        skip_ws();
        bool negative = false;
        if (i < line.size() && (line[i] == '+' || line[i] == '-')) {
            negative = line[i] == '-';
            ++i;
        }
        std::size_t digits_start = i;
        long long value = 0;
        bool overflow = false;
        while (i < line.size() && line[i] >= '0' && line[i] <= '9') {
            if (value > 1'000'000'000) {
                overflow = true;
            } else {
                value = value * 10 + (line[i] - '0');
            }
            ++i;
        }
        if (i == digits_start) {
            continue;
        }
        skip_ws();
        if (i != line.size()) {
            continue; // trailing junk: not a pure score line
        }
        last = negative ? -value : value;
        last_overflowed = overflow;
    }
    if (!last.has_value()) {
        throw ScoreUnparseable("no line of the form 'SCORE: <integer>' found");
    }
    if (last_overflowed || *last < 0 || *last > 10) {
        throw ScoreOutOfRange("score " + std::to_string(*last) + " outside 0..10");
    }
    return Rational(*last, 10);
}

/// One scoring call per Eq.-style description ‖ meta ‖ input prompt. A reply
/// without a readable score triggers exactly one retry with a format
/// reminder; if that also fails the method scores 0 and is flagged rather
/// than aborting the caller.
inline MethodScore score_method(CompletionBackend& backend, const MethodDescriptor& descriptor,
                                const std::string& meta, const std::string& input,
                                const CallSettings& settings,
                                std::vector<CallLogEntry>* call_log = nullptr) {
    const PromptText prompt = assemble_scoring_prompt(descriptor, meta, input);

    auto issue = [&](const std::string& content, bool retry) {
        CompletionRequest request;
        request.model = settings.model;
        request.messages = {{Role::user, content}};
        request.temperature = settings.scoring_temperature;
        request.max_tokens = settings.max_tokens;
        request.purpose = Purpose::scoring;
        Completion completion = backend.complete(request);
        if (call_log != nullptr) {
            call_log->push_back(
                {Purpose::scoring, cache_key(request), completion.from_cache, retry});
        }
        return completion;
    };

    Completion first = issue(prompt.text(), false);
    try {
        return {descriptor.id, first.text, parse_score(first.text), ParseStatus::parsed};
    } catch (const ScoreUnparseable&) {
    } catch (const ScoreOutOfRange&) {
    }

    Completion second = issue(prompt.text() + std::string(kScoreFormatReminder), true);
    try {
        return {descriptor.id, second.text, parse_score(second.text), ParseStatus::parsed};
    } catch (const ScoreUnparseable&) {
    } catch (const ScoreOutOfRange&) {
    }
    return {descriptor.id, second.text, Rational(0), ParseStatus::defaulted_after_retry};
}

/// Argmax with ties broken toward the smallest index.
inline SelectionDecision select(std::vector<MethodScore> scores) {
    if (scores.empty()) {
        throw EmptyScoreList("cannot select from an empty score list");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i].value > scores[best].value) {
            best = i;
        }
    }
    std::size_t holders = 0;
    for (const MethodScore& s : scores) {
        if (s.value == scores[best].value) {
            ++holders;
        }
    }
    SelectionDecision decision;
    decision.chosen_index = best;
    decision.chosen_method_id = scores[best].method_id;
    decision.tie_broken = holders > 1;
    decision.scores = std::move(scores);
    return decision;
}

/// Indices of the k highest scores, descending by value, ties by ascending
/// index. With k = 1 this is exactly the argmax of select().
inline std::vector<std::size_t> select_top_k(const std::vector<MethodScore>& scores,
                                             std::size_t k) {
    if (k < 1 || k > scores.size()) {
        throw KOutOfRange("k = " + std::to_string(k) + " outside 1.." +
                          std::to_string(scores.size()));
    }
    std::vector<std::size_t> indices(scores.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    std::sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a].value != scores[b].value) {
            return scores[a].value > scores[b].value;
        }
        return a < b;
    });
    indices.resize(k);
    return indices;
}

/// The full routing pipeline for one input: score every method in pool
/// order, pick the argmax, execute the winner, return the audit transcript.
inline Transcript route_and_solve(CompletionBackend& backend, const Pool& pool,
                                  const std::string& input, const CallSettings& settings) {
    if (input.empty()) {
        throw EmptyInput("task input is empty");
    }
    if (pool.size() == 0) {
        throw EmptyScoreList("reasoning pool is empty");
    }

    Transcript transcript;
    transcript.task_input = input;

    std::vector<MethodScore> scores;
    scores.reserve(pool.size());
    for (const MethodDescriptor& descriptor : pool.methods()) {
        scores.push_back(score_method(backend, descriptor, pool.meta_prompt(), input, settings,
                                      &transcript.call_log));
    }
    transcript.decision = select(std::move(scores));

    const MethodDescriptor& chosen = pool.at(transcript.decision.chosen_index);
    transcript.execution_prompt = assemble_execution_prompt(chosen, input);

    CompletionRequest request;
    request.model = settings.model;
    request.messages = {{Role::user, transcript.execution_prompt.text()}};
    request.temperature = settings.execution_temperature;
    request.max_tokens = settings.max_tokens;
    request.purpose = Purpose::execution;
    Completion completion = backend.complete(request);
    transcript.call_log.push_back(
        {Purpose::execution, cache_key(request), completion.from_cache, false});
    transcript.final_output = completion.text;
    return transcript;
}

// --- transcript serialization ------------------------------------------------

inline nlohmann::json to_json_value(const PromptText& prompt) {
    nlohmann::json segments = nlohmann::json::array();
    for (const PromptSegment& seg : prompt.segments()) {
        segments.push_back({{"kind", to_string(seg.kind)}, {"text", seg.text}});
    }
    return {{"text", prompt.text()}, {"segments", segments}};
}

inline nlohmann::json to_json_value(const SelectionDecision& decision) {
    nlohmann::json scores = nlohmann::json::array();
    for (const MethodScore& s : decision.scores) {
        scores.push_back({{"method_id", s.method_id},
                          {"raw_completion", s.raw_completion},
                          {"value", to_fraction_string(s.value)},
                          {"value_display", format_fixed(s.value)},
                          {"parse_status", to_string(s.parse_status)}});
    }
    return {{"scores", scores},
            {"chosen_index", decision.chosen_index},
            {"chosen_method_id", decision.chosen_method_id},
            {"tie_broken", decision.tie_broken}};
}

inline nlohmann::json transcript_to_json(const Transcript& t) {
    nlohmann::json call_log = nlohmann::json::array();
    for (const CallLogEntry& entry : t.call_log) {
        call_log.push_back({{"purpose", to_string(entry.purpose)},
                            {"request_digest", entry.request_digest},
                            {"cached", entry.cached},
                            {"retry", entry.retry}});
    }
    return {{"schema", "mrp.transcript/1"},
            {"input", t.task_input},
            {"decision", to_json_value(t.decision)},
            {"execution_prompt", to_json_value(t.execution_prompt)},
            {"final_output", t.final_output},
            {"call_log", call_log},
            {"error_labels", t.error_labels}};
}

} // namespace mrp
