#pragma once

#include "mrp/backend.hpp"
#include "mrp/errors.hpp"
#include "mrp/game24.hpp"
#include "mrp/rational.hpp"
#include "mrp/selector.hpp"
#include "mrp/text_norm.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mrp {

enum class TaskKind { gsm8k, game24, trivia_cw, hotpotqa, bigtom, code_readability, mmlu };

inline constexpr std::array<TaskKind, 7> kAllTaskKinds = {
    TaskKind::gsm8k,    TaskKind::game24, TaskKind::trivia_cw,        TaskKind::hotpotqa,
    TaskKind::bigtom,   TaskKind::code_readability, TaskKind::mmlu};

inline std::string_view to_string(TaskKind kind) {
    switch (kind) {
    case TaskKind::gsm8k: return "gsm8k";
    case TaskKind::game24: return "game24";
    case TaskKind::trivia_cw: return "trivia_cw";
    case TaskKind::hotpotqa: return "hotpotqa";
    case TaskKind::bigtom: return "bigtom";
    case TaskKind::code_readability: return "code_readability";
    case TaskKind::mmlu: return "mmlu";
    }
    return "?";
}

inline TaskKind task_kind_from_string(std::string_view s) {
    for (TaskKind kind : kAllTaskKinds) {
        if (to_string(kind) == s) {
            return kind;
        }
    }
    throw DatasetError("unknown task kind '" + std::string(s) + "'");
}

/// Reference split sizes used for the loader's count check.
inline std::size_t expected_count(TaskKind kind) {
    switch (kind) {
    case TaskKind::gsm8k: return 1319;
    case TaskKind::game24: return 100;
    case TaskKind::trivia_cw: return 100;
    case TaskKind::hotpotqa: return 300;
    case TaskKind::bigtom: return 100;
    case TaskKind::code_readability: return 300;
    case TaskKind::mmlu: return 151;
    }
    return 0;
}

using AliasSet = std::vector<std::string>;

struct NumericGold {
    std::string value;
};

struct Game24Gold {
    std::array<int, 4> numbers;
};

struct TriviaGold {
    std::vector<AliasSet> answer_sets;
};

struct ExactMatchGold {
    AliasSet aliases;
};

struct ChoiceGold {
    std::vector<std::pair<char, std::string>> options; // 'A'.. in order
    char answer = 'A';
};

struct CodeGold {
    std::string original_code;
};

using Gold =
    std::variant<NumericGold, Game24Gold, TriviaGold, ExactMatchGold, ChoiceGold, CodeGold>;

struct Example {
    std::string id;
    TaskKind kind = TaskKind::gsm8k;
    std::string input;
    Gold gold;
};

/// Graded outcome for one example. Boolean tasks use scores 0 and 1;
/// trivia_cw and code_readability carry graded values in [0,1].
struct Verdict {
    std::string example_id;
    Rational score;
    std::string extracted;
    std::string detail;

    bool correct() const { return score == 1; }
};

// --- dataset loading ---------------------------------------------------------

namespace detail {

inline std::string with_line(const std::filesystem::path& path, std::size_t line_no,
                             const std::string& reason) {
    return path.string() + ":" + std::to_string(line_no) + ": " + reason;
}

inline std::string require_string(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty()) {
        throw MalformedLine(std::string("missing or empty string field '") + key + "'");
    }
    return j[key].get<std::string>();
}

inline std::string render_choices(const std::vector<std::pair<char, std::string>>& options) {
    std::string out;
    for (const auto& [label, body] : options) {
        out += "\n(";
        out += label;
        out += ") " + body;
    }
    return out;
}

inline ChoiceGold parse_choice_gold(const nlohmann::json& j) {
    if (!j.contains("choices") || !j["choices"].is_object()) {
        throw MalformedLine("missing 'choices' object");
    }
    ChoiceGold gold;
    for (const auto& [key, value] : j["choices"].items()) {
        if (key.size() != 1 || key[0] < 'A' || key[0] > 'Z' || !value.is_string()) {
            throw GoldShapeMismatch("choice labels must be single letters A..Z");
        }
        gold.options.emplace_back(key[0], value.get<std::string>());
    }
    std::sort(gold.options.begin(), gold.options.end());
    if (gold.options.size() < 2 || gold.options.size() > 26) {
        throw GoldShapeMismatch("need between 2 and 26 choices");
    }
    for (std::size_t i = 0; i < gold.options.size(); ++i) {
        if (gold.options[i].first != static_cast<char>('A' + i)) {
            throw GoldShapeMismatch("choice labels must be consecutive from A");
        }
    }
    const std::string answer = require_string(j, "answer");
    if (answer.size() != 1 ||
        answer[0] < 'A' ||
        answer[0] >= static_cast<char>('A' + gold.options.size())) {
        throw GoldShapeMismatch("answer label '" + answer + "' is not one of the choices");
    }
    gold.answer = answer[0];
    return gold;
}

} // namespace detail

/// Builds the model-facing input text for a 24-game instance.
inline std::string game24_input(const std::array<int, 4>& numbers) {
    std::string out = "Using the numbers ";
    for (std::size_t i = 0; i < numbers.size(); ++i) {
        if (i == numbers.size() - 1) {
            out += " and ";
        } else if (i > 0) {
            out += ", ";
        }
        out += std::to_string(numbers[i]);
    }
    out += " exactly once each, combine them with +, -, * and / (parentheses allowed) so the "
           "result is exactly 24. Reply with a single arithmetic expression.";
    return out;
}

/// Loads one JSONL dataset file. Examples come back in file order; a count
/// that differs from the reference split is reported through `count_warning`
/// (when given), never as an error.
inline std::vector<Example> load_dataset(const std::filesystem::path& path, TaskKind kind,
                                         std::string* count_warning = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DatasetError("cannot open dataset " + path.string());
    }

    std::vector<Example> examples;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw MalformedLine(detail::with_line(path, line_no, e.what()));
        }
        try {
            Example ex;
            ex.kind = kind;
            ex.id = detail::require_string(j, "id");
            if (!seen_ids.insert(ex.id).second) {
                throw MalformedLine("duplicate example id '" + ex.id + "'");
            }
            switch (kind) {
            case TaskKind::gsm8k: {
                ex.input = detail::require_string(j, "question");
                const std::string answer = detail::require_string(j, "answer");
                // gold is the value after the final #### marker, or the field itself
                std::string gold = answer;
                const std::size_t marker = answer.rfind("####");
                if (marker != std::string::npos) {
                    gold = text::trim(answer.substr(marker + 4));
                }
                std::string normalized = gold;
                normalized.erase(std::remove(normalized.begin(), normalized.end(), ','),
                                 normalized.end());
                try {
                    rational_from_decimal(normalized);
                } catch (const std::invalid_argument&) {
                    throw GoldShapeMismatch("answer '" + gold + "' is not a decimal number");
                }
                ex.gold = NumericGold{normalized};
                break;
            }
            case TaskKind::game24: {
                if (!j.contains("numbers") || !j["numbers"].is_array() ||
                    j["numbers"].size() != 4) {
                    throw GoldShapeMismatch("'numbers' must hold exactly 4 integers");
                }
                Game24Gold gold{};
                for (std::size_t i = 0; i < 4; ++i) {
                    if (!j["numbers"][i].is_number_integer()) {
                        throw GoldShapeMismatch("'numbers' must hold exactly 4 integers");
                    }
                    const int n = j["numbers"][i].get<int>();
                    if (n < 1 || n > 13) {
                        throw GoldShapeMismatch("number " + std::to_string(n) +
                                                " outside 1..13");
                    }
                    gold.numbers[i] = n;
                }
                ex.input = game24_input(gold.numbers);
                ex.gold = gold;
                break;
            }
            case TaskKind::trivia_cw: {
                const std::string topic = detail::require_string(j, "topic");
                if (!j.contains("questions") || !j["questions"].is_array() ||
                    j["questions"].empty()) {
                    throw MalformedLine("missing non-empty 'questions' array");
                }
                if (!j.contains("answers") || !j["answers"].is_array() ||
                    j["answers"].size() != j["questions"].size()) {
                    throw GoldShapeMismatch("'answers' must match 'questions' in length");
                }
                TriviaGold gold;
                for (const nlohmann::json& aliases : j["answers"]) {
                    if (!aliases.is_array() || aliases.empty()) {
                        throw GoldShapeMismatch("each answer must be a non-empty alias list");
                    }
                    gold.answer_sets.push_back(aliases.get<AliasSet>());
                }
                std::string input = "Write a short and coherent story about " + topic +
                                    " that incorporates the answers to the following " +
                                    std::to_string(j["questions"].size()) + " questions:";
                for (const nlohmann::json& q : j["questions"]) {
                    input += " " + q.get<std::string>();
                }
                ex.input = input;
                ex.gold = std::move(gold);
                break;
            }
            case TaskKind::hotpotqa: {
                ex.input = detail::require_string(j, "question");
                ExactMatchGold gold;
                gold.aliases.push_back(detail::require_string(j, "answer"));
                if (j.contains("aliases")) {
                    for (const nlohmann::json& alias : j["aliases"]) {
                        gold.aliases.push_back(alias.get<std::string>());
                    }
                }
                ex.gold = std::move(gold);
                break;
            }
            case TaskKind::bigtom:
            case TaskKind::mmlu: {
                ChoiceGold gold = detail::parse_choice_gold(j);
                ex.input = detail::require_string(j, "question") + "\n" +
                           "Options:" + detail::render_choices(gold.options);
                ex.gold = std::move(gold);
                break;
            }
            case TaskKind::code_readability: {
                const std::string code = detail::require_string(j, "code");
                ex.input = "Rewrite the following code to improve its readability while "
                           "preserving its exact behavior. Reply with the rewritten code.\n\n" +
                           code;
                ex.gold = CodeGold{code};
                break;
            }
            }
            examples.push_back(std::move(ex));
        } catch (const DatasetError& e) {
            // annotate with the source line unless already annotated
            const std::string what = e.what();
            if (what.find(path.string() + ":") == 0) {
                throw;
            }
            if (dynamic_cast<const GoldShapeMismatch*>(&e) != nullptr) {
                throw GoldShapeMismatch(detail::with_line(path, line_no, what));
            }
            throw MalformedLine(detail::with_line(path, line_no, what));
        }
    }

    if (count_warning != nullptr && examples.size() != expected_count(kind)) {
        *count_warning = std::string(to_string(kind)) + ": loaded " +
                         std::to_string(examples.size()) + " examples, reference split has " +
                         std::to_string(expected_count(kind));
    }
    return examples;
}

// --- deterministic scorers ---------------------------------------------------

namespace detail {

inline const std::regex& number_token_regex() {
    static const std::regex re(R"([+-]?(?:[0-9][0-9,]*(?:\.[0-9]+)?|\.[0-9]+))");
    return re;
}

inline std::optional<std::string> extract_final_number(const std::string& output) {
    std::string haystack = output;
    const std::size_t marker = output.rfind("####");
    bool after_marker = false;
    if (marker != std::string::npos) {
        haystack = output.substr(marker + 4);
        after_marker = true;
    }
    std::optional<std::string> found;
    for (std::sregex_iterator it(haystack.begin(), haystack.end(), number_token_regex()), end;
         it != end; ++it) {
        found = it->str();
        if (after_marker) {
            break; // first number after the marker
        }
    }
    return found;
}

inline std::string strip_commas(std::string s) {
    s.erase(std::remove(s.begin(), s.end(), ','), s.end());
    return s;
}

/// Case-insensitive position of the last "answer:" marker, or npos.
inline std::size_t last_answer_marker(const std::string& lowered) {
    static const std::string marker = "answer:";
    return lowered.rfind(marker);
}

} // namespace detail

/// Final numeric answer: the number after a #### marker when present, else
/// the last number token in the text. Comparison is exact after comma
/// stripping and decimal normalization.
inline Verdict score_numeric(const std::string& output, const NumericGold& gold,
                             const std::string& example_id = "") {
    Verdict v;
    v.example_id = example_id;
    std::optional<std::string> token = detail::extract_final_number(output);
    if (!token) {
        v.score = 0;
        v.detail = "no numeric answer found";
        return v;
    }
    v.extracted = *token;
    Rational got;
    try {
        got = rational_from_decimal(detail::strip_commas(*token));
    } catch (const std::invalid_argument&) {
        v.score = 0;
        v.detail = "unreadable number token '" + *token + "'";
        return v;
    }
    const Rational want = rational_from_decimal(detail::strip_commas(gold.value));
    if (got == want) {
        v.score = 1;
        v.detail = "exact match";
    } else {
        v.score = 0;
        v.detail = "expected " + gold.value + ", got " + *token;
    }
    return v;
}

/// An expression is correct iff its literal multiset equals the given four
/// numbers and it evaluates to exactly 24 under rational arithmetic.
inline Verdict validate_game24(const std::string& expr, const std::array<int, 4>& numbers,
                               const std::string& example_id = "") {
    Verdict v;
    v.example_id = example_id;
    v.extracted = text::trim(expr);
    v.score = 0;

    auto result = game24::evaluate(v.extracted);
    if (std::holds_alternative<std::string>(result)) {
        v.detail = std::get<std::string>(result);
        return v;
    }
    const game24::Evaluated& evaluated = std::get<game24::Evaluated>(result);

    std::vector<std::int64_t> used = evaluated.literals;
    std::vector<std::int64_t> wanted(numbers.begin(), numbers.end());
    std::sort(used.begin(), used.end());
    std::sort(wanted.begin(), wanted.end());
    if (used != wanted) {
        v.detail = "literal multiset mismatch";
        return v;
    }
    if (!(evaluated.value == game24::kTarget)) {
        v.detail = "evaluates to " + game24::to_string(evaluated.value) + ", not 24";
        return v;
    }
    v.score = 1;
    v.detail = "valid";
    return v;
}

/// Independent oracle for the validator and for dataset sanity checks.
inline std::optional<std::string> solve_game24(const std::array<int, 4>& numbers) {
    for (int n : numbers) {
        if (n < 1 || n > 13) {
            throw std::invalid_argument("24-game numbers must be in 1..13, got " +
                                        std::to_string(n));
        }
    }
    return game24::solve(numbers);
}

/// Pulls a candidate expression out of free-form model output and validates
/// it. Scans lines bottom-up, preferring the first line that parses with
/// exactly four literals; an "Answer:" prefix and a trailing "= value" are
/// stripped first.
inline Verdict grade_game24(const std::string& output, const std::array<int, 4>& numbers,
                            const std::string& example_id = "") {
    std::vector<std::string> lines = text::split_lines(output);
    std::optional<std::string> any_parse;
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        std::string candidate = text::trim(*it);
        if (candidate.empty()) {
            continue;
        }
        const std::string lowered = text::to_lower(candidate);
        const std::size_t marker = detail::last_answer_marker(lowered);
        if (marker != std::string::npos) {
            candidate = text::trim(candidate.substr(marker + 7));
        }
        static const std::regex equals_suffix(R"(\s*=\s*[0-9][0-9.,]*\s*$)");
        candidate = std::regex_replace(candidate, equals_suffix, "");
        if (candidate.empty()) {
            continue;
        }
        auto result = game24::evaluate(candidate);
        if (std::holds_alternative<std::string>(result)) {
            continue;
        }
        if (std::get<game24::Evaluated>(result).literals.size() == 4) {
            return validate_game24(candidate, numbers, example_id);
        }
        if (!any_parse) {
            any_parse = candidate;
        }
    }
    if (any_parse) {
        return validate_game24(*any_parse, numbers, example_id);
    }
    Verdict v;
    v.example_id = example_id;
    v.score = 0;
    v.detail = "no arithmetic expression found in output";
    return v;
}

/// Fraction of answer sets with at least one alias mentioned in the story
/// (case-insensitive, word-boundary token match, articles ignored).
inline Verdict score_trivia_coverage(const std::string& story,
                                     const std::vector<AliasSet>& answer_sets,
                                     const std::string& example_id = "") {
    if (answer_sets.empty()) {
        throw EmptyAnswerSets("trivia coverage needs at least one answer set");
    }
    const std::vector<std::string> story_tokens = text::normalized_tokens(story);
    std::size_t hits = 0;
    for (const AliasSet& aliases : answer_sets) {
        for (const std::string& alias : aliases) {
            const std::vector<std::string> alias_tokens = text::normalized_tokens(alias);
            if (!alias_tokens.empty() && text::contains_token_run(story_tokens, alias_tokens)) {
                ++hits;
                break;
            }
        }
    }
    Verdict v;
    v.example_id = example_id;
    v.score = Rational(hits, answer_sets.size());
    v.detail = "mentioned " + std::to_string(hits) + " of " +
               std::to_string(answer_sets.size()) + " answers";
    return v;
}

/// Normalized exact match of the final answer line against any gold alias.
/// The answer line is the text after the last "Answer:" marker when present,
/// else the last non-empty line.
inline Verdict score_exact_match(const std::string& output, const AliasSet& golds,
                                 const std::string& example_id = "") {
    if (golds.empty()) {
        throw EmptyAnswerSets("exact match needs a non-empty gold set");
    }
    Verdict v;
    v.example_id = example_id;
    v.score = 0;

    std::string answer_line;
    const std::string lowered = text::to_lower(output);
    const std::size_t marker = detail::last_answer_marker(lowered);
    if (marker != std::string::npos) {
        std::string rest = output.substr(marker + 7);
        const std::size_t eol = rest.find('\n');
        answer_line = text::trim(eol == std::string::npos ? rest : rest.substr(0, eol));
    } else {
        const std::vector<std::string> lines = text::split_lines(output);
        for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
            if (!text::trim(*it).empty()) {
                answer_line = text::trim(*it);
                break;
            }
        }
    }
    v.extracted = answer_line;
    if (answer_line.empty()) {
        v.detail = "no answer line found";
        return v;
    }
    const std::string normalized = text::normalize_answer(answer_line);
    for (const std::string& gold : golds) {
        if (normalized == text::normalize_answer(gold)) {
            v.score = 1;
            v.detail = "matched alias '" + gold + "'";
            return v;
        }
    }
    v.detail = "'" + normalized + "' matched no gold alias";
    return v;
}

/// Picks the chosen option label out of free-form output. Priority: the last
/// occurrence of "(X)", "Answer: X" or a standalone uppercase X token; then
/// the option whose full text appears latest; nullopt when nothing matches.
inline std::optional<char> extract_choice(const std::string& output,
                                          const std::vector<std::pair<char, std::string>>& options) {
    if (options.size() < 2 || options.size() > 26) {
        throw std::invalid_argument("extract_choice needs 2..26 options");
    }
    const char last_label = static_cast<char>('A' + options.size() - 1);
    auto is_valid = [&](char c) {
        const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return upper >= 'A' && upper <= last_label;
    };

    std::optional<char> best;
    std::size_t best_pos = 0;
    auto consider = [&](std::size_t pos, char label) {
        const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(label)));
        if (!best || pos >= best_pos) {
            best = upper;
            best_pos = pos;
        }
    };

    // (X) — either case
    static const std::regex paren_re(R"(\(([A-Za-z])\))");
    for (std::sregex_iterator it(output.begin(), output.end(), paren_re), end; it != end; ++it) {
        if (is_valid((*it)[1].str()[0])) {
            consider(static_cast<std::size_t>(it->position(1)), (*it)[1].str()[0]);
        }
    }
    // Answer: X — either case, optional parentheses
    static const std::regex answer_re(R"([Aa][Nn][Ss][Ww][Ee][Rr]\s*:\s*\(?([A-Za-z])\)?(?![A-Za-z0-9]))");
    for (std::sregex_iterator it(output.begin(), output.end(), answer_re), end; it != end; ++it) {
        if (is_valid((*it)[1].str()[0])) {
            consider(static_cast<std::size_t>(it->position(1)), (*it)[1].str()[0]);
        }
    }
    // standalone uppercase token (lowercase would collide with the article "a")
    static const std::regex token_re(R"((?:^|[^A-Za-z0-9])([A-Z])(?![A-Za-z0-9]))");
    for (std::sregex_iterator it(output.begin(), output.end(), token_re), end; it != end; ++it) {
        if (is_valid((*it)[1].str()[0])) {
            consider(static_cast<std::size_t>(it->position(1)), (*it)[1].str()[0]);
        }
    }
    if (best) {
        return best;
    }

    // fallback: the option whose full text appears latest in the output
    const std::string lowered = text::to_lower(output);
    for (const auto& [label, body] : options) {
        const std::size_t pos = lowered.rfind(text::to_lower(body));
        if (pos != std::string::npos) {
            consider(pos, label);
        }
    }
    return best;
}

inline Verdict score_choice(const std::string& output, const ChoiceGold& gold,
                            const std::string& example_id = "") {
    Verdict v;
    v.example_id = example_id;
    const std::optional<char> choice = extract_choice(output, gold.options);
    if (!choice) {
        v.score = 0;
        v.detail = "no choice found in output";
        return v;
    }
    v.extracted = std::string(1, *choice);
    v.score = *choice == gold.answer ? 1 : 0;
    v.detail = v.correct() ? "correct option"
                           : std::string("expected ") + gold.answer + ", got " + *choice;
    return v;
}

/// Rubric used to judge rewritten code when no other rubric is supplied.
inline constexpr std::string_view kReadabilityRubric =
    "You are reviewing a code rewrite for readability.\n\nOriginal code:\n```\n{original}\n```\n\n"
    "Rewritten code:\n```\n{rewritten}\n```\n\nDecide whether the rewrite is a faithful, "
    "clearly more readable version of the original: behavior preserved, clearer names, better "
    "structure, no unexplained changes. Briefly justify your decision, then end your reply with "
    "a line of exactly the form:\nVERDICT: PASS\nor\nVERDICT: FAIL";

namespace detail {

inline std::optional<bool> parse_judge_verdict(const std::string& reply) {
    const std::vector<std::string> lines = text::split_lines(reply);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        const std::string line = text::trim(*it);
        if (line.empty()) {
            continue;
        }
        static const std::regex verdict_re(R"(^[Vv][Ee][Rr][Dd][Ii][Cc][Tt]\s*:\s*([Pp][Aa][Ss][Ss]|[Ff][Aa][Ii][Ll])\s*[.!]?$)");
        std::smatch m;
        if (std::regex_match(line, m, verdict_re)) {
            const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(m[1].str()[0])));
            return c == 'p';
        }
        return std::nullopt; // reply must END with the verdict line
    }
    return std::nullopt;
}

} // namespace detail

/// One judge completion grading a code rewrite with a PASS/FAIL rubric. The
/// judge call is tagged purpose=judge so it records and replays like any
/// other call. One retry with a format reminder, then JudgeUnparseable.
inline Verdict score_with_judge(CompletionBackend& backend, const std::string& original_code,
                                const std::string& rewritten_code, const std::string& rubric,
                                const CallSettings& settings, const std::string& example_id = "",
                                std::vector<CallLogEntry>* call_log = nullptr) {
    if (original_code.empty() || rewritten_code.empty()) {
        throw std::invalid_argument("judge needs both code snippets non-empty");
    }
    std::string prompt = text::replace_first(rubric, "{original}", original_code);
    prompt = text::replace_first(prompt, "{rewritten}", rewritten_code);

    auto issue = [&](const std::string& content, bool retry) {
        CompletionRequest request;
        request.model = settings.model;
        request.messages = {{Role::user, content}};
        request.temperature = settings.scoring_temperature;
        request.max_tokens = settings.max_tokens;
        request.purpose = Purpose::judge;
        Completion completion = backend.complete(request);
        if (call_log != nullptr) {
            call_log->push_back(
                {Purpose::judge, cache_key(request), completion.from_cache, retry});
        }
        return completion;
    };

    Completion first = issue(prompt, false);
    std::optional<bool> verdict = detail::parse_judge_verdict(first.text);
    if (!verdict) {
        Completion second =
            issue(prompt + "\n\nYour previous reply did not end with a verdict line. Reply "
                           "again, ending with exactly 'VERDICT: PASS' or 'VERDICT: FAIL'.",
                  true);
        verdict = detail::parse_judge_verdict(second.text);
        if (!verdict) {
            throw JudgeUnparseable("judge reply had no final verdict line after retry");
        }
    }
    Verdict v;
    v.example_id = example_id;
    v.score = *verdict ? 1 : 0;
    v.extracted = *verdict ? "PASS" : "FAIL";
    v.detail = "judge verdict";
    return v;
}

/// Routes an example's model output to its task scorer. The backend is only
/// touched for code_readability (the judged task).
inline Verdict grade(const Example& example, const std::string& output,
                     CompletionBackend* backend, const CallSettings& settings,
                     std::vector<CallLogEntry>* call_log = nullptr) {
    switch (example.kind) {
    case TaskKind::gsm8k:
        return score_numeric(output, std::get<NumericGold>(example.gold), example.id);
    case TaskKind::game24:
        return grade_game24(output, std::get<Game24Gold>(example.gold).numbers, example.id);
    case TaskKind::trivia_cw:
        return score_trivia_coverage(output, std::get<TriviaGold>(example.gold).answer_sets,
                                     example.id);
    case TaskKind::hotpotqa:
        return score_exact_match(output, std::get<ExactMatchGold>(example.gold).aliases,
                                 example.id);
    case TaskKind::bigtom:
    case TaskKind::mmlu:
        return score_choice(output, std::get<ChoiceGold>(example.gold), example.id);
    case TaskKind::code_readability: {
        if (backend == nullptr) {
            throw Error("code_readability grading needs a judge backend");
        }
        return score_with_judge(*backend, std::get<CodeGold>(example.gold).original_code,
                                output, std::string(kReadabilityRubric), settings, example.id,
                                call_log);
    }
    }
    throw Error("unhandled task kind");
}

} // namespace mrp
