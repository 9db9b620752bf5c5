#include "mrp/tasks.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

namespace fs = std::filesystem;
using mrp::Rational;

namespace {

fs::path write_jsonl(const std::string& name, const std::string& content) {
    const fs::path path = fs::temp_directory_path() /
                          ("mrp_tasks_" + name + "_" + std::to_string(::getpid()) + ".jsonl");
    std::ofstream(path) << content;
    return path;
}

class RecordingBackend : public mrp::CompletionBackend {
public:
    explicit RecordingBackend(std::vector<std::string> replies)
        : replies_(std::move(replies)) {}
    mrp::Completion complete(const mrp::CompletionRequest& request) override {
        requests.push_back(request);
        if (next_ >= replies_.size()) {
            throw mrp::ScriptExhausted("out of replies");
        }
        return {.text = replies_[next_++], .finish_reason = "stop", .usage = {},
                .from_cache = false};
    }
    std::vector<mrp::CompletionRequest> requests;

private:
    std::vector<std::string> replies_;
    std::size_t next_ = 0;
};

} // namespace

TEST_CASE("numeric scoring extracts the final number", "[tasks]") {
    const mrp::NumericGold g42{"42"};
    CHECK(mrp::score_numeric("...so the total is 42. #### 42", g42).correct());
    CHECK(mrp::score_numeric("answer: 1,234", mrp::NumericGold{"1234"}).correct());

    const mrp::Verdict none = mrp::score_numeric("no idea", mrp::NumericGold{"5"});
    CHECK_FALSE(none.correct());
    CHECK(none.detail == "no numeric answer found");

    SECTION("last number wins without a marker") {
        CHECK(mrp::score_numeric("first 3 then 7 finally 42", g42).correct());
        CHECK_FALSE(mrp::score_numeric("42 then 7", g42).correct());
    }
    SECTION("marker beats later numbers") {
        CHECK(mrp::score_numeric("#### 42\nconfidence: 9/10 correct?", g42).correct());
    }
    SECTION("decimal normalization") {
        CHECK(mrp::score_numeric("the result is 42.0", g42).correct());
        CHECK(mrp::score_numeric("the result is 42.5", g42).correct() == false);
        CHECK(mrp::score_numeric("balance: -12.50", mrp::NumericGold{"-12.5"}).correct());
    }
    SECTION("purity") {
        const mrp::Verdict a = mrp::score_numeric("x 42", g42);
        const mrp::Verdict b = mrp::score_numeric("x 42", g42);
        CHECK(a.score == b.score);
        CHECK(a.extracted == b.extracted);
        CHECK(a.detail == b.detail);
    }
}

TEST_CASE("trivia coverage is the fraction of mentioned answers", "[tasks]") {
    const std::vector<mrp::AliasSet> answers = {
        {"Pacific", "Pacific Ocean"}, {"Titanic"}, {"Arctic tern"}, {"barometer"},
        {"Ursa Minor", "Little Dipper"}};

    const std::string story =
        "The keeper watched the pacific swell while the old barometer fell. She remembered "
        "the titanic lesson of her grandfather.";
    const mrp::Verdict v = mrp::score_trivia_coverage(story, answers);
    CHECK(v.score == Rational(3, 5));

    SECTION("case-insensitive matching") {
        CHECK(mrp::score_trivia_coverage("THE BAROMETER broke", {{"barometer"}}).score ==
              Rational(1));
    }
    SECTION("word boundaries required") {
        CHECK(mrp::score_trivia_coverage("the barometers broke", {{"barometer"}}).score ==
              Rational(0));
    }
    SECTION("article-insensitive matching") {
        CHECK(mrp::score_trivia_coverage("she saw a little dipper rise",
                                         {{"the Little Dipper"}})
                  .score == Rational(1));
    }
    SECTION("no mentions") {
        CHECK(mrp::score_trivia_coverage("nothing relevant", answers).score == Rational(0));
    }
    SECTION("empty answer sets") {
        CHECK_THROWS_AS(mrp::score_trivia_coverage("story", {}), mrp::EmptyAnswerSets);
    }
}

TEST_CASE("trivia coverage never decreases when the story is extended", "[tasks]") {
    const std::vector<mrp::AliasSet> answers = {
        {"Pacific"}, {"Titanic"}, {"Arctic tern"}, {"barometer"}, {"Ursa Minor"}};
    std::mt19937 rng(11);
    const std::vector<std::string> sentences = {
        "The pacific was calm.", "A barometer hung by the door.", "Gulls wheeled overhead.",
        "She thought of the titanic.", "An arctic tern landed.", "Ursa minor glittered.",
        "Nothing else happened."};
    for (int round = 0; round < 200; ++round) {
        std::string story = sentences[rng() % sentences.size()];
        Rational last = mrp::score_trivia_coverage(story, answers).score;
        for (int step = 0; step < 6; ++step) {
            story += " " + sentences[rng() % sentences.size()];
            const Rational now = mrp::score_trivia_coverage(story, answers).score;
            CHECK(now >= last);
            last = now;
        }
    }
}

TEST_CASE("exact match normalizes case, articles and punctuation", "[tasks]") {
    const mrp::AliasSet beatles = {"the beatles"};
    CHECK(mrp::score_exact_match("Answer: The Beatles", beatles).correct());
    // exact match semantics, not substring
    CHECK_FALSE(mrp::score_exact_match("Answer: The Beatles Story", beatles).correct());
    CHECK_FALSE(mrp::score_exact_match("...it is Paris.\n", {"Paris, France"}).correct());
    CHECK(mrp::score_exact_match("long explanation\nParis", {"Paris"}).correct());
    CHECK_FALSE(mrp::score_exact_match("", {"Paris"}).correct());
    CHECK_THROWS_AS(mrp::score_exact_match("x", {}), mrp::EmptyAnswerSets);

    SECTION("alias set membership") {
        CHECK(mrp::score_exact_match("Answer: Tibet Autonomous Region",
                                     {"Tibet", "Tibet Autonomous Region"})
                  .correct());
    }
    SECTION("invariance under perturbation of the answer line") {
        const std::vector<std::string> variants = {
            "Answer: the beatles", "Answer: The Beatles.", "Answer: THE BEATLES!",
            "Answer:   Beatles"};
        for (const std::string& v : variants) {
            CHECK(mrp::score_exact_match(v, beatles).correct());
        }
    }
}

TEST_CASE("exact match invariance property on random aliases", "[tasks]") {
    std::mt19937 rng(31);
    const std::vector<std::string> words = {"silver", "falcon", "harbor", "maple",
                                            "engine", "north",  "garden"};
    for (int round = 0; round < 200; ++round) {
        std::string answer = words[rng() % words.size()];
        if (rng() % 2 == 0) {
            answer += " " + words[rng() % words.size()];
        }
        std::string perturbed = answer;
        if (rng() % 2 == 0) {
            for (char& c : perturbed) {
                c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            }
        }
        if (rng() % 2 == 0) {
            perturbed = "the " + perturbed;
        }
        if (rng() % 2 == 0) {
            perturbed += ".";
        }
        CHECK(mrp::score_exact_match("Answer: " + perturbed, {answer}).correct());
    }
}

TEST_CASE("choice extraction follows the documented priority", "[tasks]") {
    const std::vector<std::pair<char, std::string>> options = {
        {'A', "the green house"}, {'B', "the blue house"}, {'C', "the red house"},
        {'D', "the tall house"}};

    CHECK(mrp::extract_choice("...the answer is (B).", options) == 'B');
    CHECK(mrp::extract_choice("Answer: D", options) == 'D');
    CHECK(mrp::extract_choice("It must be the red house.", options) == 'C');
    CHECK(mrp::extract_choice("(a) no wait, (b)", options) == 'B');
    CHECK(mrp::extract_choice("A B C D", options) == 'D');
    CHECK(mrp::extract_choice("answer: (c)", options) == 'C');
    CHECK_FALSE(mrp::extract_choice("no clue at all", options).has_value());

    SECTION("labels outside the option set never come back") {
        CHECK(mrp::extract_choice("(E) is my answer, or maybe (B)", options) == 'B');
        std::mt19937 rng(41);
        const std::string alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ() :answer";
        for (int round = 0; round < 300; ++round) {
            std::string noise;
            for (int i = 0; i < 30; ++i) {
                noise += alphabet[rng() % alphabet.size()];
            }
            const std::optional<char> got = mrp::extract_choice(noise, options);
            if (got) {
                CHECK(*got >= 'A');
                CHECK(*got <= 'D');
            }
        }
    }
    SECTION("article 'a' in prose is not a choice") {
        CHECK_FALSE(mrp::extract_choice("give it a try", options).has_value());
    }
    SECTION("option count bounds") {
        CHECK_THROWS_AS(mrp::extract_choice("x", {{'A', "one"}}), std::invalid_argument);
    }
}

TEST_CASE("judge grades pass/fail with one retry", "[tasks]") {
    const mrp::CallSettings settings;
    const std::string rubric(mrp::kReadabilityRubric);

    SECTION("pass") {
        RecordingBackend backend({"Looks clean and faithful.\nVERDICT: PASS"});
        const mrp::Verdict v = mrp::score_with_judge(backend, "orig()", "better()", rubric,
                                                     settings);
        CHECK(v.score == Rational(1));
        CHECK(v.extracted == "PASS");
        CHECK(backend.requests[0].purpose == mrp::Purpose::judge);
        const std::string& prompt = backend.requests[0].messages[0].content;
        CHECK(prompt.find("orig()") != std::string::npos);
        CHECK(prompt.find("better()") != std::string::npos);
    }
    SECTION("fail") {
        RecordingBackend backend({"Renamed everything wrongly.\nVERDICT: FAIL"});
        CHECK(mrp::score_with_judge(backend, "a", "b", rubric, settings).score == Rational(0));
    }
    SECTION("garbage then verdict") {
        RecordingBackend backend({"hmm", "fine.\nverdict: pass"});
        std::vector<mrp::CallLogEntry> log;
        const mrp::Verdict v =
            mrp::score_with_judge(backend, "a", "b", rubric, settings, "", &log);
        CHECK(v.score == Rational(1));
        REQUIRE(log.size() == 2);
        CHECK(log[1].retry);
    }
    SECTION("garbage twice raises") {
        RecordingBackend backend({"hmm", "still hmm"});
        CHECK_THROWS_AS(mrp::score_with_judge(backend, "a", "b", rubric, settings),
                        mrp::JudgeUnparseable);
    }
    SECTION("verdict must be the last line") {
        RecordingBackend backend({"VERDICT: PASS\nbut actually no", "VERDICT: PASS\nwait"});
        CHECK_THROWS_AS(mrp::score_with_judge(backend, "a", "b", rubric, settings),
                        mrp::JudgeUnparseable);
    }
    SECTION("empty snippet rejected") {
        RecordingBackend backend({});
        CHECK_THROWS_AS(mrp::score_with_judge(backend, "", "b", rubric, settings),
                        std::invalid_argument);
    }
}

TEST_CASE("datasets load with shape validation", "[tasks]") {
    SECTION("well-formed gsm8k") {
        const fs::path path = write_jsonl("gsm_ok", R"({"id": "a", "question": "1+1?", "answer": "#### 2"}
{"id": "b", "question": "2+2?", "answer": "long text #### 4"}
{"id": "c", "question": "big?", "answer": "#### 1,100"}
)");
        std::string warning;
        const std::vector<mrp::Example> examples =
            mrp::load_dataset(path, mrp::TaskKind::gsm8k, &warning);
        REQUIRE(examples.size() == 3);
        CHECK(std::get<mrp::NumericGold>(examples[0].gold).value == "2");
        CHECK(std::get<mrp::NumericGold>(examples[2].gold).value == "1100");
        CHECK(warning.find("1319") != std::string::npos); // count check warns, not errors
        fs::remove(path);
    }
    SECTION("malformed json line is reported with its number") {
        const fs::path path = write_jsonl("gsm_bad", R"({"id": "a", "question": "q", "answer": "#### 2"}
not json at all
)");
        try {
            mrp::load_dataset(path, mrp::TaskKind::gsm8k);
            FAIL("expected MalformedLine");
        } catch (const mrp::MalformedLine& e) {
            CHECK(std::string(e.what()).find(":2:") != std::string::npos);
        }
        fs::remove(path);
    }
    SECTION("game24 with three numbers") {
        const fs::path path = write_jsonl("g24_bad", R"({"id": "a", "numbers": [1, 2, 3]}
)");
        CHECK_THROWS_AS(mrp::load_dataset(path, mrp::TaskKind::game24),
                        mrp::GoldShapeMismatch);
        fs::remove(path);
    }
    SECTION("game24 out of range") {
        const fs::path path = write_jsonl("g24_range", R"({"id": "a", "numbers": [1, 2, 3, 14]}
)");
        CHECK_THROWS_AS(mrp::load_dataset(path, mrp::TaskKind::game24),
                        mrp::GoldShapeMismatch);
        fs::remove(path);
    }
    SECTION("duplicate ids rejected") {
        const fs::path path = write_jsonl("dup", R"({"id": "a", "question": "q", "answer": "#### 2"}
{"id": "a", "question": "q2", "answer": "#### 3"}
)");
        CHECK_THROWS_AS(mrp::load_dataset(path, mrp::TaskKind::gsm8k), mrp::MalformedLine);
        fs::remove(path);
    }
    SECTION("mmlu answer outside choices") {
        const fs::path path = write_jsonl("mmlu_bad", R"({"id": "a", "question": "q", "choices": {"A": "x", "B": "y"}, "answer": "C"}
)");
        CHECK_THROWS_AS(mrp::load_dataset(path, mrp::TaskKind::mmlu), mrp::GoldShapeMismatch);
        fs::remove(path);
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(mrp::load_dataset("/nonexistent/nope.jsonl", mrp::TaskKind::gsm8k),
                        mrp::DatasetError);
    }
    SECTION("bundled fixtures all load") {
        const fs::path fixtures = fs::path(MRP_SOURCE_ROOT) / "fixtures";
        for (mrp::TaskKind kind : mrp::kAllTaskKinds) {
            const fs::path path = fixtures / (std::string(mrp::to_string(kind)) + ".jsonl");
            const std::vector<mrp::Example> examples = mrp::load_dataset(path, kind);
            CHECK(examples.size() >= 2);
            for (const mrp::Example& ex : examples) {
                CHECK_FALSE(ex.input.empty());
            }
        }
    }
    SECTION("game24 fixtures are all solvable") {
        const fs::path path = fs::path(MRP_SOURCE_ROOT) / "fixtures" / "game24.jsonl";
        for (const mrp::Example& ex : mrp::load_dataset(path, mrp::TaskKind::game24)) {
            CHECK(mrp::solve_game24(std::get<mrp::Game24Gold>(ex.gold).numbers).has_value());
        }
    }
}

TEST_CASE("grade dispatches by task kind", "[tasks]") {
    const mrp::CallSettings settings;
    SECTION("choice task") {
        mrp::Example ex;
        ex.id = "x";
        ex.kind = mrp::TaskKind::mmlu;
        ex.gold = mrp::ChoiceGold{{{'A', "one"}, {'B', "two"}}, 'B'};
        CHECK(mrp::grade(ex, "Answer: B", nullptr, settings).correct());
        CHECK_FALSE(mrp::grade(ex, "Answer: A", nullptr, settings).correct());
    }
    SECTION("judged task needs a backend") {
        mrp::Example ex;
        ex.id = "x";
        ex.kind = mrp::TaskKind::code_readability;
        ex.gold = mrp::CodeGold{"code"};
        CHECK_THROWS_AS(mrp::grade(ex, "rewrite", nullptr, settings), mrp::Error);
    }
}
