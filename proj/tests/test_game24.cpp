#include "mrp/tasks.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using mrp::game24::Frac;

TEST_CASE("expression evaluation is exact", "[game24]") {
    auto value_of = [](const std::string& expr) {
        auto result = mrp::game24::evaluate(expr);
        REQUIRE(std::holds_alternative<mrp::game24::Evaluated>(result));
        return std::get<mrp::game24::Evaluated>(result).value;
    };
    CHECK(value_of("(10 - 4) * (13 - 9)") == Frac::of(24));
    CHECK(value_of("8 / (3 - 8 / 3)") == Frac::of(24));
    CHECK(value_of("1 + 2 * 3") == Frac::of(7));
    CHECK(value_of("2 / 3") == Frac{2, 3});
    CHECK(value_of("10 - 4 - 3") == Frac::of(3)); // left associative

    auto error_of = [](const std::string& expr) {
        auto result = mrp::game24::evaluate(expr);
        REQUIRE(std::holds_alternative<std::string>(result));
        return std::get<std::string>(result);
    };
    CHECK(error_of("4 / (9 - 9)") == "division by zero");
    CHECK_FALSE(error_of("4 + )").empty());
    CHECK_FALSE(error_of("(1 + 2").empty());
    CHECK_FALSE(error_of("").empty());
    CHECK_FALSE(error_of("abc").empty());
    CHECK_FALSE(error_of("-3 + 4").empty()); // no unary minus
    CHECK_FALSE(error_of("1 2").empty());
}

TEST_CASE("validator demands the exact literal multiset and exact 24", "[game24][tasks]") {
    const std::array<int, 4> numbers = {4, 9, 10, 13};
    CHECK(mrp::validate_game24("(10 - 4) * (13 - 9)", numbers).correct());
    CHECK(mrp::validate_game24("8 / (3 - 8 / 3)", {3, 3, 8, 8}).correct());

    const mrp::Verdict wrong_literals = mrp::validate_game24("(10 - 4) * 4", numbers);
    CHECK_FALSE(wrong_literals.correct());
    CHECK(wrong_literals.detail == "literal multiset mismatch");

    const mrp::Verdict wrong_value = mrp::validate_game24("10 * 4 - 13 - 9", numbers);
    CHECK_FALSE(wrong_value.correct());
    CHECK(wrong_value.detail.find("evaluates to 18") != std::string::npos);

    const mrp::Verdict div_zero = mrp::validate_game24("13 / (9 - 9) + 10 - 4", numbers);
    CHECK_FALSE(div_zero.correct());
    CHECK(div_zero.detail == "division by zero");

    CHECK(mrp::validate_game24("(10 \xE2\x88\x92 4) \xC3\x97 (13 \xE2\x88\x92 9)", numbers)
              .correct()); // unicode − and ×
    CHECK_FALSE(mrp::validate_game24("24", numbers).correct());
}

TEST_CASE("solver finds solutions exactly when they exist", "[game24]") {
    SECTION("known positives validate") {
        for (const std::array<int, 4>& numbers :
             {std::array<int, 4>{4, 9, 10, 13}, std::array<int, 4>{3, 3, 8, 8},
              std::array<int, 4>{1, 2, 3, 4}, std::array<int, 4>{2, 2, 6, 6},
              std::array<int, 4>{1, 5, 5, 5}}) {
            const std::optional<std::string> expr = mrp::solve_game24(numbers);
            REQUIRE(expr.has_value());
            CHECK(mrp::validate_game24(*expr, numbers).correct());
        }
    }
    SECTION("known negative") {
        CHECK_FALSE(mrp::solve_game24({1, 1, 1, 1}).has_value());
    }
    SECTION("out-of-range numbers rejected") {
        CHECK_THROWS_AS(mrp::solve_game24({0, 1, 2, 3}), std::invalid_argument);
        CHECK_THROWS_AS(mrp::solve_game24({1, 2, 3, 14}), std::invalid_argument);
    }
}

TEST_CASE("random solver results always pass the validator", "[game24]") {
    std::mt19937 rng(2024);
    std::uniform_int_distribution<int> number(1, 13);
    int solved = 0;
    for (int round = 0; round < 60; ++round) {
        const std::array<int, 4> numbers = {number(rng), number(rng), number(rng), number(rng)};
        const std::optional<std::string> expr = mrp::solve_game24(numbers);
        if (expr) {
            ++solved;
            CHECK(mrp::validate_game24(*expr, numbers).correct());
        }
    }
    CHECK(solved > 0); // most random draws are solvable
}

TEST_CASE("wrong-literal expressions are always rejected", "[game24]") {
    std::mt19937 rng(77);
    std::uniform_int_distribution<int> number(1, 13);
    std::uniform_int_distribution<int> op(0, 3);
    const char* ops = "+-*/";

    int rejected = 0;
    for (int round = 0; round < 1000; ++round) {
        // random fully parenthesized expression over four random literals
        std::array<int, 4> literals = {number(rng), number(rng), number(rng), number(rng)};
        std::string expr = "((" + std::to_string(literals[0]) + " " + ops[op(rng)] + " " +
                           std::to_string(literals[1]) + ") " + ops[op(rng)] + " (" +
                           std::to_string(literals[2]) + " " + ops[op(rng)] + " " +
                           std::to_string(literals[3]) + "))";
        // a target multiset that provably differs
        std::array<int, 4> target = literals;
        const std::size_t bump = rng() % 4;
        target[bump] = target[bump] == 13 ? 1 : target[bump] + 1;
        std::array<int, 4> sorted_literals = literals;
        std::array<int, 4> sorted_target = target;
        std::sort(sorted_literals.begin(), sorted_literals.end());
        std::sort(sorted_target.begin(), sorted_target.end());
        if (sorted_literals == sorted_target) {
            continue;
        }
        const mrp::Verdict verdict = mrp::validate_game24(expr, target);
        CHECK_FALSE(verdict.correct());
        ++rejected;
    }
    CHECK(rejected > 900);
}

TEST_CASE("grading free-form output finds the expression", "[game24][tasks]") {
    const std::array<int, 4> numbers = {4, 9, 10, 13};
    SECTION("answer marker") {
        CHECK(mrp::grade_game24("Let me try a few paths.\nAnswer: (10-4)*(13-9)", numbers)
                  .correct());
    }
    SECTION("trailing equals is stripped") {
        CHECK(mrp::grade_game24("(10 - 4) * (13 - 9) = 24", numbers).correct());
    }
    SECTION("prose after the expression") {
        CHECK(mrp::grade_game24("(10-4)*(13-9)\nwhich equals 24", numbers).correct());
    }
    SECTION("bare number is not mistaken for the answer") {
        const mrp::Verdict v = mrp::grade_game24("I give up, maybe the answer is\n24", numbers);
        CHECK_FALSE(v.correct());
    }
    SECTION("no expression at all") {
        const mrp::Verdict v = mrp::grade_game24("no idea", numbers);
        CHECK_FALSE(v.correct());
        CHECK(v.detail == "no arithmetic expression found in output");
    }
    SECTION("wrong expression still graded") {
        CHECK_FALSE(mrp::grade_game24("Answer: (10+4)*(13-9)", numbers).correct());
    }
}
