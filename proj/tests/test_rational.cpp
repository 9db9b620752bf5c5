#include "mrp/rational.hpp"

#include <catch2/catch_amalgamated.hpp>

using mrp::Rational;

TEST_CASE("decimal literals parse to exact rationals", "[rational]") {
    CHECK(mrp::rational_from_decimal("0.914") == Rational(914, 1000));
    CHECK(mrp::rational_from_decimal("42") == Rational(42));
    CHECK(mrp::rational_from_decimal("42.0") == Rational(42));
    CHECK(mrp::rational_from_decimal("-1.5") == Rational(-3, 2));
    CHECK(mrp::rational_from_decimal(".5") == Rational(1, 2));
    CHECK(mrp::rational_from_decimal("12.") == Rational(12));
    CHECK(mrp::rational_from_decimal("+0.050") == Rational(1, 20));

    CHECK_THROWS_AS(mrp::rational_from_decimal(""), std::invalid_argument);
    CHECK_THROWS_AS(mrp::rational_from_decimal("abc"), std::invalid_argument);
    CHECK_THROWS_AS(mrp::rational_from_decimal("1.2.3"), std::invalid_argument);
    CHECK_THROWS_AS(mrp::rational_from_decimal("1e3"), std::invalid_argument);
}

TEST_CASE("fixed formatting rounds half to even", "[rational]") {
    CHECK(mrp::format_fixed(Rational(1, 16)) == "0.062");  // 0.0625 -> even
    CHECK(mrp::format_fixed(Rational(127, 2000)) == "0.064"); // 0.0635 -> even
    CHECK(mrp::format_fixed(Rational(2, 3)) == "0.667");
    CHECK(mrp::format_fixed(Rational(1, 3)) == "0.333");
    CHECK(mrp::format_fixed(Rational(1)) == "1.000");
    CHECK(mrp::format_fixed(Rational(0)) == "0.000");
    CHECK(mrp::format_fixed(Rational(469, 700)) == "0.670"); // exact 0.67
    CHECK(mrp::format_fixed(Rational(-1, 16)) == "-0.062");
    CHECK(mrp::format_fixed(Rational(1, 2), 0) == "0");
    CHECK(mrp::format_fixed(Rational(3, 2), 0) == "2");
}

TEST_CASE("fraction strings stay in lowest terms", "[rational]") {
    CHECK(mrp::to_fraction_string(Rational(2, 4)) == "1/2");
    CHECK(mrp::to_fraction_string(Rational(7)) == "7");
    CHECK(mrp::to_fraction_string(Rational(0)) == "0");
}
